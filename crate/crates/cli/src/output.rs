use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes every file to a temporary sibling first and renames only once all
/// of them were written, so a failure leaves no partial outputs behind.
pub fn write_all_atomic(files: &[(PathBuf, String)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, text) in files {
        let mut tmp = NamedTempFile::new_in(parent_dir(path)).with_context(|| {
            format!("cannot create a temporary file next to {}", path.display())
        })?;
        tmp.write_all(text.as_bytes())
            .with_context(|| format!("cannot write {}", path.display()))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path)
            .with_context(|| format!("cannot move output into place at {}", path.display()))?;
    }
    Ok(())
}

/// `dir/stem.<suffix>` for an output `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("out/ppg.json"), "meta.json"),
            PathBuf::from("out/ppg.meta.json")
        );
        assert_eq!(
            sibling(Path::new("r.csv"), "trace.csv"),
            PathBuf::from("r.trace.csv")
        );
    }

    #[test]
    fn writes_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        write_all_atomic(&[(a.clone(), "1".into()), (b.clone(), "2".into())]).unwrap();
        assert_eq!(std::fs::read_to_string(a).unwrap(), "1");
        assert_eq!(std::fs::read_to_string(b).unwrap(), "2");
    }

    #[test]
    fn nothing_lands_when_a_target_dir_is_missing() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("missing/b.txt");
        assert!(write_all_atomic(&[(a.clone(), "1".into()), (b, "2".into())]).is_err());
        assert!(!a.exists());
    }
}
