use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use morphloss::io::{encode_signal, fmt_num, read_signal, to_json_string};
use morphloss::losses::{check_loss, total_loss, GradCheckContext, LossId};
use morphloss::metrics::{frechet, hr_error_stats, pearson, rmse, HrSeriesPair};
use morphloss::morphology::detect_sdppg_waves;
use morphloss::reconstruct::{reconstruct, OptimConfig, OptimMethod};
use morphloss::spectral::{dwt_db4, magnitude_spectrum, spectral_peak_hr_in_band};
use morphloss::synth::{add_noise, synth_ppg, NoiseConfig, SynthConfig};
use morphloss::{LossWeights, NormMode, Signal, SoftDtwConfig, SparsityFreqConfig};
use serde_json::{json, Value};

use crate::output::{is_csv, sibling, write_all_atomic};
use crate::{
    Command, EvalArgs, GradcheckArgs, HrArgs, LossArgs, LossCmdArgs, ReconstructArgs, SdppgArgs,
    SynthArgs, WaveletArgs,
};

/// Bad invocation detected after flag parsing; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!(
            "input {} is not a readable file",
            path.display()
        )));
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<()> {
    if path.is_dir() {
        return Err(usage(format!("output {} is a directory", path.display())));
    }
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(usage(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    Ok(())
}

fn load(path: &Path) -> Result<Signal> {
    read_signal(path).with_context(|| format!("reading {}", path.display()))
}

impl LossArgs {
    fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma_sd: self.gamma_sd,
        }
    }

    fn dtw(&self) -> SoftDtwConfig {
        SoftDtwConfig::with_gamma(self.gamma_dtw)
    }

    fn freq(&self) -> SparsityFreqConfig {
        SparsityFreqConfig {
            band: self.band,
            delta_f: self.delta_f,
            wavelet_levels: self.levels,
        }
    }
}

pub fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Sdppg(a) => sdppg(a),
        Command::Wavelet(a) => wavelet(a),
        Command::Hr(a) => hr(a),
        Command::Loss(a) => loss(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Eval(a) => eval(a),
    }
    .map(|()| ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<()> {
    check_output(&a.out)?;
    let cfg = SynthConfig {
        hr_bpm: a.hr,
        fs: a.fs,
        duration_s: a.dur,
        systolic_width_s: a.width,
        diastolic_amp: a.dia_amp,
        diastolic_delay_s: a.dia_delay,
        seed: a.seed,
    };
    let noise = NoiseConfig {
        white_sigma: a.noise,
        baseline_amp: a.baseline_amp,
        baseline_freq_hz: a.baseline_freq,
        seed: a.seed,
    };
    if !(noise.white_sigma >= 0.0 && noise.baseline_amp >= 0.0) {
        return Err(usage("--noise and --baseline-amp must be >= 0"));
    }
    let ppg = synth_ppg(&cfg)?;
    let signal = add_noise(&ppg.signal, &noise);
    let mut meta: Value = serde_json::from_str(&ppg.metadata_json())?;
    meta["noise"] = serde_json::to_value(&noise)?;
    write_all_atomic(&[
        (a.out.clone(), encode_signal(&signal, &a.out)?),
        (sibling(&a.out, "meta.json"), to_json_string(&meta)?),
    ])
}

fn sdppg(a: SdppgArgs) -> Result<()> {
    check_input(&a.input)?;
    check_output(&a.out)?;
    let x = load(&a.input)?;
    let set = detect_sdppg_waves(&x, a.smooth)?;
    let text = if is_csv(&a.out) {
        set.to_csv(&x)
    } else {
        to_json_string(&set)?
    };
    write_all_atomic(&[(a.out, text)])?;
    println!(
        "beats={} diastolic_rate={}",
        set.len(),
        fmt_num(set.diastolic_rate())
    );
    Ok(())
}

fn wavelet(a: WaveletArgs) -> Result<()> {
    check_input(&a.input)?;
    check_output(&a.out)?;
    let d = dwt_db4(&load(&a.input)?, a.levels)?;
    write_all_atomic(&[(a.out, to_json_string(&d)?)])
}

fn hr(a: HrArgs) -> Result<()> {
    check_input(&a.input)?;
    if let Some(out) = &a.out {
        check_output(out)?;
    }
    let x = load(&a.input)?;
    let bpm = spectral_peak_hr_in_band(&x, a.band)?;
    if let Some(out) = a.out {
        write_all_atomic(&[(out, magnitude_spectrum(&x, a.band)?.to_csv())])?;
    }
    println!("{}", fmt_num(bpm));
    Ok(())
}

fn emit(out: Option<PathBuf>, text: String) -> Result<()> {
    match out {
        Some(path) => write_all_atomic(&[(path, text)]),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn loss(a: LossCmdArgs) -> Result<()> {
    check_input(&a.pred)?;
    check_input(&a.reference)?;
    if let Some(out) = &a.out {
        check_output(out)?;
    }
    let (pred, reference) = (load(&a.pred)?, load(&a.reference)?);
    let b = total_loss(
        &pred,
        &reference,
        &a.loss.weights(),
        &a.loss.dtw(),
        &a.loss.freq(),
    )?;
    emit(a.out, to_json_string(&b.report())?)
}

/// The check ran but the error exceeded the tolerance.
#[derive(Debug)]
struct GradcheckFailed;

impl fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("max relative error above tolerance")
    }
}

impl std::error::Error for GradcheckFailed {}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let id: LossId = a.loss.parse().map_err(|e| usage(format!("{e}")))?;
    if a.n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    let random = |seed: u64| -> Result<Signal> {
        let zero = Signal::new(vec![0.0; a.n], a.fs)?;
        Ok(add_noise(&zero, &NoiseConfig::white(1.0, seed)))
    };
    let x = random(a.seed)?;
    let mut ctx = GradCheckContext::new(Some(random(a.seed.wrapping_add(1))?));
    ctx.weights = a.loss_cfg.weights();
    ctx.dtw = a.loss_cfg.dtw();
    ctx.freq = a.loss_cfg.freq();
    let rep = check_loss(id, &x, &ctx, a.eps)?;
    println!(
        "loss={} max_rel_error={} checked={} skipped={}",
        id.name(),
        fmt_num(rep.max_rel_error),
        rep.checked,
        rep.skipped
    );
    if rep.max_rel_error < a.tol {
        Ok(())
    } else {
        Err(GradcheckFailed.into())
    }
}

fn overlay_csv(pred: &Signal, reference: &Signal) -> String {
    let mut out = String::from("time_s_pred,pred,time_s_ref,ref\n");
    let rows = pred.len().max(reference.len());
    let cell = |s: &Signal, i: usize| match s.samples().get(i) {
        Some(v) => format!("{},{}", fmt_num(i as f64 / s.fs()), fmt_num(*v)),
        None => ",".into(),
    };
    for i in 0..rows {
        out.push_str(&format!("{},{}\n", cell(pred, i), cell(reference, i)));
    }
    out
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    check_input(&a.target)?;
    check_input(&a.init)?;
    check_output(&a.out)?;
    let method: OptimMethod = a.method.parse().map_err(|e| usage(format!("{e}")))?;
    let ocfg = OptimConfig {
        max_iters: a.iters,
        step: a.step,
        method,
        tol: a.tol,
        seed: a.seed,
        log_every: a.log_every,
        ..Default::default()
    };
    let (target, init) = (load(&a.target)?, load(&a.init)?);
    let r = reconstruct(
        &target,
        &init,
        &a.loss.weights(),
        &ocfg,
        &a.loss.dtw(),
        &a.loss.freq(),
    )?;
    let metrics = json!({
        "iters_run": r.iters_run,
        "final_loss": r.final_loss.total,
        "metrics": r.final_metrics,
    });
    write_all_atomic(&[
        (a.out.clone(), encode_signal(&r.final_signal, &a.out)?),
        (sibling(&a.out, "trace.csv"), r.trace_csv()),
        (sibling(&a.out, "metrics.json"), to_json_string(&metrics)?),
        (
            sibling(&a.out, "overlay.csv"),
            overlay_csv(&r.final_signal, &target),
        ),
    ])
}

struct PairMetrics {
    name: String,
    pearson: f64,
    frechet: f64,
    rmse: f64,
    hr_pred: f64,
    hr_true: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (m, (ss / (n - 1.0)).sqrt())
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.pred.len() != a.reference.len() {
        return Err(usage(format!(
            "{} --pred paths but {} --ref paths",
            a.pred.len(),
            a.reference.len()
        )));
    }
    for p in a.pred.iter().chain(&a.reference) {
        check_input(p)?;
    }
    if let Some(out) = &a.out {
        check_output(out)?;
    }
    let mut pairs: Vec<(PathBuf, PathBuf)> = a.pred.into_iter().zip(a.reference).collect();
    pairs.sort();

    let mut rows = Vec::with_capacity(pairs.len());
    for (p, r) in &pairs {
        let (pred, reference) = (load(p)?, load(r)?);
        let (zp, zr) = (
            pred.normalize(NormMode::Zscore)?,
            reference.normalize(NormMode::Zscore)?,
        );
        let band = SparsityFreqConfig::default().band;
        let ctx = |path: &Path| format!("heart rate of {}", path.display());
        rows.push(PairMetrics {
            name: p.display().to_string(),
            pearson: pearson(&zp, &zr)?,
            frechet: frechet(&zp, &zr)?,
            rmse: rmse(&zp, &zr)?,
            hr_pred: spectral_peak_hr_in_band(&pred, band).with_context(|| ctx(p))?,
            hr_true: spectral_peak_hr_in_band(&reference, band).with_context(|| ctx(r))?,
        });
    }

    let col = |f: fn(&PairMetrics) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let hr_pair = HrSeriesPair::new(col(|m| m.hr_pred), col(|m| m.hr_true))?;
    let text = if a.out.as_deref().is_some_and(is_csv) {
        eval_csv(&rows, col)
    } else {
        let stats = hr_error_stats(&hr_pair);
        let (mae, hr_rmse, r) = match stats {
            Ok(s) => (s.mae_bpm, s.rmse_bpm, Some(s.r)),
            // too few pairs, or a constant HR series, leaves r undefined
            Err(_) => {
                let err = col(|m| (m.hr_pred - m.hr_true).abs());
                let mae = err.iter().sum::<f64>() / err.len() as f64;
                let rms = (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt();
                (mae, rms, None)
            }
        };
        let report = json!({
            "pearson": mean_std(&col(|m| m.pearson)).0,
            "frechet": mean_std(&col(|m| m.frechet)).0,
            "rmse": mean_std(&col(|m| m.rmse)).0,
            "hr": { "mae": mae, "rmse": hr_rmse, "r": r },
        });
        to_json_string(&report)?
    };
    emit(a.out, text)
}

fn eval_csv(rows: &[PairMetrics], col: impl Fn(fn(&PairMetrics) -> f64) -> Vec<f64>) -> String {
    let mut out =
        String::from("pair,pearson,frechet,rmse,hr_pred_bpm,hr_true_bpm,hr_abs_err_bpm\n");
    let line = |name: &str, v: [f64; 6]| {
        let cells: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
        format!("{},{}\n", name.replace(',', ";"), cells.join(","))
    };
    for m in rows {
        let err = (m.hr_pred - m.hr_true).abs();
        out.push_str(&line(
            &m.name,
            [m.pearson, m.frechet, m.rmse, m.hr_pred, m.hr_true, err],
        ));
    }
    let cols = [
        col(|m| m.pearson),
        col(|m| m.frechet),
        col(|m| m.rmse),
        col(|m| m.hr_pred),
        col(|m| m.hr_true),
        col(|m| (m.hr_pred - m.hr_true).abs()),
    ];
    let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_std(c)).collect();
    out.push_str(&line("mean", std::array::from_fn(|i| stats[i].0)));
    out.push_str(&line("std", std::array::from_fn(|i| stats[i].1)));
    out
}
