//! `morphloss` command-line tool.
//!
//! Exit status: 0 on success, 2 for usage errors (bad flags, unreadable
//! paths), 1 when the computation itself fails.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "morphloss",
    version,
    about = "PPG morphology losses, analysis and reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic PPG and its metadata sidecar.
    Synth(SynthArgs),
    /// Detect beats, fiducials and SDPPG a-e waves.
    Sdppg(SdppgArgs),
    /// DB4 wavelet decomposition.
    Wavelet(WaveletArgs),
    /// Spectral-peak heart rate, optionally with the spectrum as CSV.
    Hr(HrArgs),
    /// Evaluate the weighted loss of a prediction against a reference.
    Loss(LossCmdArgs),
    /// Finite-difference check of an analytic gradient on random signals.
    Gradcheck(GradcheckArgs),
    /// Reconstruct a waveform by descent on the total loss.
    Reconstruct(ReconstructArgs),
    /// Waveform and HR metrics over one or more prediction/reference pairs.
    Eval(EvalArgs),
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected <lo,hi>")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("band low: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("band high: {e}"))?;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(format!("band ({lo}, {hi}) must satisfy 0 < lo < hi"));
    }
    Ok((lo, hi))
}

/// Weights and configuration shared by every loss-evaluating command.
#[derive(Debug, Args)]
struct LossArgs {
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long = "gamma-sd", default_value_t = 1.2)]
    gamma_sd: f64,
    /// Soft-DTW temperature.
    #[arg(long = "gamma-dtw", default_value_t = 1.0)]
    gamma_dtw: f64,
    /// Half-width of the frequency-sparsity peak window, Hz.
    #[arg(long = "delta-f", default_value_t = 0.2)]
    delta_f: f64,
    #[arg(long, value_parser = parse_band, default_value = "0.5,5")]
    band: (f64, f64),
    /// DB4 depth for the frequency-domain variance term.
    #[arg(long, default_value_t = 4)]
    levels: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    hr: f64,
    #[arg(long)]
    fs: f64,
    #[arg(long)]
    dur: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.12)]
    width: f64,
    #[arg(long = "dia-amp", default_value_t = 0.4)]
    dia_amp: f64,
    #[arg(long = "dia-delay", default_value_t = 0.30)]
    dia_delay: f64,
    /// White noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long = "baseline-amp", default_value_t = 0.0)]
    baseline_amp: f64,
    #[arg(long = "baseline-freq", default_value_t = 0.2)]
    baseline_freq: f64,
    #[arg(short = 'o')]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SdppgArgs {
    #[arg(long)]
    input: PathBuf,
    /// Moving-average length applied before the second difference.
    #[arg(long, default_value_t = 5)]
    smooth: usize,
    /// `.csv` for one row per feature, anything else for JSON.
    #[arg(short = 'o')]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct WaveletArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(short = 'o')]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct HrArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_band, default_value = "0.5,5")]
    band: (f64, f64),
    /// Optional `freq_hz,magnitude` CSV of the in-band spectrum.
    #[arg(short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LossCmdArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[command(flatten)]
    loss: LossArgs,
    /// Report path; printed to stdout when omitted.
    #[arg(short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// sparsity_time, sparsity_sd, sparsity_freq, variance_time,
    /// variance_freq, variance_sd, soft_dtw or total.
    #[arg(long)]
    loss: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 16.0)]
    fs: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[command(flatten)]
    loss_cfg: LossArgs,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    init: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// plain_gd, momentum or adaptive_moments.
    #[arg(long, default_value = "adaptive_moments")]
    method: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long = "log-every", default_value_t = 1)]
    log_every: usize,
    #[command(flatten)]
    loss: LossArgs,
    /// Final signal; `.trace.csv`, `.metrics.json` and `.overlay.csv`
    /// siblings are written next to it.
    #[arg(short = 'o')]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted signals, paired in order with `--ref`.
    #[arg(long, required = true, num_args = 1..)]
    pred: Vec<PathBuf>,
    #[arg(long = "ref", required = true, num_args = 1..)]
    reference: Vec<PathBuf>,
    /// `.csv` for the per-pair table with mean/std rows, otherwise JSON.
    #[arg(short = 'o')]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("morphloss: {err:#}");
            if err.is::<commands::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
