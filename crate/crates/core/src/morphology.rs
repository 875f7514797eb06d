//! Beat onsets, systolic/diastolic fiducials and second-derivative a–e waves.
//!
//! Every threshold is relative to a signal range, so detection does not move
//! under `a * x + c` with `a > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_num;
use crate::signal::{min_max, second_difference_slice, Signal};
use crate::spectral::spectral_peak_hr_in_band;

/// Near-ties closer than this fraction of the range resolve to the earlier index.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub min_hr_bpm: f64,
    pub max_hr_bpm: f64,
    /// Systolic candidates must clear `min + peak_level * range`. A secondary
    /// wave taller than this can be taken for a beat of its own.
    pub peak_level: f64,
    /// Rise that ends the walk back from a systolic peak to its onset, as a
    /// fraction of the signal range.
    pub onset_hysteresis: f64,
    /// Notch/diastolic swing needed, as a fraction of the beat's
    /// onset-to-systolic amplitude.
    pub prominence: f64,
    /// Swing needed between SDPPG extrema, as a fraction of the SDPPG range.
    pub sd_prominence: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            min_hr_bpm: 30.0,
            max_hr_bpm: 300.0,
            peak_level: 0.5,
            onset_hysteresis: 0.05,
            prominence: 0.03,
            sd_prominence: 0.05,
        }
    }
}

/// Fiducials of one beat, as sample indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Beat {
    pub onset: usize,
    /// Onset of the next beat.
    pub end: usize,
    pub systolic_peak: usize,
    pub dicrotic_notch: Option<usize>,
    pub diastolic_peak: Option<usize>,
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub c: Option<usize>,
    pub d: Option<usize>,
    pub e: Option<usize>,
}

impl Beat {
    fn features(&self) -> [(&'static str, Option<usize>); 9] {
        [
            ("onset", Some(self.onset)),
            ("systolic_peak", Some(self.systolic_peak)),
            ("dicrotic_notch", self.dicrotic_notch),
            ("diastolic_peak", self.diastolic_peak),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiducialSet {
    pub fs: f64,
    pub beats: Vec<Beat>,
    /// Smoothed SDPPG the a–e indices refer to, when they were detected.
    #[serde(skip)]
    pub sdppg: Option<Vec<f64>>,
}

impl FiducialSet {
    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    /// Fraction of beats with a detected diastolic peak.
    pub fn diastolic_rate(&self) -> f64 {
        if self.beats.is_empty() {
            return 0.0;
        }
        let hits = self
            .beats
            .iter()
            .filter(|b| b.diastolic_peak.is_some())
            .count();
        hits as f64 / self.beats.len() as f64
    }

    /// Checks index ranges and the per-beat ordering rules.
    pub fn validate(&self, len: usize) -> Result<()> {
        let fail = |k: usize, m: &str| Err(Error::Malformed(format!("beat {k}: {m}")));
        for (k, b) in self.beats.iter().enumerate() {
            if b.features()
                .iter()
                .any(|(_, i)| i.is_some_and(|i| i >= len))
            {
                return fail(k, "index out of range");
            }
            if b.onset >= b.systolic_peak {
                return fail(k, "onset not before systolic peak");
            }
            if let Some(n) = b.dicrotic_notch {
                if n <= b.systolic_peak || b.diastolic_peak.is_some_and(|d| d <= n) {
                    return fail(k, "notch out of order");
                }
            }
            if b.diastolic_peak.is_some_and(|d| d <= b.systolic_peak) {
                return fail(k, "diastolic peak before systolic peak");
            }
            let waves: Vec<usize> = [b.a, b.b, b.c, b.d, b.e].into_iter().flatten().collect();
            if waves.windows(2).any(|w| w[0] >= w[1]) {
                return fail(k, "a-e out of order");
            }
            if let Some(sd) = &self.sdppg {
                if b.a.is_some_and(|i| sd[i] <= 0.0) || b.b.is_some_and(|i| sd[i] >= 0.0) {
                    return fail(k, "a must be positive and b negative");
                }
            }
        }
        Ok(())
    }

    /// `beat,feature,index,time_s,value` rows. PPG features take their value
    /// from `ppg`, a–e from the stored SDPPG.
    pub fn to_csv(&self, ppg: &Signal) -> String {
        let mut out = String::from("beat,feature,index,time_s,value\n");
        for (k, b) in self.beats.iter().enumerate() {
            for (name, idx) in b.features() {
                let Some(i) = idx else { continue };
                let value = if name.len() == 1 {
                    self.sdppg.as_ref().map_or(f64::NAN, |sd| sd[i])
                } else {
                    ppg.samples()[i]
                };
                out.push_str(&format!(
                    "{k},{name},{i},{},{}\n",
                    fmt_num(i as f64 / self.fs),
                    fmt_num(value)
                ));
            }
        }
        out
    }
}

fn argmax(x: &[f64], lo: usize, hi: usize, tol: f64) -> usize {
    let mut best = lo;
    for i in lo + 1..hi {
        if x[i] > x[best] + tol {
            best = i;
        }
    }
    best
}

/// Systolic peak candidates: local maxima above the level, thinned greedily
/// by height with a refractory distance.
fn systolic_peaks(x: &[f64], fs: f64, cfg: &DetectorConfig, period_s: Option<f64>) -> Vec<usize> {
    let (lo, hi) = min_max(x);
    let level = lo + cfg.peak_level * (hi - lo);
    let mut cand: Vec<usize> = (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] >= level)
        .collect();
    cand.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));

    let min_gap = 60.0 / cfg.max_hr_bpm;
    let refractory = period_s.map_or(min_gap, |t| (0.6 * t).max(min_gap));
    let gap = (refractory * fs).round() as usize;
    let mut taken: Vec<usize> = Vec::new();
    for i in cand {
        if taken.iter().all(|&j| i.abs_diff(j) >= gap.max(1)) {
            taken.push(i);
        }
    }
    taken.sort_unstable();
    taken
}

fn check_band(cfg: &DetectorConfig) -> Result<()> {
    let (lo, hi) = (cfg.min_hr_bpm, cfg.max_hr_bpm);
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Error::BadConfig(format!("bad HR band ({lo}, {hi}) bpm")));
    }
    Ok(())
}

/// Beat onsets with the default detector settings and a custom HR band.
pub fn detect_onsets(ppg: &Signal, min_hr_bpm: f64, max_hr_bpm: f64) -> Result<Vec<usize>> {
    let cfg = DetectorConfig {
        min_hr_bpm,
        max_hr_bpm,
        ..Default::default()
    };
    detect_onsets_with(ppg, &cfg)
}

/// Onset of each beat: the foot reached by walking back from a systolic peak
/// until the signal turns up again. When several samples tie for the foot the
/// one closest to the upstroke wins.
pub fn detect_onsets_with(ppg: &Signal, cfg: &DetectorConfig) -> Result<Vec<usize>> {
    check_band(cfg)?;
    let needed = 2.0 * 60.0 / cfg.min_hr_bpm;
    if ppg.duration() < needed {
        return Err(Error::TooShort {
            needed: (needed * ppg.fs()).ceil() as usize,
            got: ppg.len(),
        });
    }
    let x = ppg.samples();
    let (lo, hi) = min_max(x);
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::NoBeats);
    }

    // The spectral estimate sets the refractory distance; short records fall
    // back to the band's upper rate.
    let band = (cfg.min_hr_bpm / 60.0, cfg.max_hr_bpm / 60.0);
    let period = match spectral_peak_hr_in_band(ppg, band) {
        Ok(hr) => Some(60.0 / hr),
        Err(Error::TooShort { .. }) => None,
        Err(Error::NoPeak) => return Err(Error::NoBeats),
        Err(e) => return Err(e),
    };
    let peaks = systolic_peaks(x, ppg.fs(), cfg, period);

    let h = cfg.onset_hysteresis * range;
    let tol = TIE_TOL * range;
    let mut onsets = Vec::new();
    let mut floor = 0;
    for &p in &peaks {
        let mut min_v = x[p];
        let mut turned = false;
        for i in (floor..p).rev() {
            if x[i] < min_v {
                min_v = x[i];
            } else if x[i] > min_v + h {
                turned = true;
                break;
            }
        }
        floor = p;
        if !turned {
            continue;
        }
        if let Some(i) = (0..p).rev().find(|&i| x[i] <= min_v + tol) {
            if onsets.last().is_none_or(|&o| o < i) {
                onsets.push(i);
            }
        }
    }
    if onsets.is_empty() {
        return Err(Error::NoBeats);
    }
    Ok(onsets)
}

pub fn detect_fiducials(ppg: &Signal) -> Result<FiducialSet> {
    detect_fiducials_with(ppg, &DetectorConfig::default())
}

/// Per beat between consecutive onsets: the systolic peak is the maximum,
/// the notch the first swing low after it and the diastolic peak the
/// following swing high. Swings smaller than the prominence do not count.
pub fn detect_fiducials_with(ppg: &Signal, cfg: &DetectorConfig) -> Result<FiducialSet> {
    let onsets = detect_onsets_with(ppg, cfg)?;
    if onsets.len() < 2 {
        return Err(Error::NoBeats);
    }
    let x = ppg.samples();
    let (lo, hi) = min_max(x);
    let tol = TIE_TOL * (hi - lo);

    let mut beats = Vec::with_capacity(onsets.len() - 1);
    for w in onsets.windows(2) {
        let (start, end) = (w[0], w[1]);
        let sys = argmax(x, start + 1, end, tol);
        let h = cfg.prominence * (x[sys] - x[start]);
        let (notch, dia) = notch_and_diastolic(x, sys, end, h, tol);
        beats.push(Beat {
            onset: start,
            end,
            systolic_peak: sys,
            dicrotic_notch: notch,
            diastolic_peak: dia,
            ..Default::default()
        });
    }
    Ok(FiducialSet {
        fs: ppg.fs(),
        beats,
        sdppg: None,
    })
}

fn notch_and_diastolic(
    x: &[f64],
    sys: usize,
    end: usize,
    h: f64,
    tol: f64,
) -> (Option<usize>, Option<usize>) {
    if h <= 0.0 {
        return (None, None);
    }
    let mut i = sys + 1;
    let mut low = sys;
    let mut notch = None;
    while i <= end {
        if x[i] < x[low] - tol {
            low = i;
        } else if x[i] >= x[low] + h {
            notch = Some(low);
            break;
        }
        i += 1;
    }
    let Some(n) = notch else { return (None, None) };
    let mut high = i;
    while i <= end {
        if x[i] > x[high] + tol {
            high = i;
        } else if x[i] <= x[high] - h {
            return (Some(n), Some(high));
        }
        i += 1;
    }
    (Some(n), None)
}

/// Centred moving average; windows are cut at the edges.
pub fn moving_average(x: &[f64], win: usize) -> Vec<f64> {
    let win = win.max(1);
    let left = (win - 1) / 2;
    let right = win - 1 - left;
    let mut prefix = vec![0.0; x.len() + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(left);
            let b = (i + right + 1).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Alternating extrema, each confirmed by a swing of at least `h` away from
/// it. Returns `(index, is_max)`; the first and last samples are skipped.
fn turning_points(x: &[f64], h: f64, tol: f64) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    if x.len() < 3 || h <= 0.0 {
        return out;
    }
    let mut mode: Option<bool> = None;
    let (mut hi, mut lo) = (0usize, 0usize);
    for i in 1..x.len() {
        match mode {
            None => {
                if x[i] > x[hi] + tol {
                    hi = i;
                }
                if x[i] < x[lo] - tol {
                    lo = i;
                }
                if x[i] >= x[lo] + h {
                    out.push((lo, false));
                    mode = Some(true);
                    hi = i;
                } else if x[i] <= x[hi] - h {
                    out.push((hi, true));
                    mode = Some(false);
                    lo = i;
                }
            }
            Some(true) => {
                if x[i] > x[hi] + tol {
                    hi = i;
                } else if x[i] <= x[hi] - h {
                    out.push((hi, true));
                    mode = Some(false);
                    lo = i;
                }
            }
            Some(false) => {
                if x[i] < x[lo] - tol {
                    lo = i;
                } else if x[i] >= x[lo] + h {
                    out.push((lo, false));
                    mode = Some(true);
                    hi = i;
                }
            }
        }
    }
    let last = x.len() - 1;
    out.retain(|&(i, _)| i > 0 && i < last);
    out
}

pub fn detect_sdppg_waves(ppg: &Signal, smooth_win: usize) -> Result<FiducialSet> {
    detect_sdppg_waves_with(ppg, smooth_win, &DetectorConfig::default())
}

/// a–e waves on the second difference of the smoothed PPG. Per beat, a is the
/// first positive maximum from the onset, b the minimum after it (must be
/// negative). Three further extrema give c, d, e; fewer give e alone. The
/// search window reaches a few samples past both onsets, since smoothing
/// shifts extrema that sit right at an onset.
pub fn detect_sdppg_waves_with(
    ppg: &Signal,
    smooth_win: usize,
    cfg: &DetectorConfig,
) -> Result<FiducialSet> {
    if smooth_win == 0 {
        return Err(Error::BadConfig("smooth_win must be >= 1".into()));
    }
    let mut set = detect_fiducials_with(ppg, cfg)?;
    let x = ppg.samples();
    let sd = second_difference_slice(&moving_average(x, smooth_win))?;
    let (lo, hi) = min_max(&sd);
    let tps = turning_points(&sd, cfg.sd_prominence * (hi - lo), TIE_TOL * (hi - lo));
    let slack = smooth_win / 2 + 2;

    for beat in set.beats.iter_mut() {
        let lo_i = beat.onset.saturating_sub(slack);
        let hi_i = beat.end + slack;
        let window: Vec<(usize, bool)> = tps
            .iter()
            .copied()
            .filter(|&(i, _)| i >= lo_i && i <= hi_i)
            .collect();
        let Some(ai) = window.iter().position(|&(i, m)| m && sd[i] > 0.0) else {
            continue;
        };
        let Some(&(b, false)) = window.get(ai + 1) else {
            continue;
        };
        if sd[b] >= 0.0 {
            continue;
        }
        beat.a = Some(window[ai].0);
        beat.b = Some(b);
        let rest = &window[ai + 2..];
        if rest.len() >= 3 {
            beat.c = Some(rest[0].0);
            beat.d = Some(rest[1].0);
            beat.e = Some(rest[2].0);
        } else if let Some(&(e, _)) = rest.first() {
            beat.e = Some(e);
        }
    }
    set.sdppg = Some(sd);
    Ok(set)
}
