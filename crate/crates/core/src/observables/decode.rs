use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::rate::{RateSeries, Species};
use crate::observables::spectrum::{SpectrumPoint, SpectrumSnapshot};
use crate::potentials::Envelope;

/// Tuning for the temporal decoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    /// Largest lag searched by the response-time decoder.
    pub max_lag: f64,
    /// Sign relating the rate deviation to the envelope. A positive value
    /// means `mu - baseline` follows `-f(t - tau)`.
    pub response_sign: f64,
    /// Extrema smaller than this fraction of the largest are ignored when
    /// estimating a period.
    pub prominence: f64,
    /// Features of `|mu - baseline|` smaller than this fraction of the
    /// largest are ignored when measuring a pulse interval.
    pub feature_fraction: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            max_lag: 0.006,
            response_sign: 1.0,
            prominence: 0.3,
            feature_fraction: 0.15,
        }
    }
}

/// Pearson correlation of `a` against `b`, skipping non-finite pairs.
fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 3 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (a[i] - ma, b[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Vertex of the parabola through three equally spaced samples, as an
/// offset in `[-1, 1]` from the middle one.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < f64::EPSILON * mid.abs().max(1.0) {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-1.0, 1.0)
}

/// Delay between an envelope and the rate deviation it causes.
///
/// Scans lags on the output lattice, picks the earliest local maximum of
/// the correlation within 80% of the global one, and refines it with a
/// parabola.
pub fn measure_response_time(
    rate: &RateSeries,
    baseline: &RateSeries,
    env: &Envelope,
    options: &DecodeOptions,
) -> Result<f64> {
    if env.is_static() {
        return Err(Error::Signal("envelope has no temporal feature".into()));
    }
    let dev = rate.deviation_from(baseline)?;
    let times = &rate.times;
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let drive: Vec<f64> = times
        .iter()
        .map(|&t| -options.response_sign * env.value(t))
        .collect();
    let spread = drive.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - drive.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread > 1e-9) {
        return Err(Error::Signal("envelope has no temporal feature".into()));
    }
    let max_shift = ((options.max_lag / dt).round() as usize).min(n.saturating_sub(8));
    let corr: Vec<f64> = (0..=max_shift)
        .map(|s| pearson(&dev[s..], &drive[..n - s]).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let best = corr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() || best <= 0.0 {
        return Err(Error::Signal("no positive correlation with the envelope".into()));
    }
    let pick = (1..corr.len().saturating_sub(1))
        .find(|&s| corr[s] >= corr[s - 1] && corr[s] >= corr[s + 1] && corr[s] >= 0.8 * best)
        .unwrap_or_else(|| {
            corr.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0)
        });
    let refine = if pick > 0 && pick + 1 < corr.len() {
        parabolic_offset(corr[pick - 1], corr[pick], corr[pick + 1])
    } else {
        0.0
    };
    Ok((pick as f64 + refine) * dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Extremum {
    time: f64,
    value: f64,
    is_max: bool,
}

/// Local extrema of a sampled signal with parabolic time refinement.
fn extrema(times: &[f64], values: &[f64]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        let is_max = b > a && b >= c;
        let is_min = b < a && b <= c;
        if is_max || is_min {
            let h = times[i + 1] - times[i];
            out.push(Extremum {
                time: times[i] + parabolic_offset(a, b, c) * h,
                value: b,
                is_max,
            });
        }
    }
    out
}

/// Keeps alternating extrema whose swing from the previous kept one is a
/// sizeable fraction of the largest swing.
fn significant_alternating(ext: &[Extremum], prominence: f64) -> Vec<Extremum> {
    let span = ext.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max)
        - ext.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
    let threshold = prominence * span;
    let mut kept: Vec<Extremum> = Vec::new();
    for &e in ext {
        match kept.last_mut() {
            None => kept.push(e),
            Some(last) if last.is_max == e.is_max => {
                let better = if e.is_max { e.value > last.value } else { e.value < last.value };
                if better {
                    *last = e;
                }
            }
            Some(last) => {
                if (e.value - last.value).abs() >= threshold {
                    kept.push(e);
                }
            }
        }
    }
    kept
}

/// Oscillation period of a series from the spacing of its alternating
/// extrema. `skip` drops an initial stretch (for example a turn-on
/// transient) before searching.
pub fn estimate_period_of(times: &[f64], values: &[f64], skip: f64, prominence: f64) -> Result<f64> {
    let start = times.iter().position(|&t| t >= times[0] + skip).unwrap_or(times.len());
    let ext = extrema(&times[start..], &values[start..]);
    let kept = significant_alternating(&ext, prominence);
    // first and last extrema can be clipped by the window edges
    let inner: &[Extremum] = if kept.len() > 6 { &kept[1..kept.len() - 1] } else { &kept };
    if inner.len() < 5 {
        return Err(Error::Signal(format!(
            "found {} alternating extrema, need two full periods",
            inner.len()
        )));
    }
    let m = inner.len() - 1;
    Ok(2.0 * (inner[m].time - inner[0].time) / m as f64)
}

/// Oscillation period of the rate deviation from the baseline.
pub fn estimate_period(
    rate: &RateSeries,
    baseline: Option<&RateSeries>,
    skip: f64,
    options: &DecodeOptions,
) -> Result<f64> {
    let values = match baseline {
        Some(b) => rate.deviation_from(b)?,
        None => rate.rate.clone(),
    };
    estimate_period_of(&rate.times, &values, skip, options.prominence)
}

/// Time between the two dominant peaks of `|values|`.
///
/// Peaks below `fraction` of the largest are ignored and peaks within five
/// samples are merged. A third feature comparable to the second makes the
/// series ambiguous.
pub fn measure_interval_of(times: &[f64], values: &[f64], fraction: f64) -> Result<f64> {
    let mag: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let top = mag.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Signal("flat series has no features".into()));
    }
    let peaks: Vec<Extremum> = extrema(times, &mag)
        .into_iter()
        .filter(|e| e.is_max && e.value >= fraction * top)
        .collect();
    // merge peaks closer than a few samples (split tops)
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let mut merged: Vec<Extremum> = Vec::new();
    for p in peaks {
        match merged.last_mut() {
            Some(last) if p.time - last.time < 5.0 * h => {
                if p.value > last.value {
                    *last = p;
                }
            }
            _ => merged.push(p),
        }
    }
    if merged.len() < 2 {
        return Err(Error::Signal(format!(
            "expected two dominant features, found {}",
            merged.len()
        )));
    }
    merged.sort_by(|a, b| b.value.total_cmp(&a.value));
    if merged.len() > 2 && merged[2].value > 0.5 * merged[1].value {
        return Err(Error::Signal(format!(
            "{} comparable features, expected two",
            merged.len()
        )));
    }
    let (a, b) = (merged[0].time, merged[1].time);
    Ok((b - a).abs())
}

/// Interval between the two dominant extrema of `mu - baseline`.
pub fn measure_interval(rate: &RateSeries, baseline: &RateSeries, options: &DecodeOptions) -> Result<f64> {
    let dev = rate.deviation_from(baseline)?;
    measure_interval_of(&rate.times, &dev, options.feature_fraction)
}

/// RMS of a normalised spectrum about its centred moving average, over
/// levels with energy inside `band`.
pub fn oscillation_amplitude(
    spectrum: &SpectrumSnapshot,
    species: Species,
    band: (f64, f64),
    trend_points: usize,
) -> Result<f64> {
    let t = spectrum.time;
    let levels = match species {
        Species::Electron => &spectrum.electrons,
        Species::Positron => &spectrum.positrons,
    };
    let points: Vec<f64> = levels
        .iter()
        .filter(|p| p.energy > band.0 && p.energy < band.1)
        .map(|p| if t > 0.0 { p.normalized(t) } else { p.density })
        .collect();
    if points.is_empty() {
        return Err(Error::Signal("energy band holds no spectrum points".into()));
    }
    let half = trend_points / 2;
    let n = points.len();
    let sum_sq: f64 = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let trend = points[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            (points[i] - trend).powi(2)
        })
        .sum();
    Ok((sum_sq / n as f64).sqrt())
}

/// Local maxima of a normalised spectrum inside `band` whose prominence
/// (height above the higher of the two flanking minima) is at least
/// `min_prominence` times their height.
pub fn spectrum_peaks(
    spectrum: &SpectrumSnapshot,
    species: Species,
    band: (f64, f64),
    min_prominence: f64,
) -> Vec<SpectrumPoint> {
    let t = spectrum.time;
    let levels = match species {
        Species::Electron => &spectrum.electrons,
        Species::Positron => &spectrum.positrons,
    };
    let y: Vec<f64> = levels.iter().map(|p| if t > 0.0 { p.normalized(t) } else { p.density }).collect();
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        let e = levels[i].energy;
        if !(e > band.0 && e < band.1) || !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        let mut j = i;
        while j > 0 && y[j - 1] <= y[j] {
            j -= 1;
        }
        let mut k = i;
        while k + 1 < y.len() && y[k + 1] <= y[k] {
            k += 1;
        }
        if y[i] - y[j].max(y[k]) >= min_prominence * y[i] {
            out.push(levels[i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::C2;
    use crate::observables::rate::RateSeries;
    use crate::observables::spectrum::{SpectrumPoint, SpectrumSnapshot};

    fn series(times: &[f64], rate: Vec<f64>) -> RateSeries {
        RateSeries {
            energy: 1.25 * C2,
            level_energy: 1.25 * C2,
            smoothing: 0.0,
            times: times.to_vec(),
            level: vec![0.0; times.len()],
            rate,
        }
    }

    fn grid_times(n: usize, t_max: f64) -> Vec<f64> {
        (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    #[test]
    fn pure_sinusoid_period_recovered() {
        let omega = 0.1 * C2;
        let times = grid_times(1500, 0.03);
        let v: Vec<f64> = times.iter().map(|t| (omega * t).sin()).collect();
        let p = estimate_period_of(&times, &v, 0.0, 0.3).unwrap();
        let exact = 2.0 * std::f64::consts::PI / omega;
        assert!((p - exact).abs() < 1e-3 * exact, "{p} vs {exact}");
    }

    #[test]
    fn short_series_has_no_period() {
        let times = grid_times(200, 0.003);
        let v: Vec<f64> = times.iter().map(|t| (0.1 * C2 * t).sin()).collect();
        assert!(estimate_period_of(&times, &v, 0.0, 0.3).is_err());
    }

    #[test]
    fn two_spikes_interval_recovered() {
        let times = grid_times(1500, 0.03);
        let spike = |t: f64, c: f64| (-(t - c).powi(2) / (2.0 * 0.0008f64.powi(2))).exp();
        let v: Vec<f64> = times.iter().map(|&t| spike(t, 0.011) - 0.9 * spike(t, 0.0237)).collect();
        let dt = measure_interval_of(&times, &v, 0.3).unwrap();
        assert!((dt - 0.0127).abs() < 1e-6, "{dt}");
        let one: Vec<f64> = times.iter().map(|&t| spike(t, 0.011)).collect();
        assert!(measure_interval_of(&times, &one, 0.3).is_err());
    }

    #[test]
    fn delayed_pulses_give_lag() {
        let times = grid_times(1500, 0.03);
        let env = Envelope::identical_pulses(0.001);
        let tau = 0.0024;
        let base = series(&times, times.iter().map(|_| 400.0).collect());
        let rate = series(
            &times,
            times.iter().map(|&t| 400.0 - 30.0 * env.value(t - tau)).collect(),
        );
        let got = measure_response_time(&rate, &base, &env, &DecodeOptions::default()).unwrap();
        assert!((got - tau).abs() < 2e-5, "{got}");
    }

    #[test]
    fn delayed_sine_gives_lag_inside_first_period() {
        let times = grid_times(1500, 0.03);
        let env = Envelope::negative_sine(0.1 * C2);
        let tau = 0.0024;
        let base = series(&times, vec![0.0; times.len()]);
        let rate = series(&times, times.iter().map(|&t| -env.value(t - tau)).collect());
        let got = measure_response_time(&rate, &base, &env, &DecodeOptions::default()).unwrap();
        assert!((got - tau).abs() < 2e-5, "{got}");
    }

    #[test]
    fn static_envelope_is_featureless() {
        let times = grid_times(100, 0.03);
        let s = series(&times, vec![1.0; times.len()]);
        let err = measure_response_time(&s, &s, &Envelope::Constant { value: 1.0 }, &DecodeOptions::default());
        assert!(err.is_err());
    }

    fn snapshot(values: &[f64]) -> SpectrumSnapshot {
        SpectrumSnapshot {
            time: 0.0,
            electron_occupation: Vec::new(),
            positron_occupation: Vec::new(),
            electrons: values
                .iter()
                .enumerate()
                .map(|(i, &v)| SpectrumPoint {
                    energy: C2 * (1.0 + 0.01 * i as f64),
                    momentum: i as f64,
                    delta_e: 1.0,
                    occupation: v,
                    density: v,
                })
                .collect(),
            positrons: Vec::new(),
        }
    }

    #[test]
    fn flat_spectrum_has_no_oscillation() {
        let s = snapshot(&[0.7; 60]);
        let a = oscillation_amplitude(&s, Species::Electron, (C2, 1.6 * C2), 9).unwrap();
        assert!(a < 1e-14);
        let w: Vec<f64> = (0..60).map(|i| 0.7 + 0.1 * (i as f64).sin()).collect();
        assert!(oscillation_amplitude(&snapshot(&w), Species::Electron, (C2, 1.6 * C2), 9).unwrap() > 0.03);
        assert!(oscillation_amplitude(&s, Species::Electron, (3.0 * C2, 4.0 * C2), 9).is_err());
    }

    #[test]
    fn peaks_respect_prominence() {
        // tall peak at 10, shallow ripple at 30, peak at 45
        let w: Vec<f64> = (0..60)
            .map(|i| {
                let x = i as f64;
                1.0 + (-(x - 10.0).powi(2) / 8.0).exp() + 0.05 * (-(x - 30.0).powi(2) / 2.0).exp()
                    + 0.8 * (-(x - 45.0).powi(2) / 8.0).exp()
            })
            .collect();
        let s = snapshot(&w);
        let all = spectrum_peaks(&s, Species::Electron, (0.0, 10.0 * C2), 0.01);
        assert_eq!(all.len(), 3);
        let strong = spectrum_peaks(&s, Species::Electron, (0.0, 10.0 * C2), 0.2);
        let at: Vec<f64> = strong.iter().map(|p| p.momentum).collect();
        assert_eq!(at, [10.0, 45.0]);
        assert!(spectrum_peaks(&s, Species::Positron, (0.0, 10.0 * C2), 0.2).is_empty());
    }
}
