use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{free_energy, group_velocity, momentum_of_energy};
use crate::constants::C2;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// How the electron energy `E*` is mapped onto lattice modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySelection {
    /// The single level nearest `E*` (both `+-p`).
    #[default]
    Nearest,
    /// The nearest level and its two neighbours, averaged.
    Bin3,
}

/// Which created particle a rate counts.
///
/// Electrons leave the step on its low-potential side and cross the control
/// field on the way out. Positrons leave on the far side and only learn of
/// the control field through the creation zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    #[default]
    Electron,
    Positron,
}

/// Lattice modes tracked for a rate measurement at `E*`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTarget {
    pub species: Species,
    pub energy: f64,
    /// Energy of the central selected level.
    pub level_energy: f64,
    /// FFT indices of tracked modes: positive modes `p` for electrons,
    /// evolved sea modes `n` for positrons.
    pub indices: Vec<usize>,
    /// Factor turning the summed occupation of `indices` into `N(E*, t)`.
    pub density_factor: f64,
}

impl RateTarget {
    pub fn new(grid: &SpatialGrid, energy: f64, selection: EnergySelection) -> Result<Self> {
        Self::for_species(grid, energy, selection, Species::Electron)
    }

    pub fn for_species(grid: &SpatialGrid, energy: f64, selection: EnergySelection, species: Species) -> Result<Self> {
        let e_max = free_energy(grid.p_max() - grid.dp());
        if !(energy > C2 && energy < e_max) {
            return Err(Error::EnergyRange {
                energy,
                lo: C2,
                hi: e_max,
            });
        }
        let label = (momentum_of_energy(energy) / grid.dp()).round().max(1.0) as i64;
        let labels: Vec<i64> = match selection {
            EnergySelection::Nearest => vec![label],
            EnergySelection::Bin3 => vec![label - 1, label, label + 1]
                .into_iter()
                .filter(|&l| l >= 1)
                .collect(),
        };
        let mut indices = Vec::new();
        let mut factor = 0.0;
        for &l in &labels {
            let p = l as f64 * grid.dp();
            factor += grid.length() / (2.0 * PI * group_velocity(p));
            for s in [l, -l] {
                indices.push(grid.index_of_label(s).ok_or(Error::EnergyRange {
                    energy,
                    lo: C2,
                    hi: e_max,
                })?);
            }
        }
        // every level contributes the same mean weight
        let factor = factor / (labels.len() * labels.len()) as f64;
        Ok(Self {
            species,
            energy,
            level_energy: free_energy(label as f64 * grid.dp()),
            indices,
            density_factor: factor,
        })
    }
}

/// `N(E*, t)` and the smoothed rate `mu(t) = dN(E*, t)/dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub energy: f64,
    pub level_energy: f64,
    /// Gaussian smoothing width in units of time.
    pub smoothing: f64,
    pub times: Vec<f64>,
    pub level: Vec<f64>,
    pub rate: Vec<f64>,
}

impl RateSeries {
    /// Builds the rate from a uniformly sampled level series.
    pub fn from_level(
        energy: f64,
        level_energy: f64,
        times: Vec<f64>,
        level: Vec<f64>,
        smoothing_samples: f64,
    ) -> Result<Self> {
        if times.len() != level.len() {
            return Err(Error::Signal("times and levels differ in length".into()));
        }
        if times.len() < 3 {
            return Err(Error::Signal("need at least three samples".into()));
        }
        let raw = centered_derivative(&times, &level);
        let rate = if smoothing_samples > 0.0 {
            gaussian_smooth(&raw, smoothing_samples)
        } else {
            raw
        };
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        Ok(Self {
            energy,
            level_energy,
            smoothing: smoothing_samples * dt,
            times,
            level,
            rate,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Trapezoid integral of `mu` over the whole series.
    pub fn integrated_rate(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.rate.windows(2))
            .map(|(t, r)| 0.5 * (t[1] - t[0]) * (r[0] + r[1]))
            .sum()
    }

    /// `mu(t) - mu_baseline(t)`, requiring identical sampling.
    pub fn deviation_from(&self, baseline: &RateSeries) -> Result<Vec<f64>> {
        if self.times.len() != baseline.times.len()
            || self
                .times
                .iter()
                .zip(&baseline.times)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1e-12))
        {
            return Err(Error::Signal("baseline sampled on different times".into()));
        }
        Ok(self.rate.iter().zip(&baseline.rate).map(|(a, b)| a - b).collect())
    }
}

/// Second-order centred differences, one-sided at the ends.
pub fn centered_derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (values[b] - values[a]) / (times[b] - times[a])
        })
        .collect()
}

/// Gaussian smoothing that spreads every sample with a kernel normalised
/// over the samples it reaches, so the sum of the series is preserved.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return values.to_vec();
    }
    let n = values.len();
    let reach = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|k| {
            let z = k as f64 / sigma;
            (-0.5 * z * z).exp()
        })
        .collect();
    let mut out = vec![0.0; n];
    for (j, &v) in values.iter().enumerate() {
        let lo = (j as isize - reach).max(0) as usize;
        let hi = ((j as isize + reach) as usize).min(n - 1);
        let offset = |i: usize| (i as isize - j as isize + reach) as usize;
        let z: f64 = (lo..=hi).map(|i| kernel[offset(i)]).sum();
        for (i, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *o += v * kernel[offset(i)] / z;
        }
    }
    out
}

/// Rate series at `E*` from per-output tracked occupations of
/// `target.indices`.
pub fn rate_series(
    target: &RateTarget,
    times: &[f64],
    tracked: &[Vec<f64>],
    smoothing_samples: f64,
) -> Result<RateSeries> {
    if times.len() != tracked.len() {
        return Err(Error::Signal("tracked series length mismatch".into()));
    }
    let level = tracked
        .iter()
        .map(|row| {
            if row.len() < target.indices.len() {
                return Err(Error::Signal("tracked row lacks selected modes".into()));
            }
            Ok(row[..target.indices.len()].iter().sum::<f64>() * target.density_factor)
        })
        .collect::<Result<Vec<f64>>>()?;
    RateSeries::from_level(
        target.energy,
        target.level_energy,
        times.to_vec(),
        level,
        smoothing_samples,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::C;
    use crate::grid::build_grid;

    #[test]
    fn selects_level_nearest_quarter_rest_energy() {
        let g = build_grid(6.0, 2048).unwrap();
        let t = RateTarget::new(&g, 1.25 * C2, EnergySelection::Nearest).unwrap();
        let p = 0.75 * C;
        let l = (p / g.dp()).round() as i64;
        assert_eq!(t.indices, vec![g.index_of_label(l).unwrap(), g.index_of_label(-l).unwrap()]);
        assert!((t.level_energy - 1.25 * C2).abs() <= 0.5 * group_velocity(p) * g.dp() + 1e-9);
        let b = RateTarget::new(&g, 1.25 * C2, EnergySelection::Bin3).unwrap();
        assert_eq!(b.indices.len(), 6);
        assert!(RateTarget::new(&g, 0.9 * C2, EnergySelection::Nearest).is_err());
        assert!(RateTarget::new(&g, 100.0 * C2, EnergySelection::Nearest).is_err());
    }

    #[test]
    fn derivative_of_quadratic_is_exact() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let vals: Vec<f64> = times.iter().map(|t| 3.0 * t * t - t).collect();
        let d = centered_derivative(&times, &vals);
        for i in 1..49 {
            assert!((d[i] - (6.0 * times[i] - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothing_preserves_sum_and_constants() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        let s = gaussian_smooth(&v, 5.0);
        let (a, b): (f64, f64) = (v.iter().sum(), s.iter().sum());
        assert!((a - b).abs() < 1e-9);
        let c = gaussian_smooth(&vec![2.5; 100], 5.0);
        // interior of a constant is untouched
        assert!(c[40..60].iter().all(|x| (x - 2.5).abs() < 1e-12));
    }

    #[test]
    fn integrated_rate_matches_level_change() {
        // trapezoid re-integration oracle on a ramp with a wiggle
        let times: Vec<f64> = (0..=600).map(|i| i as f64 * 5e-5).collect();
        let level: Vec<f64> = times
            .iter()
            .map(|t| 400.0 * t + 0.3 * (1900.0 * t).sin() + 0.05 * (1.0 - (-t / 0.001f64).exp()))
            .collect();
        let r = RateSeries::from_level(1.0, 1.0, times, level.clone(), 5.0).unwrap();
        let change = level[level.len() - 1] - level[0];
        assert!((r.integrated_rate() - change).abs() < 0.01 * change.abs());
    }
}
