use serde::{Deserialize, Serialize};

use crate::constants::{C, C2};
use crate::error::{param, Result};

/// Estimated bound levels of the well formed by an opposite-direction
/// control step of depth `depth` and width `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStateSet {
    pub depth: f64,
    pub width: f64,
    pub levels: Vec<f64>,
    /// Decay constant outside the well for each level.
    pub kappa: Vec<f64>,
    /// Largest dimensionless residual over the levels.
    pub max_residual: f64,
}

impl BoundStateSet {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// The matching condition `c k cot(kd) = -E V2/(c kappa) - c kappa`,
/// multiplied through by `c kappa sin(kd)` and scaled by `c^-4` so it has
/// no poles in the search interval.
pub fn bound_state_condition(energy: f64, depth: f64, d: f64) -> f64 {
    let v2 = -depth;
    let c4 = C2 * C2;
    let k = (((energy - v2).powi(2) - c4).max(0.0)).sqrt() / C;
    let kappa = ((c4 - energy * energy).max(0.0)).sqrt() / C;
    (C2 * k * kappa * (k * d).cos() + (energy * v2 + c4 - energy * energy) * (k * d).sin()) / c4
}

const SAMPLES_PER_LEVEL: usize = 64;

/// Brackets sign changes of [`bound_state_condition`] on `(c^2 - depth, c^2)`
/// and bisects each to full precision.
pub fn bound_state_levels(depth: f64, d: f64) -> Result<BoundStateSet> {
    if !(depth > 0.0 && depth < 2.0 * C2) {
        return Err(param("depth", "must lie in (0, 2c^2)"));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(param("d", "must be non-negative"));
    }
    let lo = C2 - depth;
    let hi = C2;
    // kd spans at most this many half periods
    let k_max = ((C2 + depth).powi(2) - C2 * C2).sqrt() / C;
    let half_periods = (k_max * d / std::f64::consts::PI).ceil() as usize + 1;
    let n = 4096.max(half_periods * SAMPLES_PER_LEVEL);
    let f = |e: f64| bound_state_condition(e, depth, d);
    let mut levels = Vec::new();
    let mut prev_e = lo + (hi - lo) / n as f64 * 1e-3;
    let mut prev_f = f(prev_e);
    for i in 1..n {
        let e = lo + (hi - lo) * i as f64 / n as f64;
        let fe = f(e);
        if prev_f == 0.0 {
            levels.push(prev_e);
        } else if prev_f.signum() != fe.signum() && fe != 0.0 {
            levels.push(bisect(&f, prev_e, e));
        }
        prev_e = e;
        prev_f = fe;
    }
    let mut max_residual: f64 = 0.0;
    let kappa = levels
        .iter()
        .map(|&e| {
            max_residual = max_residual.max(f(e).abs());
            (C2 * C2 - e * e).sqrt() / C
        })
        .collect();
    Ok(BoundStateSet {
        depth,
        width: d,
        levels,
        kappa,
        max_residual,
    })
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    if f(a).abs() < f(b).abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_well_has_about_seven_levels() {
        let s = bound_state_levels(0.25 * C2, 0.2).unwrap();
        assert!((5..=9).contains(&s.len()), "{:?}", s.levels);
        assert!(s.max_residual < 1e-10);
        for &e in &s.levels {
            assert!(e > 0.75 * C2 && e < C2);
        }
    }

    #[test]
    fn vanishing_well_has_no_levels() {
        assert!(bound_state_levels(0.25 * C2, 0.0).unwrap().is_empty());
    }

    #[test]
    fn invalid_depth_rejected() {
        assert!(bound_state_levels(0.0, 0.2).is_err());
        assert!(bound_state_levels(3.0 * C2, 0.2).is_err());
    }
}
