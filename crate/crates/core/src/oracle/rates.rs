use std::f64::consts::PI;

use crate::constants::{C, C2};
use crate::error::{param, Error, Result};
use crate::oracle::transmission::{double_step_regions, transfer_matrix_transmission};

/// Transit time `d E / (c^2 p)` of a free electron of energy `energy`.
pub fn response_time(d: f64, energy: f64) -> Result<f64> {
    if !(energy > C2) {
        return Err(Error::EnergyRange {
            energy,
            lo: C2,
            hi: f64::INFINITY,
        });
    }
    let p = (energy * energy - C2 * C2).sqrt() / C;
    Ok(d * energy / (C2 * p))
}

/// Relative accuracy of the rate quadrature.
pub const RATE_TOLERANCE: f64 = 1e-8;

/// `(1/2 pi) * integral of t(E) over (lo, hi)`, splitting at `breaks` where
/// the integrand has kinks, by double-exponential quadrature.
pub fn rate_integral<F: Fn(f64) -> f64>(t: F, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
    if !(hi > lo) {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = std::iter::once(lo)
        .chain(breaks.iter().cloned().filter(|&b| b > lo && b < hi))
        .chain(std::iter::once(hi))
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let rough = quadrature::integrate(&t, w[0], w[1], 1e-3 * (w[1] - w[0]));
        let target = (RATE_TOLERANCE * 0.1 * rough.integral.abs()).max(1e-300);
        let fine = quadrature::integrate(&t, w[0], w[1], target);
        if !fine.integral.is_finite() {
            return Err(Error::Invariant("rate quadrature diverged".into()));
        }
        total += fine.integral;
    }
    Ok(total / (2.0 * PI))
}

/// Steady pair-creation rate of the sharp double step:
/// `(1/2 pi) * integral of T dE` over every energy at which both outer
/// regions carry propagating waves of opposite branches.
pub fn klein_rate(v1: f64, v2: f64, d: f64) -> Result<f64> {
    let lo = C2;
    let hi = v1 + v2 - C2;
    if !(hi > lo) || !(v1 > 0.0) {
        return Err(param("v1", "Klein range is empty"));
    }
    let regions = double_step_regions(v1, v2, d);
    let t = |e: f64| transfer_matrix_transmission(e, &regions).unwrap_or(0.0);
    rate_integral(t, lo, hi, &[v1 - C2, v1 + C2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_transit_time() {
        let t = response_time(0.2, 1.25 * C2).unwrap();
        assert!((t - 2.432e-3).abs() < 5e-7, "{t}");
        let t2 = response_time(0.4, 1.25 * C2).unwrap();
        assert!((t2 - 4.865e-3).abs() < 5e-7);
        let fast = response_time(0.2, 1e6 * C2).unwrap();
        assert!((fast - 0.2 / C).abs() < 1e-9);
        assert!(response_time(0.2, C2).is_err());
    }

    #[test]
    fn unit_transmission_gives_window_over_two_pi() {
        let g = rate_integral(|_| 1.0, C2, 1.5 * C2, &[]).unwrap();
        let exact = 0.5 * C2 / (2.0 * PI);
        assert!((g - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn narrow_window_gives_small_rate() {
        let wide = klein_rate(2.5 * C2, 0.0, 0.2).unwrap();
        let narrow = klein_rate(2.01 * C2, 0.0, 0.2).unwrap();
        assert!(narrow > 0.0 && narrow < 0.01 * wide);
    }
}
