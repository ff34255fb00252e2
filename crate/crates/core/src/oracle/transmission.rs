use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{C, C2};
use crate::error::{param, Error, Result};

/// Derived quantities of the sharp double step at one energy.
///
/// The energy `energy` is measured in the frame where the particle comes
/// from the zero-potential side and the first step has height `v1`, so the
/// Klein range is `c^2 < E < V1 - c^2`. Created electrons of energy `E_e`
/// in the field `0 | V2 | V1 + V2` correspond to `E = V1 + V2 - E_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionParams {
    pub energy: f64,
    pub v1: f64,
    pub v2: f64,
    /// Momentum on the zero-potential side.
    pub p: f64,
    /// Momentum beyond both steps.
    pub q: f64,
    /// Momentum between the steps.
    pub k: f64,
    /// `V1 + V2 - E`.
    pub e_q: f64,
    pub gamma: f64,
    pub tau: f64,
}

/// Populates [`TransmissionParams`], rejecting energies where any region is
/// evanescent or the Klein condition fails.
pub fn transmission_params(energy: f64, v1: f64, v2: f64) -> Result<TransmissionParams> {
    let e_q = v1 + v2 - energy;
    let lo = C2;
    let hi = (v1 - C2).min(v1 + v2 - C2);
    if !(energy > lo && energy < hi) {
        return Err(Error::EnergyRange { energy, lo, hi });
    }
    let c4 = C2 * C2;
    let p = (energy * energy - c4).sqrt() / C;
    let q = (e_q * e_q - c4).sqrt() / C;
    let k = ((energy - v1).powi(2) - c4).sqrt() / C;
    // both radicands are positive products of same-sign factors here
    let gamma = ((energy - C2) / (energy + C2) * (energy - v1 + C2) / (energy - v1 - C2)).sqrt();
    let tau = ((energy - v1 - C2) / (energy - v1 + C2) * (e_q - C2) / (e_q + C2)).sqrt();
    Ok(TransmissionParams {
        energy,
        v1,
        v2,
        p,
        q,
        k,
        e_q,
        gamma,
        tau,
    })
}

impl TransmissionParams {
    /// Closed-form transmission for step separation `d`.
    pub fn transmission(&self, d: f64) -> f64 {
        let gt = self.gamma * self.tau;
        let s = (self.k * d).sin();
        4.0 * gt / ((gt + 1.0).powi(2) - (self.gamma.powi(2) - 1.0) * (self.tau.powi(2) - 1.0) * s * s)
    }
}

/// Closed-form double-step transmission `T_E`.
pub fn transmission_coefficient(energy: f64, v1: f64, v2: f64, d: f64) -> Result<f64> {
    Ok(transmission_params(energy, v1, v2)?.transmission(d))
}

/// Transmission seen by electrons of energy `e_electron` created in the
/// field `0 | V2 | V1 + V2` (control step a distance `d` before the main step).
pub fn electron_transmission(e_electron: f64, v1: f64, v2: f64, d: f64) -> Result<f64> {
    transmission_coefficient(v1 + v2 - e_electron, v1, v2, d)
}

/// Electron energies covered by [`electron_transmission`].
pub fn electron_klein_window(v1: f64, v2: f64) -> (f64, f64) {
    let hi = (v1 - C2).min(v1 + v2 - C2);
    (v1 + v2 - hi, v1 + v2 - C2)
}

/// Wavenumber with rightward group velocity `c^2 k / (E - V)`, or `i kappa`
/// for a decaying wave.
fn wavenumber(energy: f64, height: f64) -> Complex64 {
    let e = energy - height;
    let disc = e * e - C2 * C2;
    if disc >= 0.0 {
        let k = disc.sqrt() / C;
        Complex64::new(if e < 0.0 { -k } else { k }, 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt() / C)
    }
}

/// Lower-to-upper spinor ratio of a plane wave `e^{ikx}`.
fn admittance(energy: f64, height: f64, k: Complex64) -> Complex64 {
    C * k / (energy - height + C2)
}

/// Transmission through a piecewise-constant potential by composing the
/// spinor matching conditions at each interface.
///
/// `regions` lists `(height, width)` from left to right; the widths of the
/// first and last (semi-infinite) regions are ignored. Transmission is the
/// ratio of transmitted to incident Dirac current `c psi^dagger sigma_1 psi`.
pub fn transfer_matrix_transmission(energy: f64, regions: &[(f64, f64)]) -> Result<f64> {
    let n = regions.len();
    if n < 2 {
        return Err(param("regions", "need at least two regions"));
    }
    if regions[1..n - 1].iter().any(|r| !(r.1 >= 0.0)) {
        return Err(param("regions", "widths must be non-negative"));
    }
    let ks: Vec<Complex64> = regions.iter().map(|r| wavenumber(energy, r.0)).collect();
    let ys: Vec<Complex64> = regions
        .iter()
        .zip(&ks)
        .map(|(r, &k)| admittance(energy, r.0, k))
        .collect();
    for (j, y) in ys.iter().enumerate() {
        if !y.is_finite() || y.norm() < 1e-300 {
            return Err(Error::SingularMatching(j));
        }
    }
    if ks[0].im != 0.0 || ks[n - 1].im != 0.0 {
        return Ok(0.0);
    }
    // amplitudes are referenced to the left edge of each region, the
    // outgoing region carries a unit right-moving wave only
    let mut fwd = Complex64::new(1.0, 0.0);
    let mut back = Complex64::new(0.0, 0.0);
    for j in (1..n).rev() {
        let upper = fwd + back;
        let lower = ys[j] * (fwd - back);
        let ratio = lower / ys[j - 1];
        let f_edge = 0.5 * (upper + ratio);
        let b_edge = 0.5 * (upper - ratio);
        let phase = if j >= 2 {
            (Complex64::i() * ks[j - 1] * regions[j - 1].1).exp()
        } else {
            Complex64::new(1.0, 0.0)
        };
        fwd = f_edge / phase;
        back = b_edge * phase;
    }
    let incident = ys[0].re * fwd.norm_sqr();
    if !(incident > 0.0) {
        return Err(Error::SingularMatching(0));
    }
    Ok(ys[n - 1].re / incident)
}

/// Reflection for the same configuration, from the reflected current.
pub fn transfer_matrix_reflection(energy: f64, regions: &[(f64, f64)]) -> Result<f64> {
    let n = regions.len();
    let t = transfer_matrix_transmission(energy, regions)?;
    if n < 2 {
        return Ok(1.0 - t);
    }
    // recompute the incident-side amplitudes
    let ks: Vec<Complex64> = regions.iter().map(|r| wavenumber(energy, r.0)).collect();
    let ys: Vec<Complex64> = regions
        .iter()
        .zip(&ks)
        .map(|(r, &k)| admittance(energy, r.0, k))
        .collect();
    let mut fwd = Complex64::new(1.0, 0.0);
    let mut back = Complex64::new(0.0, 0.0);
    for j in (1..n).rev() {
        let upper = fwd + back;
        let ratio = ys[j] * (fwd - back) / ys[j - 1];
        let phase = if j >= 2 {
            (Complex64::i() * ks[j - 1] * regions[j - 1].1).exp()
        } else {
            Complex64::new(1.0, 0.0)
        };
        fwd = 0.5 * (upper + ratio) / phase;
        back = 0.5 * (upper - ratio) * phase;
    }
    Ok(back.norm_sqr() / fwd.norm_sqr())
}

/// The three regions of the double step in the frame of [`TransmissionParams`].
pub fn double_step_regions(v1: f64, v2: f64, d: f64) -> [(f64, f64); 3] {
    [(0.0, 0.0), (v1, d), (v1 + v2, 0.0)]
}

/// The three regions seen by created electrons.
pub fn electron_regions(v1: f64, v2: f64, d: f64) -> [(f64, f64); 3] {
    [(0.0, 0.0), (v2, d), (v1 + v2, 0.0)]
}

/// One row of the closed form versus transfer-matrix table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionRow {
    pub energy: f64,
    pub closed_form: f64,
    pub transfer_matrix: f64,
    pub abs_diff: f64,
}

/// Tabulates both transmissions at `samples` interior points of the
/// Klein range.
pub fn tabulate_transmission(v1: f64, v2: f64, d: f64, samples: usize) -> Result<Vec<TransmissionRow>> {
    let hi = (v1 - C2).min(v1 + v2 - C2);
    if !(hi > C2) {
        return Err(param("v1", "Klein range is empty"));
    }
    let regions = double_step_regions(v1, v2, d);
    (1..=samples)
        .map(|i| {
            let energy = C2 + (hi - C2) * i as f64 / (samples + 1) as f64;
            let closed_form = transmission_coefficient(energy, v1, v2, d)?;
            let transfer_matrix = transfer_matrix_transmission(energy, &regions)?;
            Ok(TransmissionRow {
                energy,
                closed_form,
                transfer_matrix,
                abs_diff: (closed_form - transfer_matrix).abs(),
            })
        })
        .collect()
}

/// Writes rows as CSV with columns `E,T_E,T_transfer_matrix,abs_diff`.
pub fn write_transmission_csv<W: std::io::Write>(mut out: W, rows: &[TransmissionRow]) -> std::io::Result<()> {
    writeln!(out, "E,T_E,T_transfer_matrix,abs_diff")?;
    for r in rows {
        writeln!(out, "{:.17e},{:.17e},{:.17e},{:.3e}", r.energy, r.closed_form, r.transfer_matrix, r.abs_diff)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const V1: f64 = 2.5 * C2;
    const V2: f64 = 0.25 * C2;

    #[test]
    fn zero_control_makes_middle_momentum_match_far_side() {
        // with V2 = 0 the middle and far regions are the same medium
        let t = transmission_params(1.5 * C2, V1, 0.0).unwrap();
        assert!((t.k - t.q).abs() < 1e-9 * t.q);
        assert!((t.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_energy_is_self_conjugate() {
        let e = 0.5 * (V1 + V2);
        let t = transmission_params(e, V1, V2).unwrap();
        assert!((t.e_q - e).abs() < 1e-9);
        assert!((t.p - t.q).abs() < 1e-9 * t.p);
    }

    #[test]
    fn resonance_reduces_to_single_factor() {
        let t = transmission_params(1.3 * C2, V1, V2).unwrap();
        let d = std::f64::consts::PI / t.k;
        let gt = t.gamma * t.tau;
        assert!((t.transmission(d) - 4.0 * gt / (gt + 1.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_energies_rejected() {
        assert!(transmission_params(0.9 * C2, V1, V2).is_err());
        assert!(transmission_params(1.6 * C2, V1, V2).is_err());
        assert!(transmission_coefficient(C2, V1, V2, 0.2).is_err());
    }

    #[test]
    fn single_step_matches_textbook_klein_result() {
        // kappa-form of the sharp Klein step
        for e in [1.1, 1.3, 1.45] {
            let e = e * C2;
            let p = (e * e - C2 * C2).sqrt() / C;
            let q = ((V1 - e).powi(2) - C2 * C2).sqrt() / C;
            let r = q / p * (e + C2) / (V1 - e - C2);
            let expected = 4.0 * r / (1.0 + r).powi(2);
            let t = transfer_matrix_transmission(e, &[(0.0, 0.0), (V1, 0.0)]).unwrap();
            assert!((t - expected).abs() < 1e-12, "{t} {expected}");
        }
    }

    #[test]
    fn zero_width_middle_equals_combined_step() {
        for e in [1.05, 1.2, 1.4] {
            let e = e * C2;
            let a = transfer_matrix_transmission(e, &[(0.0, 0.0), (V1, 0.0), (V1 + V2, 0.0)]).unwrap();
            let b = transfer_matrix_transmission(e, &[(0.0, 0.0), (V1 + V2, 0.0)]).unwrap();
            assert!((a - b).abs() < 1e-12);
            let c = transmission_coefficient(e, V1, V2, 0.0).unwrap();
            assert!((c - b).abs() < 1e-12);
        }
    }

    #[test]
    fn current_is_conserved() {
        for e in [1.05, 1.3, 1.6, 2.0] {
            let e = e * C2;
            let regions = [(0.0, 0.0), (V1, 0.2), (V1 + V2, 0.0)];
            let t = transfer_matrix_transmission(e, &regions).unwrap();
            let r = transfer_matrix_reflection(e, &regions).unwrap();
            assert!((t + r - 1.0).abs() < 1e-12, "{e} {t} {r}");
        }
    }

    #[test]
    fn electron_frame_matches_conjugate_frame() {
        let (lo, hi) = electron_klein_window(V1, V2);
        for i in 1..20 {
            let e = lo + (hi - lo) * i as f64 / 20.0;
            let a = electron_transmission(e, V1, V2, 0.2).unwrap();
            let b = transfer_matrix_transmission(e, &electron_regions(V1, V2, 0.2)).unwrap();
            assert!((a - b).abs() < 1e-10, "{e} {a} {b}");
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = tabulate_transmission(V1, V2, 0.2, 5).unwrap();
        let mut buf = Vec::new();
        write_transmission_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("E,T_E"));
    }
}
