//! Box-normalised free Dirac spinors of the 2x2 Hamiltonian `c s1 p + c^2 s3`.

use num_complex::Complex64;

use crate::constants::{C, C2};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Relativistic free energy `sqrt(c^4 + c^2 p^2)`.
pub fn free_energy(p: f64) -> f64 {
    (C2 * C2 + C2 * p * p).sqrt()
}

/// Group velocity `dE/dp = c^2 p / E`.
pub fn group_velocity(p: f64) -> f64 {
    C2 * p / free_energy(p)
}

/// Momentum magnitude of a free particle with energy `e >= c^2`.
pub fn momentum_of_energy(e: f64) -> f64 {
    ((e * e - C2 * C2).max(0.0)).sqrt() / C
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Positive,
    Negative,
}

/// Spinor amplitudes of a free mode with unit norm (no box factor).
///
/// Positive branch: upper component real and positive.
/// Negative branch: lower component real and positive.
pub fn unit_spinor(p: f64, branch: Branch) -> [f64; 2] {
    let e = free_energy(p);
    let norm = (2.0 * e * (e + C2)).sqrt();
    match branch {
        Branch::Positive => [(e + C2) / norm, C * p / norm],
        Branch::Negative => [-C * p / norm, (e + C2) / norm],
    }
}

/// A plane-wave solution `spinor * exp(i p x)` of the free Dirac equation.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeMode {
    pub momentum: f64,
    /// FFT index of `momentum` on the owning grid.
    pub index: usize,
    pub branch: Branch,
    pub energy: f64,
    /// Amplitudes including the `1/sqrt(L)` box factor.
    pub spinor: [Complex64; 2],
}

impl FreeMode {
    /// Signed eigenvalue of the free Hamiltonian.
    pub fn eigenvalue(&self) -> f64 {
        match self.branch {
            Branch::Positive => self.energy,
            Branch::Negative => -self.energy,
        }
    }

    /// Value of the mode at position `x`.
    pub fn at(&self, x: f64) -> [Complex64; 2] {
        let phase = Complex64::from_polar(1.0, self.momentum * x);
        [self.spinor[0] * phase, self.spinor[1] * phase]
    }
}

pub fn make_free_mode(grid: &SpatialGrid, p: f64, branch: Branch) -> Result<FreeMode> {
    let index = grid.index_of_momentum(p)?;
    Ok(mode_at_index(grid, index, branch))
}

pub(crate) fn mode_at_index(grid: &SpatialGrid, index: usize, branch: Branch) -> FreeMode {
    let p = grid.momentum(index);
    let scale = grid.length().sqrt().recip();
    let s = unit_spinor(p, branch);
    FreeMode {
        momentum: p,
        index,
        branch,
        energy: free_energy(p),
        spinor: [Complex64::new(s[0] * scale, 0.0), Complex64::new(s[1] * scale, 0.0)],
    }
}

/// All positive modes on the lattice plus the windowed set of negative modes
/// that get evolved.
#[derive(Debug, Clone)]
pub struct FreeBasis {
    grid: SpatialGrid,
    window: Option<f64>,
    /// Unit spinors of the positive branch, FFT order.
    positive: Vec<[f64; 2]>,
    /// Unit spinors of the negative branch, FFT order.
    negative: Vec<[f64; 2]>,
    /// FFT indices of evolved negative modes, ascending in signed momentum.
    evolved: Vec<usize>,
}

impl FreeBasis {
    /// A window at or beyond the lattice cutoff keeps every negative mode.
    pub fn new(grid: &SpatialGrid, window: Option<f64>) -> Result<Self> {
        if let Some(w) = window {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Window {
                    window: w,
                    cutoff: grid.p_max(),
                });
            }
        }
        let n = grid.len();
        let momenta = grid.momenta();
        let positive = momenta.iter().map(|&p| unit_spinor(p, Branch::Positive)).collect();
        let negative = momenta.iter().map(|&p| unit_spinor(p, Branch::Negative)).collect();
        let tol = 1e-9 * grid.dp();
        let mut labels: Vec<i64> = (0..n)
            .filter(|&k| window.map_or(true, |w| momenta[k].abs() <= w + tol))
            .map(|k| grid.momentum_label(k))
            .collect();
        labels.sort_unstable();
        let evolved = labels
            .into_iter()
            .map(|l| grid.index_of_label(l).expect("label from grid"))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            window,
            positive,
            negative,
            evolved,
        })
    }

    /// Restricts evolution to the given negative modes, kept in ascending
    /// signed momentum.
    pub fn restricted_to(mut self, indices: &[usize]) -> Result<Self> {
        let n = self.grid.len();
        if let Some(&k) = indices.iter().find(|&&k| k >= n) {
            return Err(Error::OffLattice(k as f64));
        }
        let mut labels: Vec<i64> = indices.iter().map(|&k| self.grid.momentum_label(k)).collect();
        labels.sort_unstable();
        labels.dedup();
        self.evolved = labels
            .into_iter()
            .map(|l| self.grid.index_of_label(l).expect("label from grid"))
            .collect();
        Ok(self)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn window(&self) -> Option<f64> {
        self.window
    }

    pub fn positive_spinor(&self, k: usize) -> [f64; 2] {
        self.positive[k]
    }

    pub fn negative_spinor(&self, k: usize) -> [f64; 2] {
        self.negative[k]
    }

    pub fn positive_mode(&self, k: usize) -> FreeMode {
        mode_at_index(&self.grid, k, Branch::Positive)
    }

    pub fn negative_mode(&self, k: usize) -> FreeMode {
        mode_at_index(&self.grid, k, Branch::Negative)
    }

    /// FFT indices of the evolved negative modes in fixed reduction order.
    pub fn evolved(&self) -> &[usize] {
        &self.evolved
    }

    pub fn evolved_count(&self) -> usize {
        self.evolved.len()
    }

    /// Every positive mode followed by every negative mode, for
    /// completeness checks.
    pub fn all_modes(&self) -> impl Iterator<Item = FreeMode> + '_ {
        let n = self.grid.len();
        (0..n)
            .map(|k| self.positive_mode(k))
            .chain((0..n).map(|k| self.negative_mode(k)))
    }
}

pub fn build_basis(grid: &SpatialGrid, window: Option<f64>) -> Result<FreeBasis> {
    FreeBasis::new(grid, window)
}
