use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::basis::FreeBasis;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::propagator::SpinorField;

/// Overlaps of one evolved negative mode with every free mode at time `t`.
///
/// `electron[k] = U_{p n}` with `p` the FFT-ordered lattice momentum `k`;
/// `sea[k] = U_{n' n}` likewise for the negative branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionRecord {
    pub time: f64,
    pub step: usize,
    /// FFT index of the evolved negative mode.
    pub mode: usize,
    pub momentum: f64,
    pub electron: Vec<Complex64>,
    pub sea: Vec<Complex64>,
}

impl ProjectionRecord {
    /// `sum_p |U_pn|^2`.
    pub fn electron_weight(&self) -> f64 {
        self.electron.iter().map(|u| u.norm_sqr()).sum()
    }

    /// `sum_n' |U_n'n|^2`.
    pub fn sea_weight(&self) -> f64 {
        self.sea.iter().map(|u| u.norm_sqr()).sum()
    }

    /// Should equal one for a unitary evolution.
    pub fn completeness(&self) -> f64 {
        self.electron_weight() + self.sea_weight()
    }

    /// `U_nn`, the overlap with the initial mode.
    pub fn self_overlap(&self) -> Complex64 {
        self.sea[self.mode]
    }
}

/// Momentum-space projector onto the free basis: one FFT per component,
/// then a 2-vector dot product per lattice momentum.
pub struct Projector {
    grid: SpatialGrid,
    fft: Arc<dyn Fft<f64>>,
    /// `dx (-1)^k` times the unit spinors, positive then negative branch.
    weights: Vec<([f64; 2], [f64; 2], f64)>,
}

/// Buffers for [`Projector::project_with`].
pub struct ProjectionScratch {
    upper: Vec<Complex64>,
    lower: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl Projector {
    pub fn new(basis: &FreeBasis) -> Self {
        let grid = basis.grid().clone();
        let fft = FftPlanner::new().plan_fft_forward(grid.len());
        // u_p(x_j) = s_p e^{i p x_j} / sqrt(L) and e^{-i p x_j} = (-1)^k e^{-2 pi i jk/N}
        let scale = grid.dx() / grid.length().sqrt();
        let weights = (0..grid.len())
            .map(|k| {
                let sign = if k % 2 == 0 { scale } else { -scale };
                (basis.positive_spinor(k), basis.negative_spinor(k), sign)
            })
            .collect();
        Self { grid, fft, weights }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn scratch(&self) -> ProjectionScratch {
        let n = self.grid.len();
        ProjectionScratch {
            upper: vec![Complex64::default(); n],
            lower: vec![Complex64::default(); n],
            fft: vec![Complex64::default(); self.fft.get_inplace_scratch_len()],
        }
    }

    pub fn project_with(
        &self,
        field: &SpinorField,
        mode: usize,
        step: usize,
        time: f64,
        scratch: &mut ProjectionScratch,
    ) -> Result<ProjectionRecord> {
        if !field.grid().matches(&self.grid) {
            return Err(Error::GridMismatch("field and basis grids differ"));
        }
        scratch.upper.copy_from_slice(&field.upper);
        scratch.lower.copy_from_slice(&field.lower);
        self.fft.process_with_scratch(&mut scratch.upper, &mut scratch.fft);
        self.fft.process_with_scratch(&mut scratch.lower, &mut scratch.fft);
        let n = self.grid.len();
        let mut electron = Vec::with_capacity(n);
        let mut sea = Vec::with_capacity(n);
        for ((u, l), (pos, neg, w)) in scratch.upper.iter().zip(&scratch.lower).zip(&self.weights) {
            // spinors are real, so the conjugate is the spinor itself
            electron.push((u * pos[0] + l * pos[1]) * *w);
            sea.push((u * neg[0] + l * neg[1]) * *w);
        }
        Ok(ProjectionRecord {
            time,
            step,
            mode,
            momentum: self.grid.momentum(mode),
            electron,
            sea,
        })
    }
}

/// Projects an evolved negative mode (FFT index `mode`) onto the free basis.
pub fn project(field: &SpinorField, basis: &FreeBasis, mode: usize, time: f64) -> Result<ProjectionRecord> {
    let p = Projector::new(basis);
    let mut s = p.scratch();
    p.project_with(field, mode, 0, time, &mut s)
}
