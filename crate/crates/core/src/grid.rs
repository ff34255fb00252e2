use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Periodic coordinate lattice `x_j = -L/2 + j dx` and its Fourier dual.
///
/// Momenta are stored in FFT order: index `k < N/2` maps to `2 pi k / L`,
/// the upper half to `2 pi (k - N) / L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    length: f64,
    points: usize,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::BoxLength(length));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::GridSize(points));
        }
        Ok(Self {
            length,
            points,
            dx: length / points as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Momentum lattice spacing `2 pi / L`.
    pub fn dp(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest representable momentum magnitude, `pi N / L`.
    pub fn p_max(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Signed integer momentum label of FFT index `k`, in `[-N/2, N/2)`.
    pub fn momentum_label(&self, k: usize) -> i64 {
        let n = self.points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    pub fn momentum(&self, k: usize) -> f64 {
        self.momentum_label(k) as f64 * self.dp()
    }

    /// Momenta in FFT order.
    pub fn momenta(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.momentum(k)).collect()
    }

    /// FFT index of a signed momentum label.
    pub fn index_of_label(&self, label: i64) -> Option<usize> {
        let n = self.points as i64;
        if label < -n / 2 || label >= n / 2 {
            return None;
        }
        Some(label.rem_euclid(n) as usize)
    }

    /// FFT index of a physical momentum, which must sit on the lattice.
    pub fn index_of_momentum(&self, p: f64) -> Result<usize> {
        let ratio = p / self.dp();
        let label = ratio.round();
        if (ratio - label).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(Error::OffLattice(p));
        }
        self.index_of_label(label as i64).ok_or(Error::OffLattice(p))
    }

    /// Same box and resolution.
    pub fn matches(&self, other: &SpatialGrid) -> bool {
        self.points == other.points && self.length == other.length
    }

    /// Sauter width in units of the grid spacing; values below one mean the
    /// profile is not resolved in position space.
    pub fn resolution_ratio(&self, width: f64) -> f64 {
        width / self.dx
    }
}

/// Convenience constructor mirroring the config vocabulary.
pub fn build_grid(length: f64, points: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(length, points)
}
