//! Atomic units: hbar = m = e = 1.

/// Speed of light in atomic units.
pub const C: f64 = 137.036;

/// Rest energy `c^2` in atomic units.
pub const C2: f64 = C * C;

/// Physical constants used throughout the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    c: f64,
}

impl PhysicalConstants {
    pub const ATOMIC: PhysicalConstants = PhysicalConstants { c: C };

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn hbar(&self) -> f64 {
        1.0
    }

    pub fn mass(&self) -> f64 {
        1.0
    }

    pub fn charge(&self) -> f64 {
        1.0
    }

    pub fn rest_energy(&self) -> f64 {
        self.c * self.c
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::ATOMIC
    }
}
