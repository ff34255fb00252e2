use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::basis::FreeBasis;
use crate::constants::C;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::observables::rate::{EnergySelection, Species};
use crate::potentials::FieldSpec;
use crate::propagator::Schedule;

/// Box and lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    pub points: usize,
}

/// What to extract from a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveConfig {
    /// Evolved negative modes satisfy `|n| <= window_c * c`; absent means
    /// the full lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_c: Option<f64>,
    /// Times at which full spectra are written.
    #[serde(default)]
    pub spectrum_times: Vec<f64>,
    /// Times at which the created-electron density is written.
    #[serde(default)]
    pub density_times: Vec<f64>,
    /// Electron energy `E*` for the pair-creation rate, in units of `c^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_energy_c2: Option<f64>,
    #[serde(default)]
    pub rate_selection: EnergySelection,
    #[serde(default)]
    pub rate_species: Species,
    /// Evolve only the sea modes a positron rate needs; yields and spectra
    /// then cover those modes alone.
    #[serde(default)]
    pub rate_only: bool,
    /// Gaussian smoothing of the rate in output strides.
    #[serde(default = "default_smoothing")]
    pub smoothing_strides: f64,
    /// Also run the same configuration without control field and write its
    /// rate as the baseline column.
    #[serde(default)]
    pub baseline: bool,
}

fn default_smoothing() -> f64 {
    5.0
}

impl Default for ObserveConfig {
    fn default() -> Self {
        Self {
            window_c: None,
            spectrum_times: Vec::new(),
            density_times: Vec::new(),
            rate_energy_c2: None,
            rate_selection: EnergySelection::Nearest,
            rate_species: Species::Electron,
            rate_only: false,
            smoothing_strides: default_smoothing(),
            baseline: false,
        }
    }
}

/// Complete, self-describing description of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub grid: GridConfig,
    pub schedule: Schedule,
    pub field: FieldSpec,
    #[serde(default)]
    pub observe: ObserveConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Error::Validation {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return Err(bad("grid.length", "must be positive"));
        }
        if self.grid.points < 8 || !self.grid.points.is_power_of_two() {
            return Err(bad("grid.points", "must be a power of two >= 8"));
        }
        let s = &self.schedule;
        if !(s.t_max > 0.0 && s.t_max.is_finite()) {
            return Err(bad("schedule.t_max", "must be positive"));
        }
        if s.steps == 0 {
            return Err(bad("schedule.steps", "must be positive"));
        }
        if s.stride == 0 {
            return Err(bad("schedule.stride", "must be positive"));
        }
        self.field.validate().map_err(|e| match e {
            Error::Parameter { name, reason } => Error::Validation {
                field: format!("field.{name}"),
                reason,
            },
            other => other,
        })?;
        let o = &self.observe;
        if let Some(w) = o.window_c {
            if !(w > 0.0 && w.is_finite()) {
                return Err(bad("observe.window_c", "must be positive"));
            }
        }
        for (field, times) in [
            ("observe.spectrum_times", &o.spectrum_times),
            ("observe.density_times", &o.density_times),
        ] {
            if times.iter().any(|&t| !(t >= 0.0 && t <= s.t_max)) {
                return Err(bad(field, "must lie within [0, t_max]"));
            }
        }
        if let Some(e) = o.rate_energy_c2 {
            if !(e > 1.0 && e.is_finite()) {
                return Err(bad("observe.rate_energy_c2", "must exceed 1"));
            }
        }
        if o.rate_only && (o.rate_energy_c2.is_none() || o.rate_species != Species::Positron) {
            return Err(bad("observe.rate_only", "needs a positron rate energy"));
        }
        if !(o.smoothing_strides >= 0.0 && o.smoothing_strides.is_finite()) {
            return Err(bad("observe.smoothing_strides", "must be non-negative"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers", "must be positive"));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.length, self.grid.points)
    }

    pub fn build_basis(&self, grid: &SpatialGrid) -> Result<FreeBasis> {
        FreeBasis::new(grid, self.observe.window_c.map(|w| w * C))
    }

    /// The same run with the control field removed.
    pub fn without_control(&self) -> RunConfig {
        let mut c = self.clone();
        c.field.v2 = 0.0;
        c.name = self.name.as_ref().map(|n| format!("{n}-baseline"));
        c.observe.baseline = false;
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, column)
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        if let Some(rest) = message.strip_prefix("missing field `") {
            let field = rest.split('`').next().unwrap_or_default().to_string();
            return Error::Validation {
                field,
                reason: "is required".into(),
            };
        }
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::Parse {
            line,
            column,
            message,
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical text of a configuration.
pub fn serialize_config(cfg: &RunConfig) -> String {
    cfg.to_toml()
}
