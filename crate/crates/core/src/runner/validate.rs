use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{make_free_mode, Branch, FreeMode};
use crate::constants::{C, C2};
use crate::error::Result;
use crate::grid::SpatialGrid;
use crate::oracle::{bound_state_levels, tabulate_transmission};
use crate::potentials::{Closure, FieldSpec};
use crate::propagator::{evolve_field, KineticFactors, Propagator, Schedule, SpinorField};
use crate::runner::config::{GridConfig, ObserveConfig, RunConfig};
use crate::runner::run::simulate;

/// Outcome of one invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// True when `value` must reach `tolerance` from above.
    pub lower_bound: bool,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value < tolerance,
            lower_bound: false,
        }
    }

    fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value >= tolerance,
            lower_bound: true,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cmp = if self.lower_bound { ">=" } else { "<" };
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<24} {:.3e} (need {cmp} {:.1e})", self.name, self.value, self.tolerance)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    /// Multiplies the propagator time step. Anything but `1` is a deliberate
    /// fault used to confirm that the suite notices it.
    pub time_sign: f64,
    /// Skip the short full-basis simulation.
    pub quick: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            time_sign: 1.0,
            quick: false,
        }
    }
}

fn desk_grid() -> Result<SpatialGrid> {
    SpatialGrid::new(6.0, 2048)
}

/// Largest `|<m|n> - delta_mn|` over a spread of lattice modes of both
/// branches.
pub fn orthonormality_defect(grid: &SpatialGrid) -> f64 {
    let n = grid.len();
    let step = (n / 24).max(1);
    let mut modes = Vec::new();
    for k in (0..n).step_by(step).chain([1, n - 1]) {
        for branch in [Branch::Positive, Branch::Negative] {
            modes.push(make_free_mode(grid, grid.momentum(k), branch).expect("lattice momentum"));
        }
    }
    let fields: Vec<SpinorField> = modes.iter().map(|m| SpinorField::from_mode(grid, m)).collect();
    let mut worst: f64 = 0.0;
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate().skip(i) {
            let same = modes[i].index == modes[j].index && modes[i].branch == modes[j].branch;
            let target = if same { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Largest deviation of `<phi|U(t)|phi>` from `exp(-i eps t)` for free
/// eigenmodes `phi`, plus the norm drift of the evolved state.
///
/// `dt_factor` scales the propagator step while `t` keeps its nominal value.
pub fn free_evolution_defect(grid: &SpatialGrid, dt: f64, steps: usize, dt_factor: f64) -> Result<f64> {
    let prop = Propagator::new(grid, &FieldSpec::vacuum(), dt * dt_factor)?;
    let mut ws = prop.workspace();
    let t = dt * steps as f64;
    let labels = [0.0, 1.0, -7.0, 150.0, -600.0];
    let mut worst: f64 = 0.0;
    for &l in &labels {
        for branch in [Branch::Positive, Branch::Negative] {
            let mode: FreeMode = make_free_mode(grid, l * grid.dp(), branch)?;
            let start = SpinorField::from_mode(grid, &mode);
            let mut psi = start.clone();
            for s in 0..steps {
                prop.step_in_place(&mut psi, s as f64 * dt, &mut ws)?;
            }
            let expected = Complex64::from_polar(1.0, -mode.eigenvalue() * t);
            worst = worst
                .max((start.inner(&psi) - expected).norm())
                .max((psi.norm_sqr() - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Distance between two fields.
fn distance(a: &SpinorField, b: &SpinorField) -> f64 {
    let mut diff = a.clone();
    for (d, v) in diff.upper.iter_mut().zip(&b.upper) {
        *d -= v;
    }
    for (d, v) in diff.lower.iter_mut().zip(&b.lower) {
        *d -= v;
    }
    diff.norm_sqr().sqrt()
}

/// Ratio `err(dt) / err(dt/2)` of terminal states against a reference with
/// `dt/4`, for one sea mode in a time-dependent two-step field.
pub fn convergence_ratio(grid: &SpatialGrid, spec: &FieldSpec, t_max: f64, steps: usize, label: f64) -> Result<f64> {
    let mode = make_free_mode(grid, label * grid.dp(), Branch::Negative)?;
    let evolve = |n: usize| -> Result<SpinorField> {
        let schedule = Schedule::new(t_max, n, n)?;
        evolve_field(SpinorField::from_mode(grid, &mode), spec, &schedule, |_, _, _| Ok(()))
    };
    let coarse = evolve(steps)?;
    let fine = evolve(2 * steps)?;
    let reference = evolve(4 * steps)?;
    Ok(distance(&coarse, &reference) / distance(&fine, &reference))
}

/// A smooth, time-dependent field on a small lattice for convergence runs.
pub fn convergence_problem() -> Result<(SpatialGrid, FieldSpec)> {
    let grid = SpatialGrid::new(3.0, 256)?;
    let spec = FieldSpec::new(2.5 * C2, 0.25 * C2, 0.05, 0.2).with_envelope(crate::potentials::Envelope::Sinusoid {
        omega: 0.5 * C2,
        phase: 0.0,
        sign: 1.0,
    });
    Ok((grid, spec))
}

/// Largest closed-form versus transfer-matrix difference over 200 energies
/// for the reference parameters and three further sets.
pub fn oracle_defect() -> Result<f64> {
    let sets = [
        (2.5 * C2, 0.25 * C2, 0.2),
        (2.2 * C2, 0.6 * C2, 0.05),
        (3.1 * C2, -0.4 * C2, 0.37),
        (4.0 * C2, 1.3 * C2, 0.011),
    ];
    let mut worst: f64 = 0.0;
    for (v1, v2, d) in sets {
        for row in tabulate_transmission(v1, v2, d, 200)? {
            worst = worst.max(row.abs_diff);
        }
    }
    Ok(worst)
}

/// Short full-basis run whose projections must stay complete.
pub fn completeness_run_config() -> RunConfig {
    RunConfig {
        name: Some("validate".into()),
        output: None,
        workers: None,
        grid: GridConfig {
            length: 6.0,
            points: 256,
        },
        schedule: Schedule {
            t_max: 0.002,
            steps: 100,
            stride: 10,
        },
        field: FieldSpec::new(2.5 * C2, 0.25 * C2, 0.075 / C, 0.2).with_closure(Some(Closure::for_box(6.0))),
        observe: ObserveConfig {
            spectrum_times: vec![0.002],
            ..Default::default()
        },
    }
}

/// Runs the invariant suite.
pub fn validate(options: &ValidateOptions) -> Result<ValidationReport> {
    let grid = desk_grid()?;
    let dt = 0.03 / 1500.0;
    let mut checks = vec![
        Check::below("basis_orthonormality", orthonormality_defect(&grid), 1e-12),
        Check::below(
            "kinetic_unitarity",
            KineticFactors::new(&grid, dt * options.time_sign)?.unitarity_defect(),
            1e-12,
        ),
        Check::below(
            "propagator_unitarity",
            free_evolution_defect(&grid, dt, 50, options.time_sign)?,
            1e-9,
        ),
        Check::below("oracle_agreement", oracle_defect()?, 1e-10),
    ];
    let bound = bound_state_levels(0.25 * C2, 0.2)?;
    checks.push(Check::below("bound_state_residual", bound.max_residual, 1e-10));
    let (cgrid, cspec) = convergence_problem()?;
    checks.push(Check::above(
        "convergence_ratio",
        convergence_ratio(&cgrid, &cspec, 2e-3, 160, -3.0)?,
        3.5,
    ));
    if !options.quick {
        let sim = simulate(&completeness_run_config())?;
        checks.push(Check::below("completeness", sim.summary.completeness_defect, 1e-8));
    }
    Ok(ValidationReport { checks })
}
