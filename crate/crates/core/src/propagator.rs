//! Strang split-operator propagation of two-component spinor fields.
//!
//! One step is `exp(-i V dt/2) F^-1 K F exp(-i V dt/2)` with `V` sampled at
//! the midpoint time and `K = exp(-i H0(p) dt)` applied in closed form.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::basis::{free_energy, FreeBasis, FreeMode};
use crate::constants::{C, C2};
use crate::error::{param, Error, Result};
use crate::grid::SpatialGrid;
use crate::observables::projection::{ProjectionRecord, Projector};
use crate::potentials::{FieldSpec, PotentialProfiles};

/// Negative modes evolved in lockstep and reduced together. Fixed so that
/// reductions do not depend on the worker count.
pub const MODE_CHUNK: usize = 8;

/// Position-space samples of a two-component field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: SpatialGrid,
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: &SpatialGrid) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            upper: vec![Complex64::default(); n],
            lower: vec![Complex64::default(); n],
        }
    }

    pub fn from_mode(grid: &SpatialGrid, mode: &FreeMode) -> Self {
        let mut f = Self::zeros(grid);
        for j in 0..grid.len() {
            let v = mode.at(grid.x(j));
            f.upper[j] = v[0];
            f.lower[j] = v[1];
        }
        f
    }

    pub fn from_components(
        grid: &SpatialGrid,
        upper: Vec<Complex64>,
        lower: Vec<Complex64>,
    ) -> Result<Self> {
        if upper.len() != grid.len() || lower.len() != grid.len() {
            return Err(Error::GridMismatch("component length differs from grid size"));
        }
        Ok(Self {
            grid: grid.clone(),
            upper,
            lower,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// `sum_j dx (|u_j|^2 + |l_j|^2)`.
    pub fn norm_sqr(&self) -> f64 {
        let s: f64 = self
            .upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u.norm_sqr() + l.norm_sqr())
            .sum();
        s * self.grid.dx()
    }

    /// Discrete inner product `sum_j dx phi^dagger psi`.
    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        let s: Complex64 = self
            .upper
            .iter()
            .zip(&self.lower)
            .zip(other.upper.iter().zip(&other.lower))
            .map(|((a, b), (c, d))| a.conj() * c + b.conj() * d)
            .sum();
        s * self.grid.dx()
    }
}

/// `exp(-i H0(p) dt)` per lattice momentum as coefficients of `{I, s1, s3}`:
/// `cos(E dt) I - i sin(E dt) (c p s1 + c^2 s3) / E`.
#[derive(Debug, Clone)]
pub struct KineticFactors {
    dt: f64,
    grid: SpatialGrid,
    /// `(cos E dt, sin(E dt) c p / E, sin(E dt) c^2 / E)`, FFT order.
    coeffs: Vec<[f64; 3]>,
}

impl KineticFactors {
    pub fn new(grid: &SpatialGrid, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(param("dt", "must be finite and non-zero"));
        }
        let coeffs = grid
            .momenta()
            .into_iter()
            .map(|p| {
                let e = free_energy(p);
                let (s, c) = (e * dt).sin_cos();
                [c, s * C * p / e, s * C2 / e]
            })
            .collect();
        Ok(Self {
            dt,
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// The 2x2 matrix at FFT index `k`, row major.
    pub fn matrix(&self, k: usize) -> [[Complex64; 2]; 2] {
        let [a, b, c3] = self.coeffs[k];
        let i = Complex64::i();
        [
            [Complex64::new(a, -c3), -i * b],
            [-i * b, Complex64::new(a, c3)],
        ]
    }

    /// Applies the factor in place to momentum-space components, scaled by
    /// `scale` (used to fold in the inverse FFT normalisation).
    pub fn apply(&self, upper: &mut [Complex64], lower: &mut [Complex64], scale: f64) {
        for ((u, l), &[a, b, c3]) in upper.iter_mut().zip(lower.iter_mut()).zip(&self.coeffs) {
            let m00 = Complex64::new(a * scale, -c3 * scale);
            let m11 = Complex64::new(a * scale, c3 * scale);
            let off = Complex64::new(0.0, -b * scale);
            let (x, y) = (*u, *l);
            *u = m00 * x + off * y;
            *l = off * x + m11 * y;
        }
    }

    /// Largest deviation of `M^dagger M` from the identity over the lattice.
    pub fn unitarity_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|k| {
                let m = self.matrix(k);
                let mut worst: f64 = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        let v = m[0][r].conj() * m[0][c] + m[1][r].conj() * m[1][c];
                        let id = if r == c { 1.0 } else { 0.0 };
                        worst = worst.max((v - id).norm());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }
}

pub fn precompute_kinetic(grid: &SpatialGrid, dt: f64) -> Result<KineticFactors> {
    KineticFactors::new(grid, dt)
}

/// Time discretisation and output cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub t_max: f64,
    pub steps: usize,
    /// Steps between observable snapshots.
    pub stride: usize,
}

impl Schedule {
    pub fn new(t_max: f64, steps: usize, stride: usize) -> Result<Self> {
        let s = Self {
            t_max,
            steps,
            stride,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(param("t_max", "must be non-negative"));
        }
        if self.steps > 0 && self.t_max == 0.0 {
            return Err(param("t_max", "must be positive when steps > 0"));
        }
        if self.stride == 0 {
            return Err(param("stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.t_max / self.steps as f64
        }
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt()
    }

    /// Whether observers fire after `step` steps.
    pub fn is_output(&self, step: usize) -> bool {
        step % self.stride == 0 || step == self.steps
    }

    /// Step indices at which observers fire, including `0` and the last step.
    pub fn output_steps(&self) -> Vec<usize> {
        (0..=self.steps).filter(|&s| self.is_output(s)).collect()
    }

    pub fn output_times(&self) -> Vec<f64> {
        self.output_steps().into_iter().map(|s| self.time(s)).collect()
    }
}

/// Reusable stepping machinery for one grid, field and time step.
pub struct Propagator {
    grid: SpatialGrid,
    spec: FieldSpec,
    kinetic: KineticFactors,
    profiles: PotentialProfiles,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Half-step phases for a static field.
    static_phase: Option<Vec<Complex64>>,
}

/// Per-worker buffers.
pub struct Workspace {
    scratch: Vec<Complex64>,
    potential: Vec<f64>,
    phase: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: &SpatialGrid, spec: &FieldSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        let kinetic = KineticFactors::new(grid, dt)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let profiles = spec.profiles(grid);
        let mut prop = Self {
            grid: grid.clone(),
            spec: spec.clone(),
            kinetic,
            profiles,
            forward,
            inverse,
            static_phase: None,
        };
        if spec.is_static() {
            let mut ws = prop.workspace();
            prop.fill_phase(0.0, &mut ws);
            prop.static_phase = Some(ws.phase);
        }
        Ok(prop)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.kinetic.dt()
    }

    pub fn kinetic(&self) -> &KineticFactors {
        &self.kinetic
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.grid.len();
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        Workspace {
            scratch: vec![Complex64::default(); scratch_len],
            potential: vec![0.0; n],
            phase: vec![Complex64::default(); n],
        }
    }

    /// Half-step phases `exp(-i V(x, t_mid) dt / 2)` into `ws.phase`.
    fn fill_phase(&self, t_mid: f64, ws: &mut Workspace) {
        self.profiles
            .sample_into(&self.spec, t_mid, &mut ws.potential);
        let half = 0.5 * self.kinetic.dt();
        for (ph, &v) in ws.phase.iter_mut().zip(&ws.potential) {
            *ph = Complex64::from_polar(1.0, -v * half);
        }
    }

    fn to_momentum(&self, field: &mut SpinorField, scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(&mut field.upper, scratch);
        self.forward.process_with_scratch(&mut field.lower, scratch);
    }

    fn kick(field: &mut SpinorField, phase: &[Complex64]) {
        for ((u, l), p) in field.upper.iter_mut().zip(field.lower.iter_mut()).zip(phase) {
            *u *= p;
            *l *= p;
        }
    }

    fn drift(&self, field: &mut SpinorField, scratch: &mut [Complex64]) {
        self.to_momentum(field, scratch);
        let scale = (self.grid.len() as f64).recip();
        self.kinetic.apply(&mut field.upper, &mut field.lower, scale);
        self.inverse.process_with_scratch(&mut field.upper, scratch);
        self.inverse.process_with_scratch(&mut field.lower, scratch);
    }

    /// Advances a batch of fields from `t` to `t + dt` sharing one potential
    /// evaluation.
    pub fn step_batch(&self, fields: &mut [SpinorField], t: f64, ws: &mut Workspace) {
        if self.static_phase.is_none() {
            self.fill_phase(t + 0.5 * self.kinetic.dt(), ws);
        }
        let phase: &[Complex64] = self.static_phase.as_deref().unwrap_or(&ws.phase);
        for f in fields.iter_mut() {
            Self::kick(f, phase);
            self.drift(f, &mut ws.scratch);
            Self::kick(f, phase);
        }
    }

    pub fn step_in_place(&self, field: &mut SpinorField, t: f64, ws: &mut Workspace) -> Result<()> {
        if !field.grid.matches(&self.grid) {
            return Err(Error::GridMismatch("field and propagator grids differ"));
        }
        self.step_batch(std::slice::from_mut(field), t, ws);
        Ok(())
    }
}

/// One Strang step of `psi` from `t` to `t + dt`.
///
/// Builds FFT plans on every call; long runs should hold a [`Propagator`].
pub fn step(
    psi: &SpinorField,
    spec: &FieldSpec,
    t: f64,
    factors: &KineticFactors,
) -> Result<SpinorField> {
    if !psi.grid.matches(&factors.grid) {
        return Err(Error::GridMismatch("field and kinetic factors grids differ"));
    }
    let mut prop = Propagator::new(&psi.grid, spec, factors.dt)?;
    prop.kinetic = factors.clone();
    let mut ws = prop.workspace();
    let mut out = psi.clone();
    prop.step_in_place(&mut out, t, &mut ws)?;
    Ok(out)
}

/// Evolves a single free mode, calling `observer(step, t, psi)` at `t = 0`
/// and at every output step.
pub fn evolve_mode<F>(
    grid: &SpatialGrid,
    initial: &FreeMode,
    spec: &FieldSpec,
    schedule: &Schedule,
    observer: F,
) -> Result<SpinorField>
where
    F: FnMut(usize, f64, &SpinorField) -> Result<()>,
{
    let field = SpinorField::from_mode(grid, initial);
    evolve_field(field, spec, schedule, observer)
}

/// Evolves an arbitrary initial field; see [`evolve_mode`].
pub fn evolve_field<F>(
    mut field: SpinorField,
    spec: &FieldSpec,
    schedule: &Schedule,
    mut observer: F,
) -> Result<SpinorField>
where
    F: FnMut(usize, f64, &SpinorField) -> Result<()>,
{
    schedule.validate()?;
    observer(0, 0.0, &field)?;
    if schedule.steps == 0 {
        return Ok(field);
    }
    let grid = field.grid.clone();
    let prop = Propagator::new(&grid, spec, schedule.dt())?;
    let mut ws = prop.workspace();
    for s in 0..schedule.steps {
        prop.step_in_place(&mut field, schedule.time(s), &mut ws)?;
        if schedule.is_output(s + 1) {
            observer(s + 1, schedule.time(s + 1), &field)?;
        }
    }
    Ok(field)
}

/// Consumer of projection records from [`evolve_basis`].
///
/// Records reach a sink grouped by output step and, within a step, in
/// ascending order of the evolved mode. Sinks are merged in chunk order.
pub trait RecordSink: Send + Sized {
    fn record(&mut self, rec: &ProjectionRecord) -> Result<()>;
    fn merge(&mut self, later: Self);
}

/// Collects every record; for small problems and tests.
#[derive(Debug, Default, Clone)]
pub struct RecordCollector {
    pub records: Vec<ProjectionRecord>,
}

impl RecordSink for RecordCollector {
    fn record(&mut self, rec: &ProjectionRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }

    fn merge(&mut self, later: Self) {
        self.records.extend(later.records);
    }
}

/// Evolves every windowed negative mode of `basis` and feeds the projection
/// rows to sinks created by `make_sink`, one per chunk of
/// [`MODE_CHUNK`] modes. The merged sink is returned.
///
/// The result does not depend on how rayon schedules the chunks.
pub fn evolve_basis<S, M>(
    basis: &FreeBasis,
    spec: &FieldSpec,
    schedule: &Schedule,
    make_sink: M,
) -> Result<S>
where
    S: RecordSink,
    M: Fn() -> S + Sync,
{
    schedule.validate()?;
    let grid = basis.grid();
    let prop = if schedule.steps > 0 {
        Some(Propagator::new(grid, spec, schedule.dt())?)
    } else {
        spec.validate()?;
        None
    };
    let projector = Projector::new(basis);
    let chunks: Vec<&[usize]> = basis.evolved().chunks(MODE_CHUNK).collect();
    let partials: Vec<Result<S>> = chunks
        .par_iter()
        .map(|chunk| evolve_chunk(basis, prop.as_ref(), &projector, schedule, chunk, &make_sink))
        .collect();
    let mut iter = partials.into_iter();
    let mut total = match iter.next() {
        Some(first) => first?,
        None => make_sink(),
    };
    for p in iter {
        total.merge(p?);
    }
    Ok(total)
}

fn evolve_chunk<S, M>(
    basis: &FreeBasis,
    prop: Option<&Propagator>,
    projector: &Projector,
    schedule: &Schedule,
    chunk: &[usize],
    make_sink: &M,
) -> Result<S>
where
    S: RecordSink,
    M: Fn() -> S,
{
    let grid = basis.grid();
    let mut sink = make_sink();
    let mut fields: Vec<SpinorField> = chunk
        .iter()
        .map(|&k| SpinorField::from_mode(grid, &basis.negative_mode(k)))
        .collect();
    let mut scratch = projector.scratch();
    let mut emit = |step: usize, fields: &[SpinorField], scratch: &mut _| -> Result<()> {
        let t = schedule.time(step);
        for (&k, f) in chunk.iter().zip(fields) {
            let rec = projector.project_with(f, k, step, t, scratch)?;
            sink.record(&rec)?;
        }
        Ok(())
    };
    emit(0, &fields, &mut scratch)?;
    if let Some(prop) = prop {
        let mut ws = prop.workspace();
        for s in 0..schedule.steps {
            prop.step_batch(&mut fields, schedule.time(s), &mut ws);
            if schedule.is_output(s + 1) {
                emit(s + 1, &fields, &mut scratch)?;
            }
        }
    }
    Ok(sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, make_free_mode, Branch};
    use crate::grid::build_grid;

    #[test]
    fn kinetic_rest_frame_and_unitarity() {
        let g = build_grid(6.0, 256).unwrap();
        let dt = 2e-5;
        let k = precompute_kinetic(&g, dt).unwrap();
        let m = k.matrix(0);
        let ph = C2 * dt;
        assert!((m[0][0] - Complex64::from_polar(1.0, -ph)).norm() < 1e-15);
        assert!((m[1][1] - Complex64::from_polar(1.0, ph)).norm() < 1e-15);
        assert!(m[0][1].norm() < 1e-15 && m[1][0].norm() < 1e-15);
        assert!(k.unitarity_defect() < 1e-14);
    }

    #[test]
    fn kinetic_group_property() {
        let g = build_grid(6.0, 128).unwrap();
        let dt = 3.7e-5;
        let one = precompute_kinetic(&g, dt).unwrap();
        let two = precompute_kinetic(&g, 2.0 * dt).unwrap();
        for k in 0..g.len() {
            let a = one.matrix(k);
            let b = two.matrix(k);
            for r in 0..2 {
                for c in 0..2 {
                    let sq = a[r][0] * a[0][c] + a[r][1] * a[1][c];
                    assert!((sq - b[r][c]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn free_mode_picks_up_eigenphase() {
        let g = build_grid(6.0, 256).unwrap();
        let dt = 2e-5;
        let factors = precompute_kinetic(&g, dt).unwrap();
        let mode = make_free_mode(&g, 5.0 * g.dp(), Branch::Positive).unwrap();
        let psi = SpinorField::from_mode(&g, &mode);
        let out = step(&psi, &FieldSpec::vacuum(), 0.0, &factors).unwrap();
        let phase = Complex64::from_polar(1.0, -mode.energy * dt);
        for j in 0..g.len() {
            assert!((out.upper[j] - phase * psi.upper[j]).norm() < 1e-13);
            assert!((out.lower[j] - phase * psi.lower[j]).norm() < 1e-13);
        }
    }

    #[test]
    fn step_preserves_norm() {
        let g = build_grid(6.0, 512).unwrap();
        let spec = FieldSpec::new(2.5 * C2, 0.25 * C2, 0.075 / C, 0.2);
        let factors = precompute_kinetic(&g, 2e-5).unwrap();
        let mode = make_free_mode(&g, -3.0 * g.dp(), Branch::Negative).unwrap();
        let psi = SpinorField::from_mode(&g, &mode);
        let out = step(&psi, &spec, 0.0, &factors).unwrap();
        assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = build_grid(6.0, 64).unwrap();
        let h = build_grid(6.0, 128).unwrap();
        let psi = SpinorField::zeros(&g);
        let factors = precompute_kinetic(&h, 1e-5).unwrap();
        assert!(matches!(
            step(&psi, &FieldSpec::vacuum(), 0.0, &factors),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn zero_steps_returns_initial() {
        let g = build_grid(6.0, 64).unwrap();
        let mode = make_free_mode(&g, 2.0 * g.dp(), Branch::Negative).unwrap();
        let sched = Schedule::new(0.0, 0, 1).unwrap();
        let mut calls = 0;
        let out = evolve_mode(&g, &mode, &FieldSpec::vacuum(), &sched, |_, _, _| {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(out, SpinorField::from_mode(&g, &mode));
        assert_eq!(calls, 1);
    }

    #[test]
    fn observer_cadence() {
        let s = Schedule::new(1.0, 10, 4).unwrap();
        assert_eq!(s.output_steps(), vec![0, 4, 8, 10]);
        assert!(Schedule::new(1.0, 10, 0).is_err());
    }

    #[test]
    fn local_error_is_third_order() {
        // one step of dt against two of dt/2, static field
        let g = build_grid(6.0, 512).unwrap();
        let spec = FieldSpec::new(2.5 * C2, 0.25 * C2, 0.5 / C, 0.2);
        let mode = make_free_mode(&g, -20.0 * g.dp(), Branch::Negative).unwrap();
        let psi = SpinorField::from_mode(&g, &mode);
        let defect = |dt: f64| {
            let one = step(&psi, &spec, 0.0, &precompute_kinetic(&g, dt).unwrap()).unwrap();
            let half = precompute_kinetic(&g, 0.5 * dt).unwrap();
            let a = step(&psi, &spec, 0.0, &half).unwrap();
            let b = step(&a, &spec, 0.5 * dt, &half).unwrap();
            let mut d = one.clone();
            for j in 0..g.len() {
                d.upper[j] -= b.upper[j];
                d.lower[j] -= b.lower[j];
            }
            d.norm_sqr().sqrt()
        };
        let dts = [4e-7, 2e-7, 1e-7];
        let errs: Vec<f64> = dts.iter().map(|&dt| defect(dt)).collect();
        let order = |a: f64, b: f64| (a / b).log2();
        assert!(order(errs[0], errs[1]) > 2.5, "{errs:?}");
        assert!(order(errs[1], errs[2]) > 2.5, "{errs:?}");
    }

    #[test]
    fn basis_records_arrive_in_mode_order() {
        let g = build_grid(4.0, 64).unwrap();
        let basis = build_basis(&g, Some(5.0 * g.dp())).unwrap();
        let sched = Schedule::new(1e-4, 4, 2).unwrap();
        let spec = FieldSpec::new(2.5 * C2, 0.0, 0.3, 0.2);
        let out: RecordCollector = evolve_basis(&basis, &spec, &sched, RecordCollector::default).unwrap();
        assert_eq!(out.records.len(), basis.evolved_count() * 3);
        // chunks concatenated in order; within a chunk grouped by step
        let first_chunk: Vec<usize> = basis.evolved()[..MODE_CHUNK].to_vec();
        let got: Vec<usize> = out.records[..MODE_CHUNK].iter().map(|r| r.mode).collect();
        assert_eq!(got, first_chunk);
    }
}
