use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::basis::{free_energy, group_velocity, FreeBasis};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::observables::projection::ProjectionRecord;
use crate::observables::rate::Species;
use crate::propagator::{RecordSink, Schedule};

/// One energy level of a spectrum; the two momenta `+-p` sharing the energy
/// are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub energy: f64,
    /// Momentum magnitude.
    pub momentum: f64,
    /// `|dE/dp| dp`, the energy interval represented by this level.
    pub delta_e: f64,
    /// Occupation summed over `+-p`.
    pub occupation: f64,
    /// `N(E, t) = L / (2 pi |dE/dp|) (N_p + N_-p)`.
    pub density: f64,
}

impl SpectrumPoint {
    /// `N(E, t) 2 pi / t`, comparable with a transmission coefficient.
    pub fn normalized(&self, t: f64) -> f64 {
        self.density * 2.0 * PI / t
    }
}

/// Electron and positron spectra at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSnapshot {
    pub time: f64,
    /// `N_p(t) = sum_n |U_pn|^2`, FFT order.
    pub electron_occupation: Vec<f64>,
    /// `(FFT index n, N_n(t) = sum_p |U_pn|^2)` over evolved modes.
    pub positron_occupation: Vec<(usize, f64)>,
    /// Electron levels with `p != 0`, ascending in energy.
    pub electrons: Vec<SpectrumPoint>,
    /// Positron levels with `n != 0`, ascending in energy.
    pub positrons: Vec<SpectrumPoint>,
}

impl SpectrumSnapshot {
    pub fn from_occupations(
        grid: &SpatialGrid,
        time: f64,
        electron_occupation: Vec<f64>,
        positron_occupation: Vec<(usize, f64)>,
    ) -> Self {
        let electrons = levels(grid, |k| electron_occupation[k]);
        let mut per_index = vec![None; grid.len()];
        for &(k, v) in &positron_occupation {
            per_index[k] = Some(v);
        }
        let positrons = levels_sparse(grid, &per_index);
        Self {
            time,
            electron_occupation,
            positron_occupation,
            electrons,
            positrons,
        }
    }

    /// `sum_p N_p(t)`, including `p = 0`.
    pub fn electron_total(&self) -> f64 {
        self.electron_occupation.iter().sum()
    }

    pub fn positron_total(&self) -> f64 {
        self.positron_occupation.iter().map(|(_, v)| v).sum()
    }

    /// Occupation of the excluded `p = 0` lattice point.
    pub fn electron_rest(&self) -> f64 {
        self.electron_occupation[0]
    }

    /// `sum_E dE N(E, t)` over the electron levels.
    pub fn electron_energy_integral(&self) -> f64 {
        self.electrons.iter().map(|p| p.delta_e * p.density).sum()
    }

    pub fn positron_energy_integral(&self) -> f64 {
        self.positrons.iter().map(|p| p.delta_e * p.density).sum()
    }
}

fn level(grid: &SpatialGrid, label: i64, occupation: f64) -> SpectrumPoint {
    let p = label as f64 * grid.dp();
    let v = group_velocity(p).abs();
    SpectrumPoint {
        energy: free_energy(p),
        momentum: p,
        delta_e: v * grid.dp(),
        occupation,
        density: grid.length() / (2.0 * PI * v) * occupation,
    }
}

fn levels(grid: &SpatialGrid, occ: impl Fn(usize) -> f64) -> Vec<SpectrumPoint> {
    let half = grid.len() as i64 / 2;
    (1..=half)
        .map(|l| {
            let plus = grid.index_of_label(l).map_or(0.0, &occ);
            let minus = grid.index_of_label(-l).map_or(0.0, &occ);
            level(grid, l, plus + minus)
        })
        .collect()
}

fn levels_sparse(grid: &SpatialGrid, occ: &[Option<f64>]) -> Vec<SpectrumPoint> {
    let half = grid.len() as i64 / 2;
    (1..=half)
        .filter_map(|l| {
            let plus = grid.index_of_label(l).and_then(|k| occ[k]);
            let minus = grid.index_of_label(-l).and_then(|k| occ[k]);
            if plus.is_none() && minus.is_none() {
                return None;
            }
            Some(level(grid, l, plus.unwrap_or(0.0) + minus.unwrap_or(0.0)))
        })
        .collect()
}

/// `N(t) = sum_n sum_p |U_pn|^2` over the records of one time, summed in the
/// order given (mode-major).
pub fn pair_number(records: &[ProjectionRecord]) -> f64 {
    records.iter().map(|r| r.electron_weight()).sum()
}

/// Same double sum reduced momentum-major.
pub fn pair_number_p_major(records: &[ProjectionRecord]) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    (0..first.electron.len())
        .map(|k| records.iter().map(|r| r.electron[k].norm_sqr()).sum::<f64>())
        .sum()
}

/// Spectra from the records of one time step.
pub fn energy_spectrum(records: &[ProjectionRecord], grid: &SpatialGrid) -> Result<SpectrumSnapshot> {
    let time = records.first().map_or(0.0, |r| r.time);
    let mut electron = vec![0.0; grid.len()];
    let mut positron = Vec::with_capacity(records.len());
    for r in records {
        if r.electron.len() != grid.len() {
            return Err(Error::GridMismatch("record length differs from grid size"));
        }
        let mut nn = 0.0;
        for (acc, u) in electron.iter_mut().zip(&r.electron) {
            let w = u.norm_sqr();
            *acc += w;
            nn += w;
        }
        positron.push((r.mode, nn));
    }
    Ok(SpectrumSnapshot::from_occupations(grid, time, electron, positron))
}

/// Created-electron density `rho(x_j) = sum_n |sum_p U_pn u_p(x_j)|^2`.
pub fn density(records: &[ProjectionRecord], basis: &FreeBasis) -> Vec<f64> {
    let acc = DensityAccumulator::new(basis);
    let mut rho = vec![0.0; basis.grid().len()];
    let mut buf = acc.buffers();
    for r in records {
        acc.add(r, &mut rho, &mut buf);
    }
    rho
}

struct DensityAccumulator {
    fft: Arc<dyn Fft<f64>>,
    /// `(-1)^k / sqrt(L)` times the positive unit spinor.
    weights: Vec<[f64; 2]>,
}

struct DensityBuffers {
    upper: Vec<Complex64>,
    lower: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl DensityAccumulator {
    fn new(basis: &FreeBasis) -> Self {
        let grid = basis.grid();
        let fft = FftPlanner::new().plan_fft_inverse(grid.len());
        let scale = grid.length().sqrt().recip();
        let weights = (0..grid.len())
            .map(|k| {
                let s = basis.positive_spinor(k);
                let w = if k % 2 == 0 { scale } else { -scale };
                [s[0] * w, s[1] * w]
            })
            .collect();
        Self { fft, weights }
    }

    fn buffers(&self) -> DensityBuffers {
        let n = self.weights.len();
        DensityBuffers {
            upper: vec![Complex64::default(); n],
            lower: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); self.fft.get_inplace_scratch_len()],
        }
    }

    fn add(&self, rec: &ProjectionRecord, rho: &mut [f64], buf: &mut DensityBuffers) {
        for ((u, l), (w, c)) in buf
            .upper
            .iter_mut()
            .zip(buf.lower.iter_mut())
            .zip(self.weights.iter().zip(&rec.electron))
        {
            *u = c * w[0];
            *l = c * w[1];
        }
        self.fft.process_with_scratch(&mut buf.upper, &mut buf.scratch);
        self.fft.process_with_scratch(&mut buf.lower, &mut buf.scratch);
        for ((r, u), l) in rho.iter_mut().zip(&buf.upper).zip(&buf.lower) {
            *r += u.norm_sqr() + l.norm_sqr();
        }
    }
}

/// What a [`ProjectionSummary`] keeps from the record stream.
#[derive(Debug, Clone)]
pub struct SummaryLayout {
    /// Output steps of the schedule.
    pub outputs: Vec<usize>,
    pub times: Vec<f64>,
    /// Steps whose full spectra are kept.
    pub spectrum_steps: Vec<usize>,
    /// Steps whose density is kept.
    pub density_steps: Vec<usize>,
    /// FFT indices of modes tracked at every output.
    pub tracked: Vec<usize>,
    /// Whether `tracked` holds positive modes or evolved sea modes.
    pub tracked_species: Species,
    /// Abort when `|completeness - 1|` exceeds this.
    pub completeness_tolerance: Option<f64>,
}

impl SummaryLayout {
    /// Snaps requested times onto the nearest output steps.
    pub fn new(
        schedule: &Schedule,
        spectrum_times: &[f64],
        density_times: &[f64],
        tracked: Vec<usize>,
    ) -> Self {
        let outputs = schedule.output_steps();
        let times = outputs.iter().map(|&s| schedule.time(s)).collect::<Vec<_>>();
        let snap = |req: &[f64]| {
            let mut v: Vec<usize> = req
                .iter()
                .map(|&t| {
                    let i = times
                        .iter()
                        .enumerate()
                        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                        .map_or(0, |(i, _)| i);
                    outputs[i]
                })
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        Self {
            spectrum_steps: snap(spectrum_times),
            density_steps: snap(density_times),
            outputs,
            times,
            tracked,
            tracked_species: Species::Electron,
            completeness_tolerance: Some(1e-8),
        }
    }
}

/// Deterministic running reduction of projection records.
pub struct ProjectionSummary {
    layout: Arc<SummaryLayout>,
    density_acc: Option<Arc<DensityAccumulatorHandle>>,
    /// `N(t)` per output.
    pub yield_series: Vec<f64>,
    /// Tracked `N_p(t)` per output, per tracked mode.
    pub tracked_series: Vec<Vec<f64>>,
    /// Full `N_p` per spectrum step.
    pub electron_occupation: Vec<Vec<f64>>,
    /// `(n, N_n)` per spectrum step.
    pub positron_occupation: Vec<Vec<(usize, f64)>>,
    pub densities: Vec<Vec<f64>>,
    /// Largest `|sum_p |U_pn|^2 + sum_n' |U_n'n|^2 - 1|` seen.
    pub completeness_defect: f64,
    pub modes: usize,
    buffers: Option<DensityBuffers>,
}

/// Shared density machinery.
pub struct DensityAccumulatorHandle(DensityAccumulator);

impl ProjectionSummary {
    pub fn factory(
        layout: SummaryLayout,
        basis: &FreeBasis,
    ) -> impl Fn() -> ProjectionSummary + Sync {
        let layout = Arc::new(layout);
        let dens = if layout.density_steps.is_empty() {
            None
        } else {
            Some(Arc::new(DensityAccumulatorHandle(DensityAccumulator::new(basis))))
        };
        let n = basis.grid().len();
        move || ProjectionSummary::new(layout.clone(), dens.clone(), n)
    }

    fn new(
        layout: Arc<SummaryLayout>,
        density_acc: Option<Arc<DensityAccumulatorHandle>>,
        n: usize,
    ) -> Self {
        let outs = layout.outputs.len();
        Self {
            yield_series: vec![0.0; outs],
            tracked_series: vec![vec![0.0; layout.tracked.len()]; outs],
            electron_occupation: vec![vec![0.0; n]; layout.spectrum_steps.len()],
            positron_occupation: vec![Vec::new(); layout.spectrum_steps.len()],
            densities: vec![vec![0.0; n]; layout.density_steps.len()],
            completeness_defect: 0.0,
            modes: 0,
            buffers: density_acc.as_ref().map(|d| d.0.buffers()),
            layout,
            density_acc,
        }
    }

    pub fn layout(&self) -> &SummaryLayout {
        &self.layout
    }

    pub fn spectrum(&self, grid: &SpatialGrid, i: usize) -> SpectrumSnapshot {
        let step = self.layout.spectrum_steps[i];
        let out = self.layout.outputs.binary_search(&step).expect("spectrum step is an output");
        SpectrumSnapshot::from_occupations(
            grid,
            self.layout.times[out],
            self.electron_occupation[i].clone(),
            self.positron_occupation[i].clone(),
        )
    }

    pub fn spectra(&self, grid: &SpatialGrid) -> Vec<SpectrumSnapshot> {
        (0..self.layout.spectrum_steps.len())
            .map(|i| self.spectrum(grid, i))
            .collect()
    }
}

impl RecordSink for ProjectionSummary {
    fn record(&mut self, rec: &ProjectionRecord) -> Result<()> {
        let out = self
            .layout
            .outputs
            .binary_search(&rec.step)
            .map_err(|_| Error::Invariant(format!("record at non-output step {}", rec.step)))?;
        if out == 0 {
            self.modes += 1;
        }
        let defect = (rec.completeness() - 1.0).abs();
        self.completeness_defect = self.completeness_defect.max(defect);
        if let Some(tol) = self.layout.completeness_tolerance {
            if !(defect <= tol) {
                return Err(Error::Invariant(format!(
                    "completeness of mode {} off by {defect:e} at t = {}",
                    rec.mode, rec.time
                )));
            }
        }
        self.yield_series[out] += rec.electron_weight();
        match self.layout.tracked_species {
            Species::Electron => {
                for (slot, &k) in self.tracked_series[out].iter_mut().zip(&self.layout.tracked) {
                    *slot += rec.electron[k].norm_sqr();
                }
            }
            Species::Positron => {
                for (slot, &k) in self.tracked_series[out].iter_mut().zip(&self.layout.tracked) {
                    if k == rec.mode {
                        *slot += rec.electron_weight();
                    }
                }
            }
        }
        if let Ok(i) = self.layout.spectrum_steps.binary_search(&rec.step) {
            let mut nn = 0.0;
            for (acc, u) in self.electron_occupation[i].iter_mut().zip(&rec.electron) {
                let w = u.norm_sqr();
                *acc += w;
                nn += w;
            }
            self.positron_occupation[i].push((rec.mode, nn));
        }
        if let Ok(i) = self.layout.density_steps.binary_search(&rec.step) {
            if let (Some(acc), Some(buf)) = (&self.density_acc, self.buffers.as_mut()) {
                acc.0.add(rec, &mut self.densities[i], buf);
            }
        }
        Ok(())
    }

    fn merge(&mut self, later: Self) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.yield_series, &later.yield_series);
        for (a, b) in self.tracked_series.iter_mut().zip(&later.tracked_series) {
            add(a, b);
        }
        for (a, b) in self.electron_occupation.iter_mut().zip(&later.electron_occupation) {
            add(a, b);
        }
        for (a, b) in self.positron_occupation.iter_mut().zip(later.positron_occupation) {
            a.extend(b);
        }
        for (a, b) in self.densities.iter_mut().zip(&later.densities) {
            add(a, b);
        }
        self.completeness_defect = self.completeness_defect.max(later.completeness_defect);
        self.modes += later.modes;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::constants::{C, C2};
    use crate::grid::build_grid;
    use crate::potentials::FieldSpec;
    use crate::propagator::{evolve_basis, RecordCollector};

    fn small_run(spec: &FieldSpec) -> (FreeBasis, Vec<ProjectionRecord>) {
        let g = build_grid(3.0, 1024).unwrap();
        let basis = build_basis(&g, Some(1.5 * C)).unwrap();
        let sched = Schedule::new(0.002, 100, 100).unwrap();
        let out: RecordCollector = evolve_basis(&basis, spec, &sched, RecordCollector::default).unwrap();
        let last: Vec<_> = out.records.into_iter().filter(|r| r.step == 100).collect();
        (basis, last)
    }

    #[test]
    fn vacuum_creates_nothing() {
        let (basis, recs) = small_run(&FieldSpec::vacuum());
        assert!(pair_number(&recs) < 1e-20);
        assert!(density(&recs, &basis).iter().all(|&r| r < 1e-20));
        for r in &recs {
            assert!((r.self_overlap().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_identities() {
        let spec = FieldSpec::new(2.5 * C2, 0.25 * C2, 0.075 / C, 0.2);
        let (basis, recs) = small_run(&spec);
        let g = basis.grid();
        let n = pair_number(&recs);
        assert!(n > 1e-4);
        let np = pair_number_p_major(&recs);
        assert!((n - np).abs() < 1e-12 * n);
        let snap = energy_spectrum(&recs, g).unwrap();
        assert!((snap.electron_total() - n).abs() < 1e-12 * n);
        assert!((snap.positron_total() - n).abs() < 1e-12 * n);
        let e_int = snap.electron_energy_integral() + snap.electron_rest();
        assert!((e_int - n).abs() < 1e-12 * n);
        let rest = snap.positron_occupation.iter().find(|(k, _)| *k == 0).map_or(0.0, |x| x.1);
        assert!((snap.positron_energy_integral() + rest - n).abs() < 1e-12 * n);
        assert!(snap.electrons.iter().all(|p| p.density >= 0.0));
        let rho = density(&recs, &basis);
        let integral: f64 = rho.iter().sum::<f64>() * g.dx();
        assert!((integral - n).abs() < 1e-8 * n.max(1.0));
    }

    #[test]
    fn symmetric_potential_gives_symmetric_momenta() {
        // V1 [S(x) - S(x + d)] is even about -d/2, a grid point when d = 64 dx.
        // The lone Nyquist mode has no mirror partner, so the steps are made
        // smooth enough that it stays empty.
        let g = build_grid(3.0, 1024).unwrap();
        let basis = build_basis(&g, None).unwrap();
        let d = 64.0 * g.dx();
        let even = FieldSpec::new(2.5 * C2, -2.5 * C2, 0.05, d);
        let sched = Schedule::new(0.001, 50, 50).unwrap();
        let out: RecordCollector = evolve_basis(&basis, &even, &sched, RecordCollector::default).unwrap();
        let last: Vec<_> = out.records.into_iter().filter(|r| r.step == 50).collect();
        let snap = energy_spectrum(&last, &g).unwrap();
        assert!(snap.electron_total() > 1e-6);
        for l in 1..256i64 {
            let a = snap.electron_occupation[g.index_of_label(l).unwrap()];
            let b = snap.electron_occupation[g.index_of_label(-l).unwrap()];
            assert!((a - b).abs() <= 1e-14 + 1e-9 * a.abs(), "{l}: {a} {b}");
        }
    }
}
