use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::basis::FreeBasis;
use crate::constants::C2;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::observables::rate::{rate_series, RateSeries, RateTarget, Species};
use crate::observables::spectrum::{ProjectionSummary, SpectrumSnapshot, SummaryLayout};
use crate::oracle::{electron_transmission, tabulate_transmission, transmission_coefficient};
use crate::propagator::evolve_basis;
use crate::runner::config::RunConfig;

/// In-memory result of one configuration.
pub struct Simulation {
    pub config: RunConfig,
    pub grid: SpatialGrid,
    pub evolved_modes: usize,
    pub summary: ProjectionSummary,
    pub rate_target: Option<RateTarget>,
    pub rate: Option<RateSeries>,
    pub elapsed: Duration,
}

impl Simulation {
    pub fn times(&self) -> &[f64] {
        &self.summary.layout().times
    }

    /// `N(t)` at the last output.
    pub fn final_yield(&self) -> f64 {
        *self.summary.yield_series.last().unwrap_or(&0.0)
    }

    pub fn spectra(&self) -> Vec<SpectrumSnapshot> {
        self.summary.spectra(&self.grid)
    }
}

fn run_in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::param("workers", e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Evolves every windowed mode of `config` and reduces the projections.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    config.validate()?;
    let start = Instant::now();
    let grid = config.build_grid()?;
    let mut basis: FreeBasis = config.build_basis(&grid)?;
    let rate_target = config
        .observe
        .rate_energy_c2
        .map(|e| RateTarget::for_species(&grid, e * C2, config.observe.rate_selection, config.observe.rate_species))
        .transpose()?;
    let tracked = rate_target.as_ref().map_or_else(Vec::new, |t| t.indices.clone());
    if config.observe.rate_only {
        basis = basis.restricted_to(&tracked)?;
    }
    if config.observe.rate_species == Species::Positron {
        if let Some(&k) = tracked.iter().find(|k| !basis.evolved().contains(k)) {
            return Err(Error::Validation {
                field: "observe.window_c".into(),
                reason: format!("excludes the tracked sea mode {}", grid.momentum_label(k)),
            });
        }
    }
    let mut layout = SummaryLayout::new(
        &config.schedule,
        &config.observe.spectrum_times,
        &config.observe.density_times,
        tracked,
    );
    layout.tracked_species = config.observe.rate_species;
    let factory = ProjectionSummary::factory(layout, &basis);
    let summary = run_in_pool(config.workers, || {
        evolve_basis(&basis, &config.field, &config.schedule, factory)
    })??;
    let rate = match &rate_target {
        Some(t) => Some(rate_series(
            t,
            &summary.layout().times,
            &summary.tracked_series,
            config.observe.smoothing_strides,
        )?),
        None => None,
    };
    Ok(Simulation {
        config: config.clone(),
        evolved_modes: basis.evolved_count(),
        grid,
        summary,
        rate_target,
        rate,
        elapsed: start.elapsed(),
    })
}

/// Simulates `config` and, when requested, its no-control baseline.
pub fn simulate_with_baseline(config: &RunConfig) -> Result<(Simulation, Option<Simulation>)> {
    let main = simulate(config)?;
    let base = if config.observe.baseline {
        Some(simulate(&config.without_control())?)
    } else {
        None
    };
    Ok((main, base))
}

/// `# `-prefixed echo of the configuration.
///
/// The worker count is left out so that output does not depend on it.
pub fn config_header(config: &RunConfig) -> String {
    let mut out = String::new();
    let echoed = RunConfig {
        workers: None,
        ..config.clone()
    };
    for line in echoed.to_toml().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Yield CSV: `t,N`.
pub fn yield_csv(sim: &Simulation) -> String {
    let mut out = config_header(&sim.config);
    out.push_str("t,N\n");
    for (t, n) in sim.times().iter().zip(&sim.summary.yield_series) {
        let _ = writeln!(out, "{},{}", fmt(*t), fmt(*n));
    }
    out
}

/// Electron spectrum CSV: `E,N,N_norm,T_oracle` with `N_norm = N 2 pi / t`.
pub fn electron_spectrum_csv(sim: &Simulation, snap: &SpectrumSnapshot) -> String {
    let f = &sim.config.field;
    let v2 = f.control_amplitude(snap.time);
    let mut out = config_header(&sim.config);
    let _ = writeln!(out, "# t = {}", fmt(snap.time));
    out.push_str("E,N,N_norm,T_oracle\n");
    for p in &snap.electrons {
        let t = electron_transmission(p.energy, f.v1, v2, f.separation).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt(p.energy),
            fmt(p.density),
            fmt(p.normalized(snap.time)),
            fmt(t)
        );
    }
    out
}

/// Positron spectrum CSV over negative-mode energies, same columns.
pub fn positron_spectrum_csv(sim: &Simulation, snap: &SpectrumSnapshot) -> String {
    let f = &sim.config.field;
    let v2 = f.control_amplitude(snap.time);
    let mut out = config_header(&sim.config);
    let _ = writeln!(out, "# t = {}", fmt(snap.time));
    out.push_str("E,N,N_norm,T_oracle\n");
    for p in &snap.positrons {
        let t = transmission_coefficient(p.energy, f.v1, v2, f.separation).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt(p.energy),
            fmt(p.density),
            fmt(p.normalized(snap.time)),
            fmt(t)
        );
    }
    out
}

/// Rate CSV: `t,mu,f,baseline,N_level`.
pub fn rate_csv(sim: &Simulation, baseline: Option<&Simulation>) -> Option<String> {
    let rate = sim.rate.as_ref()?;
    let base = baseline.and_then(|b| b.rate.as_ref());
    let mut out = config_header(&sim.config);
    let species = sim.rate_target.as_ref().map_or(Species::Electron, |t| t.species);
    let _ = writeln!(out, "# species = {species:?}");
    let _ = writeln!(out, "# E_star = {}", fmt(rate.energy));
    let _ = writeln!(out, "# level_energy = {}", fmt(rate.level_energy));
    out.push_str("t,mu,f,baseline,N_level\n");
    for i in 0..rate.len() {
        let t = rate.times[i];
        let b = base.map_or(f64::NAN, |b| b.rate[i]);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt(t),
            fmt(rate.rate[i]),
            fmt(sim.config.field.envelope.value(t)),
            fmt(b),
            fmt(rate.level[i])
        );
    }
    Some(out)
}

/// Density CSV: `x,rho` for each requested time.
pub fn density_csv(sim: &Simulation, i: usize) -> String {
    let step = sim.summary.layout().density_steps[i];
    let mut out = config_header(&sim.config);
    let _ = writeln!(out, "# t = {}", fmt(sim.config.schedule.time(step)));
    out.push_str("x,rho\n");
    for (j, r) in sim.summary.densities[i].iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt(sim.grid.x(j)), fmt(*r));
    }
    out
}

/// Closed form versus transfer matrix over the Klein range, if non-empty.
pub fn oracle_csv(config: &RunConfig) -> Option<String> {
    let f = &config.field;
    let rows = tabulate_transmission(f.v1, f.v2 * f.envelope.value(0.0), f.separation, 200).ok()?;
    let mut buf = Vec::new();
    crate::oracle::write_transmission_csv(&mut buf, &rows).ok()?;
    Some(config_header(config) + &String::from_utf8(buf).ok()?)
}

/// Manifest written next to the data.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub name: Option<String>,
    pub version: String,
    pub wall_time_s: f64,
    pub evolved_modes: usize,
    pub completeness_defect: f64,
    pub final_yield: f64,
    pub extended_runtime: bool,
    pub tolerances: Vec<(String, f64)>,
    pub files: Vec<String>,
    pub config: String,
}

/// Extra manifest content supplied by presets.
#[derive(Debug, Clone, Default)]
pub struct ManifestExtras {
    pub extended_runtime: bool,
    pub tolerances: Vec<(String, f64)>,
}

/// Writes every artifact of a run (and its baseline) into `dir`.
pub fn write_artifacts(
    dir: &Path,
    sim: &Simulation,
    baseline: Option<&Simulation>,
    extras: &ManifestExtras,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(String, String)> = vec![("yield.csv".into(), yield_csv(sim))];
    for (i, snap) in sim.spectra().iter().enumerate() {
        files.push((format!("spectrum_electron_{i}.csv"), electron_spectrum_csv(sim, snap)));
        files.push((format!("spectrum_positron_{i}.csv"), positron_spectrum_csv(sim, snap)));
    }
    for i in 0..sim.summary.densities.len() {
        files.push((format!("density_{i}.csv"), density_csv(sim, i)));
    }
    if let Some(text) = rate_csv(sim, baseline) {
        files.push(("rate.csv".into(), text));
    }
    if let Some(b) = baseline {
        files.push(("baseline_yield.csv".into(), yield_csv(b)));
    }
    if let Some(text) = oracle_csv(&sim.config) {
        files.push(("oracle.csv".into(), text));
    }
    let mut written = Vec::new();
    for (name, text) in &files {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    let wall = sim.elapsed + baseline.map_or(Duration::ZERO, |b| b.elapsed);
    let manifest = Manifest {
        name: sim.config.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: wall.as_secs_f64(),
        evolved_modes: sim.evolved_modes,
        completeness_defect: sim.summary.completeness_defect,
        final_yield: sim.final_yield(),
        extended_runtime: extras.extended_runtime,
        tolerances: extras.tolerances.clone(),
        files: files.iter().map(|f| f.0.clone()).collect(),
        config: sim.config.to_toml(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serialises"))?;
    written.push(path);
    Ok(written)
}

/// Simulates `config` and writes its artifacts.
pub fn run(config: &RunConfig, dir: &Path, extras: &ManifestExtras) -> Result<Vec<PathBuf>> {
    let (sim, base) = simulate_with_baseline(config)?;
    write_artifacts(dir, &sim, base.as_ref(), extras)
}
