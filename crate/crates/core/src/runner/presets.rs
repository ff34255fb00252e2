use std::path::Path;

use crate::constants::{C, C2};
use crate::error::{Error, Result};
use crate::observables::rate::Species;
use crate::potentials::{Closure, Envelope, FieldSpec};
use crate::propagator::Schedule;
use crate::runner::config::{GridConfig, ObserveConfig, RunConfig};
use crate::runner::run::{run, ManifestExtras};

/// One simulation within a preset.
#[derive(Debug, Clone)]
pub struct PresetRun {
    pub label: String,
    pub config: RunConfig,
}

/// A named group of runs reproducing one figure.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub description: String,
    /// Paper-scale presets take hours and are only run on request.
    pub extended: bool,
    pub runs: Vec<PresetRun>,
    pub tolerances: Vec<(String, f64)>,
}

impl Preset {
    pub fn extras(&self) -> ManifestExtras {
        ManifestExtras {
            extended_runtime: self.extended,
            tolerances: self.tolerances.clone(),
        }
    }

    /// Runs every member into `dir/<label>`.
    pub fn run(&self, dir: &Path) -> Result<()> {
        for r in &self.runs {
            run(&r.config, &dir.join(&r.label), &self.extras())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    length: f64,
    points: usize,
    steps: usize,
    window_c: Option<f64>,
    extended: bool,
}

const T_MAX: f64 = 0.03;
const SEPARATION: f64 = 0.2;

const PAPER: Scale = Scale {
    length: 12.0,
    points: 8192,
    steps: 6000,
    window_c: None,
    extended: true,
};

const DESK: Scale = Scale {
    length: 6.0,
    points: 2048,
    steps: 1500,
    window_c: Some(8.0),
    extended: false,
};

/// Rate runs need a longer box: at `L = 6` the closure step sits close
/// enough to distort the tracked sea modes. Only the tracked modes evolve.
const DESK_RATE: Scale = Scale {
    length: 12.0,
    points: 2048,
    steps: 1500,
    window_c: Some(8.0),
    extended: false,
};

/// Figure names; each exists as `figN` (paper scale) and `deskN`.
const FIGURES: [&str; 9] = ["2", "3", "4", "5", "6", "7a", "7b", "7c", "7d"];

/// Every preset name.
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = FIGURES.iter().map(|f| format!("fig{f}")).collect();
    names.extend(FIGURES.iter().map(|f| format!("desk{f}")));
    names
}

fn base_field(scale: Scale, v2: f64) -> FieldSpec {
    FieldSpec::new(2.5 * C2, v2, 0.075 / C, SEPARATION).with_closure(Some(Closure::for_box(scale.length)))
}

fn config(scale: Scale, name: &str, field: FieldSpec, stride: usize, observe: ObserveConfig) -> RunConfig {
    RunConfig {
        name: Some(name.to_string()),
        output: None,
        workers: None,
        grid: GridConfig {
            length: scale.length,
            points: scale.points,
        },
        schedule: Schedule {
            t_max: T_MAX,
            steps: scale.steps,
            stride,
        },
        field,
        observe: ObserveConfig {
            window_c: scale.window_c,
            ..observe
        },
    }
}

fn spectra_at(times: &[f64]) -> ObserveConfig {
    ObserveConfig {
        spectrum_times: times.to_vec(),
        ..Default::default()
    }
}

fn tolerances(items: &[(&str, f64)]) -> Vec<(String, f64)> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn build(figure: &str, scale: Scale) -> Option<(String, Vec<PresetRun>, Vec<(String, f64)>)> {
    // output every 1e-4 a.u. for rates, every 3e-4 a.u. otherwise
    let fine = scale.steps / 300;
    let coarse = scale.steps / 100;
    let item = |label: &str, field: FieldSpec, stride: usize, observe: ObserveConfig| PresetRun {
        label: label.to_string(),
        config: config(scale, label, field, stride, observe),
    };
    let spectra = spectra_at(&[0.024, T_MAX]);
    Some(match figure {
        "2" => (
            "Electron and positron spectra for a control field parallel to the supercritical step".into(),
            vec![item(
                "same",
                base_field(scale, 0.25 * C2),
                coarse,
                ObserveConfig {
                    density_times: vec![T_MAX],
                    ..spectra
                },
            )],
            tolerances(&[("spectrum_rel", 0.15), ("norm_drift", 1e-10), ("completeness", 1e-8)]),
        ),
        "3" => (
            "Spectra for a control field opposing the supercritical step".into(),
            vec![item(
                "opposite",
                base_field(scale, -0.25 * C2),
                coarse,
                ObserveConfig {
                    density_times: vec![T_MAX],
                    ..spectra
                },
            )],
            tolerances(&[("bound_peak_count", 2.0)]),
        ),
        "4" => {
            let sine = |omega: f64| Envelope::Sinusoid {
                omega,
                phase: 0.0,
                sign: 1.0,
            };
            (
                "Pair yield against time for static and oscillating control fields".into(),
                vec![
                    item("none", base_field(scale, 0.0), coarse, ObserveConfig::default()),
                    item("same", base_field(scale, 0.25 * C2), coarse, ObserveConfig::default()),
                    item("opposite", base_field(scale, -0.25 * C2), coarse, ObserveConfig::default()),
                    item(
                        "omega_0.011",
                        base_field(scale, 0.25 * C2).with_envelope(sine(0.011 * C2)),
                        coarse,
                        ObserveConfig::default(),
                    ),
                    item(
                        "omega_2",
                        base_field(scale, 0.25 * C2).with_envelope(sine(2.0 * C2)),
                        coarse,
                        ObserveConfig::default(),
                    ),
                ],
                tolerances(&[("same_vs_none_rel", 0.02)]),
            )
        }
        "5" => (
            "Spectra for several control-field widths".into(),
            [("w_0.3", 0.3), ("w_0.6", 0.6), ("w_1", 1.0), ("w_10", 10.0)]
                .iter()
                .map(|&(label, w)| {
                    item(
                        label,
                        base_field(scale, 0.25 * C2).with_control_width(w / C),
                        coarse,
                        spectra_at(&[T_MAX]),
                    )
                })
                .collect(),
            tolerances(&[("yield_spread_rel", 0.02)]),
        ),
        "6" => (
            "Electron spectra for oscillating control fields".into(),
            [
                ("omega_0", 0.0, std::f64::consts::FRAC_PI_2),
                ("omega_0.011", 0.011, 0.0),
                ("omega_0.1", 0.1, 0.0),
                ("omega_0.5", 0.5, 0.0),
                ("omega_1", 1.0, 0.0),
                ("omega_2", 2.0, 0.0),
            ]
            .iter()
            .map(|&(label, w, phase)| {
                let env = Envelope::Sinusoid {
                    omega: w * C2,
                    phase,
                    sign: 1.0,
                };
                item(
                    label,
                    base_field(scale, 0.25 * C2).with_envelope(env),
                    coarse,
                    spectra_at(&[T_MAX]),
                )
            })
            .collect(),
            Vec::new(),
        ),
        "7a" | "7b" | "7c" | "7d" => {
            let env = match figure {
                "7a" => Envelope::negative_sine(0.1 * C2),
                "7b" => Envelope::gauss_modulated_sine(0.1 * C2, 0.005),
                "7c" => Envelope::identical_pulses(0.001),
                _ => Envelope::alternating_pulses(0.002),
            };
            let observe = ObserveConfig {
                rate_energy_c2: Some(1.25),
                rate_species: Species::Positron,
                rate_only: true,
                baseline: true,
                ..Default::default()
            };
            (
                "Pair-creation rate at E = 1.25 c^2 under an encoded control field".into(),
                vec![item("rate", base_field(scale, 0.25 * C2).with_envelope(env), fine, observe)],
                tolerances(&[
                    ("response_time_min", 2.0e-3),
                    ("response_time_max", 2.7e-3),
                    ("period_rel", 0.06),
                    ("interval_rel", 0.06),
                ]),
            )
        }
        _ => return None,
    })
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    let (figure, scale) = if let Some(f) = name.strip_prefix("fig") {
        (f, PAPER)
    } else if let Some(f) = name.strip_prefix("desk") {
        (f, if f.starts_with('7') { DESK_RATE } else { DESK })
    } else {
        return Err(unknown(name));
    };
    let (description, runs, tolerances) = build(figure, scale).ok_or_else(|| unknown(name))?;
    let runs = runs
        .into_iter()
        .map(|mut r| {
            r.config.name = Some(format!("{name}-{}", r.label));
            r
        })
        .collect();
    Ok(Preset {
        name: name.to_string(),
        description,
        extended: scale.extended,
        runs,
        tolerances,
    })
}

fn unknown(name: &str) -> Error {
    Error::UnknownPreset(name.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            let p = preset(&name).unwrap();
            assert!(!p.runs.is_empty(), "{name}");
            assert_eq!(p.extended, name.starts_with("fig"));
            for r in &p.runs {
                r.config.validate().unwrap();
            }
        }
    }

    #[test]
    fn paper_scale_parameters() {
        let p = preset("fig2").unwrap();
        let c = &p.runs[0].config;
        assert_eq!((c.grid.length, c.grid.points, c.schedule.steps), (12.0, 8192, 6000));
        assert_eq!(c.schedule.t_max, 0.03);
        assert_eq!(c.field.v1, 2.5 * C2);
        assert_eq!(c.field.v2, 0.25 * C2);
        assert_eq!(c.field.separation, 0.2);
        assert_eq!(c.field.width, 0.075 / C);
        assert!(c.observe.window_c.is_none());
    }

    #[test]
    fn desk_scale_is_reduced() {
        for name in preset_names().into_iter().filter(|n| n.starts_with("desk")) {
            for r in preset(&name).unwrap().runs {
                assert!(r.config.grid.points <= 2048);
                assert!(r.config.observe.window_c.unwrap() <= 8.0);
            }
        }
    }

    #[test]
    fn figure_members() {
        let labels = |n: &str| preset(n).unwrap().runs.into_iter().map(|r| r.label).collect::<Vec<_>>();
        assert_eq!(labels("fig4"), ["none", "same", "opposite", "omega_0.011", "omega_2"]);
        assert_eq!(labels("fig5"), ["w_0.3", "w_0.6", "w_1", "w_10"]);
        assert_eq!(labels("fig6").len(), 6);
        let rate = &preset("desk7c").unwrap().runs[0].config;
        assert!(rate.observe.baseline);
        assert_eq!(rate.observe.rate_species, Species::Positron);
        assert_eq!(rate.grid.length, 12.0);
        assert_eq!(rate.schedule.stride, 5);
    }

    #[test]
    fn unknown_name() {
        assert!(preset("fig9").is_err());
        assert!(preset("nonsense").is_err());
    }

    #[test]
    fn presets_round_trip_through_text() {
        for name in preset_names() {
            for r in preset(&name).unwrap().runs {
                let text = r.config.to_toml();
                assert_eq!(crate::runner::parse_config(&text).unwrap(), r.config);
            }
        }
    }
}
