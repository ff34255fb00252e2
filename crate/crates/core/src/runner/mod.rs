//! Configuration, presets, file output, validation and decoding.

pub mod config;
pub mod decode;
pub mod presets;
pub mod run;
pub mod validate;

pub use config::{parse_config, serialize_config, GridConfig, ObserveConfig, RunConfig};
pub use run::{run, simulate, simulate_with_baseline, write_artifacts, ManifestExtras, Simulation};
pub use decode::{decode_csv, decode_rate, parse_rate_csv, Comparison, DecodedReport, RateTable};
pub use presets::{preset, preset_names, Preset, PresetRun};
pub use validate::{validate, Check, ValidateOptions, ValidationReport};
