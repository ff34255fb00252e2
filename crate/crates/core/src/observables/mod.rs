//! Bogoliubov projections and everything derived from them: pair yield,
//! momentum and energy spectra, density, pair-creation rate and the decoding
//! of temporal information carried by the rate.

pub mod decode;
pub mod projection;
pub mod rate;
pub mod spectrum;

pub use decode::{
    estimate_period, estimate_period_of, measure_interval, measure_interval_of, measure_response_time,
    oscillation_amplitude, spectrum_peaks, DecodeOptions,
};
pub use projection::{project, ProjectionRecord, Projector};
pub use rate::{rate_series, EnergySelection, Species, RateSeries, RateTarget};
pub use spectrum::{
    density, energy_spectrum, pair_number, pair_number_p_major, ProjectionSummary, SpectrumPoint,
    SpectrumSnapshot, SummaryLayout,
};
