//! Sharp-step scattering results used as references for the simulator.

pub mod bound;
pub mod rates;
pub mod transmission;

pub use bound::{bound_state_condition, bound_state_levels, BoundStateSet};
pub use rates::{klein_rate, rate_integral, response_time};
pub use transmission::{
    double_step_regions, electron_klein_window, electron_regions, electron_transmission,
    tabulate_transmission, transfer_matrix_reflection, transfer_matrix_transmission,
    transmission_coefficient, transmission_params, write_transmission_csv, TransmissionParams,
    TransmissionRow,
};
