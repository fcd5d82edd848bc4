//! Backward recursion for the characterizing process `Y`, its closed forms,
//! and the quadratic value function.

pub mod closed_form;
pub mod recursion;
pub mod value;

pub use closed_form::{compute_z_closed_form, compute_z_recursive, two_period_y};
pub use recursion::{compute_y, compute_y_pimi, local_moments, pimi_map, LocalMoments, YField, YMode, DENOMINATOR_GUARD};
pub use value::{quad_coeffs, value_function, y_upper_bound, QuadCoeffs};
