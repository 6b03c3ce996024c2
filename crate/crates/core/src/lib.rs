//! Occupancy counts in the uniform multinomial urn model: moments, exact laws,
//! a size-bias coupling and numerical checks of the quantities that control
//! normal approximation of the count.

pub mod coupling;
pub mod error;
pub mod exact;
pub mod model;
pub mod params;
pub mod rng;
pub mod scan;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{OccupancyError, Result};
pub use exact::{exact_moments, exact_pmf, kolmogorov_distance, size_biased_pmf, ExactPmf, KolmogorovReport, PmfMode, RationalBudget};
pub use params::OccupancyParams;
