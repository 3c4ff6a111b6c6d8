//! Bayesian spatio-temporal forecasting of gridded intensities with
//! posterior predictive verification of STREL properties.

pub mod assess;
pub mod bayes;
pub mod error;
pub mod par;
pub mod pipeline;
pub mod spatial;
pub mod strel;

pub use error::{Error, Result};
pub use spatial::{GridSpec, Panel, SpatialGrid, StaticLabels, Trace};
