//! Bayesian spatio-temporal models for log intensities: harmonic regression
//! with a Leroux CAR, AR(1)-in-time random effect and optional
//! Dirichlet-process clustering of the harmonic coefficients.

pub mod archive;
pub mod config;
pub(crate) mod field;
pub mod gibbs;
pub mod harmonic;
pub mod leroux;
pub mod predict;
pub mod simulate;

pub use archive::{read_archive, write_archive};
pub use config::{BnpConfig, Hyperparams, McmcConfig, ModelConfig, Variant};
pub use gibbs::{gibbs_run, gibbs_run_with_basis, Acceptance, FittedModel, PosteriorDraw};
pub use harmonic::{periodogram, top_frequencies, HarmonicDesign};
pub use leroux::{leroux_precision, LerouxPrecision, SpatialBasis};
pub use predict::{cumulative_log_bayes_factor, draw_log_density, lpds, predictive_draws};
pub use simulate::{simulate_panel, TrueParams};
