//! Gaussian band matrices with a variance profile, their empirical spectra
//! and the semicircular moment predictor.

mod predict;
mod profile;
mod sample;
mod stats;

pub use predict::{
    corollary_criterion, predict_moments, predict_moments_on_grid, CriterionReport, KernelModel, Prediction,
    DEFAULT_GRID, MAX_PREDICT_ORDER, REFINEMENT_TOLERANCE,
};
pub use profile::{CellGrid, VarianceProfile};
pub use sample::{empirical_spectrum, sample_band_matrix, SpectralSample, MOMENT_ORDERS};
pub use stats::{semicircle_cdf, semicircle_distance, Histogram};
