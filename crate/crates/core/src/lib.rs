//! Estimation toolkit for exponential-Lévy jump-diffusions observed on a
//! fixed time grid.
//!
//! The pipeline runs in the following order:
//!
//! 1. [`ingest`] loads level series from CSV and turns them into log-returns.
//! 2. [`ecf`] evaluates the empirical characteristic function and its
//!    continuously unwrapped logarithm.
//! 3. [`spectral`] fits drift, volatility and jump intensity by weighted least
//!    squares on the log-ECF; [`tune`] searches the frequency cutoffs.
//! 4. [`deconv`] recovers the jump-size density by flat-top Fourier inversion.
//! 5. [`jumps`] classifies observation intervals into jump / no-jump.
//! 6. [`pricefit`] fits the two-part price model on the induced sample split.
//!
//! [`simulate`] generates synthetic increments for all of the above, [`stats`]
//! holds the test statistics used in diagnostics and [`pipeline`] wires the
//! stages together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deconv;
pub mod ecf;
pub mod error;
pub mod ingest;
pub mod io;
pub mod jumps;
pub mod kde;
pub mod pipeline;
pub mod pricefit;
pub mod simulate;
pub mod spectral;
pub mod stats;
pub mod tune;

pub use deconv::{density_mse, estimate_density, kernel, DensityEstimate, FlatTopKernel};
pub use ecf::{ecf, log_ecf, CharacteristicExponent, EcfGrid, EmpiricalExponent, LevyExponent};
pub use error::{Error, ErrorCategory, Result};
pub use ingest::{align, load_csv, log_returns, AlignedPair, RawSeries, ReturnSeries};
pub use jumps::{build_mixture, classify, find_thresholds, JumpClassification, MixtureDensities};
pub use pricefit::{fit_continuous, fit_jump_part, simulate_price, PriceModelFit};
pub use simulate::{
    sample_jump, simulate_brownian_baseline, simulate_increments, JumpLaw, LevyParams,
};
pub use spectral::{SpectralConfig, SpectralEstimate};
pub use stats::TestResult;

pub use num_complex::Complex64;
