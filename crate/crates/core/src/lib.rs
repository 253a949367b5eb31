//! Confidence bands for the periodic means of periodically correlated time
//! series.
//!
//! The pipeline isolates one periodic component at a time with a KZFT
//! bandpass filter (an iterated moving average applied to the demodulated
//! series), then resamples whole phase-aligned cycles of the isolated
//! component to build percentile bands for its periodic mean (VBPBB). The
//! generalized seasonal block bootstrap (GSBB) over the unfiltered series
//! serves as the comparison baseline.
//!
//! Modules:
//! - [`series`]: daily time-series container, CSV ingestion, rate
//!   conversion, synthetic generation
//! - [`spectral`]: KZFT filtering, bandpass reconstruction, periodogram
//! - [`resample`]: GSBB and PBB engines, percentile bands, significance
//! - [`analysis`]: end-to-end pipelines, combination, R², width ratios

pub mod analysis;
pub mod error;
pub mod resample;
pub mod series;
pub mod spectral;

pub use error::{Error, Result};
