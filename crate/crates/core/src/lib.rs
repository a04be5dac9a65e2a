//! Synthesis of noisy, reverberant two-speaker mixture corpora and SI-SDR
//! based evaluation of separation and enhancement cascades.

pub mod audio;
pub mod cascade;
pub mod error;
pub mod metrics;
pub mod mix;
pub mod room;

pub use error::{Error, Result};
