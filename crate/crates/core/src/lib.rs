pub mod conditional;
pub mod counterexample;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod inequalities;
pub mod invariance;
pub mod processes;
pub mod martingale;
pub mod moments;
pub mod output;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
