//! Experiment driver for `ssep-core`: configuration, the experiment
//! runners and deterministic CSV / plot-data output.

pub mod config;
pub mod emit;
pub mod error;
pub mod runs;

pub use config::{Experiment, ExperimentConfig, Overrides, TvMethod};
pub use emit::{emit, Format, ResultRow, CSV_HEADER};
pub use error::{ExpError, Result};
pub use runs::{run, Report};
