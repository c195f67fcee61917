//! File formats, reports and the `eprony` command line on top of
//! [`eprony_core`].

pub mod cli;
pub mod config;
pub mod report;
pub mod waveform;

pub use config::{AnalysisConfig, Method, SystemConfig};
pub use report::write_report;
pub use waveform::{load_waveforms, IngestError};
