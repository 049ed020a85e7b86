//! Experiment pipeline around `secrecy-core`: seeded channel draws, power
//! sweeps, Γ-surface scans, CSV/manifest output and the self-test runner.

pub mod config;
pub mod io;
pub mod scan;
pub mod selftest;
pub mod sweep;

pub use config::{gen_channels, ExperimentConfig, Mode, TrialChannels};
pub use scan::{scan_surface, ScanResult};
pub use sweep::{sweep, SweepOutput};
