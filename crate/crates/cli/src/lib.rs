//! Configuration, orchestration and reproducible output for qwalk
//! experiments.

pub mod config;
pub mod describe;
pub mod manifest;
pub mod run;

pub use config::{load, parse_str, ConfigError, ExperimentKind, Format, Overrides, RunConfig};
pub use describe::describe;
pub use manifest::{Manifest, Status};
pub use run::{run, RunError, RunResult, EXIT_CONFIG, EXIT_DIMENSION_CAP, EXIT_RUNTIME};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "QWALK_OUT_DIR";
