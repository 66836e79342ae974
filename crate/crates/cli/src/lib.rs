//! Job configs, subcommand dispatch and CSV/OBJ export for the `cmc` binary.

pub mod config;
pub mod export;
pub mod run;

pub use config::{ConfigError, JobConfig, Overrides};
pub use export::{parse_surface_csv, SurfaceCsv, Table};
pub use run::{run, run_config, Command, Report, RunError};
