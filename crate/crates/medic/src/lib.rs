//! File formats, reports and the command line around `medic-core`.

pub mod config;
pub mod dataset;
pub mod logs;
pub mod model_file;
pub mod report;

pub use config::{load_config, ConfigOverrides};
pub use dataset::{load_dataset, load_dataset_with_schema, load_schema_spec, write_dataset};
pub use model_file::{ModelFile, FORMAT_VERSION};

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unreadable or malformed input (exit code 2).
    Input(anyhow::Error),
    /// Anything that goes wrong once inputs are accepted (exit code 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Runtime(e) => e,
        }
    }
}

/// Wraps errors as input failures.
pub trait InputContext<T> {
    fn input(self) -> Result<T, Failure>;
}

/// Wraps errors as runtime failures.
pub trait RuntimeContext<T> {
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

impl<T, E: Into<anyhow::Error>> RuntimeContext<T> for Result<T, E> {
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}
