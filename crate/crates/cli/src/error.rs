// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 for invalid input, 3 for numeric failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<ceff_core::rc::RcError> for CliError {
    fn from(e: ceff_core::rc::RcError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ceff_core::netgen::GenError> for CliError {
    fn from(e: ceff_core::netgen::GenError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ceff_core::metrics::MetricsError> for CliError {
    fn from(e: ceff_core::metrics::MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ceff_core::graph::GraphError> for CliError {
    fn from(e: ceff_core::graph::GraphError) -> Self {
        use ceff_core::graph::GraphError;
        match e {
            GraphError::Io(source) => CliError::Io { path: "<graph stream>".into(), source },
            GraphError::OutOfRangeLabel { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ceff_core::gat::BundleError> for CliError {
    fn from(e: ceff_core::gat::BundleError) -> Self {
        use ceff_core::gat::BundleError;
        match e {
            BundleError::Io(source) => CliError::Io { path: "<bundle>".into(), source },
            other => CliError::Validation(other.to_string()),
        }
    }
}
