// SPDX-License-Identifier: Apache-2.0

//! Pipeline configuration: one JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use ceff_core::netgen::{GenSpec, TechProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Threshold fractions applied to every driver when set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vhi: Option<f64>,
}

impl DriverOverrides {
    pub fn is_empty(&self) -> bool {
        self.vlo.is_none() && self.vhi.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Technology profile file; the built-in profile when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tech: Option<PathBuf>,
    pub gen: GenSpec,
    pub driver: DriverOverrides,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn tech_profile(&self) -> Result<TechProfile, CliError> {
        let tech = match &self.tech {
            None => TechProfile::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
            }
        };
        tech.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(tech)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1).max(1)
    }

    /// SHA-256 of the effective configuration's JSON form. The worker count
    /// does not change any artifact and is left out.
    pub fn hash(&self) -> String {
        let hashed = Self { workers: None, ..self.clone() };
        let bytes = serde_json::to_vec(&hashed).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
