//! Versioned policy checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::export::{read_json, write_json};
use crate::policy::{Architecture, GaussianPolicy, PolicyParameters};

pub const CHECKPOINT_FORMAT: &str = "chemostat-rl-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a [`GaussianPolicy`] exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub sigma_floor: f64,
    pub obs_scale: Vec<f64>,
    /// Training seed the parameters descend from.
    pub seed: u64,
    /// Epoch whose batch these parameters generated, if any.
    pub epoch: Option<usize>,
    /// SHA-256 of the parameter values, see [`content_hash`].
    pub content_hash: String,
    pub values: Vec<f64>,
}

/// Hex SHA-256 over the little-endian bytes of each value.
pub fn content_hash(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl PolicyCheckpoint {
    pub fn new(policy: &GaussianPolicy, seed: u64, epoch: Option<usize>) -> Self {
        PolicyCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: policy.params.arch.clone(),
            sigma_floor: policy.sigma_floor,
            obs_scale: policy.obs_scale.clone(),
            seed,
            epoch,
            content_hash: content_hash(&policy.params.values),
            values: policy.params.values.clone(),
        }
    }

    /// Validate the header and rebuild the policy.
    pub fn into_policy(self) -> Result<GaussianPolicy> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let expected = self.architecture.n_params();
        if self.values.len() != expected {
            return Err(Error::Checkpoint(format!(
                "architecture needs {expected} parameters, file holds {}",
                self.values.len()
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        let hash = content_hash(&self.values);
        if hash != self.content_hash {
            return Err(Error::Checkpoint(format!(
                "content hash mismatch: header {}, values {hash}",
                self.content_hash
            )));
        }
        let params = PolicyParameters {
            arch: self.architecture,
            values: self.values,
        };
        GaussianPolicy::new(params, self.obs_scale, self.sigma_floor).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}
