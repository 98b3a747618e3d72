//! Versioned agent checkpoints: networks, hyperparameters and RNG state as
//! JSON. JSON floats use shortest round-trip formatting, so save/load is
//! bit-exact on finite parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ac::AcAgent;
use crate::ddqn::DdqnAgent;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint decode error: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "agent", rename_all = "lowercase")]
pub enum AgentCheckpoint {
    Ac(AcAgent),
    Ddqn(DdqnAgent),
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    version: u32,
    #[serde(flatten)]
    agent: AgentCheckpoint,
}

pub fn save_checkpoint(agent: &AgentCheckpoint, path: &Path) -> Result<(), CheckpointError> {
    let envelope = Envelope {
        version: CHECKPOINT_VERSION,
        agent: agent.clone(),
    };
    let json = serde_json::to_string(&envelope)?;
    std::fs::write(path, json).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<AgentCheckpoint, CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let envelope: Envelope = serde_json::from_str(&text)?;
    if envelope.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(envelope.version));
    }
    Ok(envelope.agent)
}
