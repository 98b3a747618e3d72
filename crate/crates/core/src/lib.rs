//! UAV trajectory optimization over mmWave radio maps.
//!
//! A grid-world MDP whose reward trades off progress to a destination,
//! serving-cell SINR and handovers, trained with a double actor-critic
//! learner and a double-DQN baseline. Maps come from a CSV export or a
//! synthetic free-space generator with shadow regions.

pub mod ac;
pub mod checkpoint;
pub mod ddqn;
pub mod env;
pub mod eval;
pub mod nn;
pub mod radiomap;
pub mod replay;
pub mod rng;

use thiserror::Error;

pub use ac::{train_ac, AcAgent, AcHyperparams, AcTrainResult, EpisodeStats, SelectMode};
pub use checkpoint::{load_checkpoint, save_checkpoint, AgentCheckpoint};
pub use ddqn::{train_ddqn, DdqnAgent, DdqnHyperparams, DdqnTrainResult};
pub use env::{Action, EnvConfig, EnvError, GridEnv, StepOutcome, TerminalReason};
pub use eval::{
    compute_metrics, export_artifacts, rollout_distance_baseline, rollout_greedy, EpisodeTrace,
    GreedyPolicy, TrajectoryMetrics,
};
pub use nn::{soft_update, AdamConfig, Mlp, MlpSpec, NetError, OutputHead};
pub use radiomap::{
    compute_sinr_db, generate_synthetic_map, load_map, noise_power_dbm, save_map, CellRadioInfo,
    GnbSite, MapError, MapGenConfig, RadioMap, ShadowRegion,
};
pub use replay::{ReplayBuffer, Transition};
pub use rng::SeededRng;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("training aborted at episode {episode}, step {step}: {source}")]
    TrainingAborted {
        episode: usize,
        step: usize,
        source: Box<AgentError>,
    },
}
