//! Grid-world MDP over a radio map: four cardinal actions, boundary
//! clipping, and a reward that trades off progress to the goal, SINR and
//! handovers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radiomap::RadioMap;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("step called on a finished episode")]
    EpisodeDone,
}

/// Cardinal move, encoded 0-3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    East = 0,
    West = 1,
    North = 2,
    South = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::East, Action::West, Action::North, Action::South];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub start_cell: (usize, usize),
    pub goal_cell: (usize, usize),
    pub max_steps: usize,
    pub uav_speed_mps: f64,
    /// Added to the reward denominator so the terminal reward stays finite.
    pub reward_epsilon_m: f64,
}

impl EnvConfig {
    pub fn new(start_cell: (usize, usize), goal_cell: (usize, usize), max_steps: usize) -> Self {
        Self {
            start_cell,
            goal_cell,
            max_steps,
            uav_speed_mps: 10.0,
            reward_epsilon_m: 1.0,
        }
    }

    /// Default step budget: a generous multiple of the shortest path.
    pub fn default_max_steps(width: usize, height: usize) -> usize {
        4 * (width + height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalReason {
    Goal,
    StepLimit,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub position: (usize, usize),
    pub serving_gnb: u32,
    pub steps_taken: usize,
    pub done: bool,
    pub handovers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_observation: (usize, usize),
    pub reward: f64,
    pub sinr_db: f64,
    pub handover: bool,
    pub distance_to_goal_m: f64,
    pub done: bool,
    pub terminal_reason: TerminalReason,
}

/// The MDP. Owns its mutable episode state; the map is shared read-only.
#[derive(Debug, Clone)]
pub struct GridEnv {
    map: Arc<RadioMap>,
    config: EnvConfig,
    min_best_sinr_db: f64,
    state: EnvState,
}

impl GridEnv {
    pub fn new(map: Arc<RadioMap>, config: EnvConfig) -> Result<Self, EnvError> {
        if !map.in_range(config.start_cell.0, config.start_cell.1) {
            return Err(EnvError::InvalidConfig(format!(
                "start cell {:?} out of range",
                config.start_cell
            )));
        }
        if !map.in_range(config.goal_cell.0, config.goal_cell.1) {
            return Err(EnvError::InvalidConfig(format!(
                "goal cell {:?} out of range",
                config.goal_cell
            )));
        }
        if config.start_cell == config.goal_cell {
            return Err(EnvError::InvalidConfig("start equals goal".into()));
        }
        let manhattan = config.start_cell.0.abs_diff(config.goal_cell.0)
            + config.start_cell.1.abs_diff(config.goal_cell.1);
        if config.max_steps < manhattan {
            return Err(EnvError::InvalidConfig(format!(
                "max_steps {} below shortest path {manhattan}",
                config.max_steps
            )));
        }
        if config.reward_epsilon_m <= 0.0 {
            return Err(EnvError::InvalidConfig("reward_epsilon_m must be positive".into()));
        }
        let min_best_sinr_db = map.min_best_sinr_db();
        let mut env = Self {
            map,
            config,
            min_best_sinr_db,
            state: EnvState {
                position: (0, 0),
                serving_gnb: 0,
                steps_taken: 0,
                done: false,
                handovers: 0,
            },
        };
        env.reset();
        Ok(env)
    }

    pub fn map(&self) -> &Arc<RadioMap> {
        &self.map
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn reset(&mut self) -> EnvState {
        let (cx, cy) = self.config.start_cell;
        let info = self.map.cell_info(cx, cy).expect("start validated in range");
        self.state = EnvState {
            position: (cx, cy),
            serving_gnb: info.serving_gnb,
            steps_taken: 0,
            done: false,
            handovers: 0,
        };
        self.state.clone()
    }

    /// Shifted SINR term of the reward: best SINR minus the map-wide
    /// minimum plus one, so it is >= 1 everywhere and order-preserving.
    pub fn shifted_sinr(&self, best_sinr_db: f64) -> f64 {
        best_sinr_db - self.min_best_sinr_db + 1.0
    }

    /// Euclidean distance in meters from a cell center to the goal center.
    pub fn distance_to_goal_m(&self, cell: (usize, usize)) -> f64 {
        let (x, y) = self.map.cell_center_m(cell.0, cell.1);
        let (gx, gy) = self.map.cell_center_m(self.config.goal_cell.0, self.config.goal_cell.1);
        ((x - gx).powi(2) + (y - gy).powi(2)).sqrt()
    }

    /// Reward for arriving at a cell with the given handover flag.
    pub fn reward_at(&self, cell: (usize, usize), handover: bool) -> f64 {
        let info = self.map.cell_info(cell.0, cell.1).expect("cell in range");
        let mu = self.shifted_sinr(info.best_sinr_db);
        let d = self.distance_to_goal_m(cell);
        let rho = if handover { self.map.cell_size_m } else { 0.0 };
        mu / (d + rho + self.config.reward_epsilon_m)
    }

    /// Next position for an action, clipped at the grid boundary.
    pub fn next_position(&self, from: (usize, usize), action: Action) -> (usize, usize) {
        let (cx, cy) = from;
        match action {
            Action::East => ((cx + 1).min(self.map.width_cells - 1), cy),
            Action::West => (cx.saturating_sub(1), cy),
            Action::North => (cx, (cy + 1).min(self.map.height_cells - 1)),
            Action::South => (cx, cy.saturating_sub(1)),
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        if self.state.done {
            return Err(EnvError::EpisodeDone);
        }
        let next = self.next_position(self.state.position, action);
        let info = self.map.cell_info(next.0, next.1).expect("clipped in range");
        let handover = info.serving_gnb != self.state.serving_gnb;
        let reward = self.reward_at(next, handover);
        let distance = self.distance_to_goal_m(next);

        self.state.position = next;
        self.state.serving_gnb = info.serving_gnb;
        self.state.steps_taken += 1;
        if handover {
            self.state.handovers += 1;
        }

        let terminal_reason = if next == self.config.goal_cell {
            TerminalReason::Goal
        } else if self.state.steps_taken >= self.config.max_steps {
            TerminalReason::StepLimit
        } else {
            TerminalReason::None
        };
        self.state.done = terminal_reason != TerminalReason::None;

        Ok(StepOutcome {
            next_observation: next,
            reward,
            sinr_db: info.best_sinr_db,
            handover,
            distance_to_goal_m: distance,
            done: self.state.done,
            terminal_reason,
        })
    }

    /// Normalized (x, y) in [0,1]^2 fed to the networks.
    pub fn observation_encoding(&self, position: (usize, usize)) -> [f64; 2] {
        encode_observation(position, self.map.width_cells, self.map.height_cells)
    }
}

pub fn encode_observation(position: (usize, usize), width: usize, height: usize) -> [f64; 2] {
    let nx = if width > 1 {
        position.0 as f64 / (width - 1) as f64
    } else {
        0.0
    };
    let ny = if height > 1 {
        position.1 as f64 / (height - 1) as f64
    } else {
        0.0
    };
    [nx, ny]
}
