//! Double actor-critic learner: softmax actor, Q-value critic and a slowly
//! tracking target critic, updated online from single-step TD errors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, GridEnv, TerminalReason};
use crate::nn::{soft_update, AdamConfig, Mlp, MlpSpec, OutputHead};
use crate::rng::SeededRng;
use crate::AgentError;

pub const OBS_DIM: usize = 2;
pub const NUM_ACTIONS: usize = 4;

/// Global-norm gradient clip applied before every Adam step.
pub const GRAD_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcHyperparams {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Eq-8 style blend coefficient: target = tau*target + (1-tau)*critic.
    pub target_tau: f64,
    pub target_update_every: usize,
    pub episodes: usize,
    /// Adam denominator epsilon for both actor and critic updates. The
    /// optimizer default (1e-8) renormalises every update to the learning
    /// rate, which erases TD-error magnitudes and keeps injecting lr-sized
    /// noise after convergence. A larger epsilon lets small TD errors make
    /// small steps, so the policy settles once the critic fits.
    pub adam_eps: f64,
    /// Constant added to the critic's output biases at construction. Rewards
    /// here are strictly positive, so a zero-initialised critic makes every
    /// early TD error positive and the softmax actor collapses onto whichever
    /// action was sampled most. Starting the critic slightly above the typical
    /// per-step reward keeps ordinary steps near-neutral while goal arrivals
    /// stay strongly reinforced.
    pub critic_optimism: f64,
}

impl Default for AcHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.96,
            actor_lr: 0.001,
            critic_lr: 0.003,
            target_tau: 0.99,
            target_update_every: 1,
            episodes: 2000,
            adam_eps: 1e-2,
            critic_optimism: 2.0,
        }
    }
}

impl AcHyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AgentError::InvalidHyperparams("gamma must be in (0,1)".into()));
        }
        if self.actor_lr <= 0.0 || self.critic_lr <= 0.0 {
            return Err(AgentError::InvalidHyperparams("learning rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.target_tau) {
            return Err(AgentError::InvalidHyperparams("target_tau must be in [0,1]".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(AgentError::InvalidHyperparams("adam_eps must be positive".into()));
        }
        if !self.critic_optimism.is_finite() || self.critic_optimism < 0.0 {
            return Err(AgentError::InvalidHyperparams(
                "critic_optimism must be finite and non-negative".into(),
            ));
        }
        if self.target_update_every == 0 || self.episodes == 0 {
            return Err(AgentError::InvalidHyperparams(
                "target_update_every and episodes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One on-policy transition, with the next action already chosen (the
/// bootstrap uses Q(s', a'), not a max).
#[derive(Debug, Clone, Copy)]
pub struct AcTransition {
    pub obs: [f64; 2],
    pub action: Action,
    pub reward: f64,
    pub next_obs: [f64; 2],
    pub next_action: Action,
    pub done: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AcDiagnostics {
    pub eta: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcAgent {
    actor: Mlp,
    critic: Mlp,
    target_critic: Mlp,
    pub hyperparams: AcHyperparams,
    rng: SeededRng,
    update_count: u64,
}

impl AcAgent {
    pub fn new(hyperparams: AcHyperparams, seed: u64) -> Result<Self, AgentError> {
        hyperparams.validate()?;
        let mut init_rng = SeededRng::substream(seed, "init");
        let mut actor = Mlp::new(
            MlpSpec::standard(OBS_DIM, NUM_ACTIONS, OutputHead::Softmax),
            &mut init_rng,
        );
        let mut critic = Mlp::new(
            MlpSpec::standard(OBS_DIM, NUM_ACTIONS, OutputHead::Linear),
            &mut init_rng,
        );
        // Zeroed heads start the policy exactly uniform and the critic exactly
        // at the optimism constant, so no state or action is starved of
        // exploration by init noise.
        actor.zero_output_layer();
        critic.zero_output_layer();
        if hyperparams.critic_optimism != 0.0 {
            let mut params = critic.parameters_flat();
            let n = params.len();
            for b in &mut params[n - NUM_ACTIONS..] {
                *b += hyperparams.critic_optimism;
            }
            critic.set_parameters_flat(&params);
        }
        let target_critic = critic.clone();
        Ok(Self {
            actor,
            critic,
            target_critic,
            hyperparams,
            rng: SeededRng::substream(seed, "exploration"),
            update_count: 0,
        })
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn target_critic(&self) -> &Mlp {
        &self.target_critic
    }

    fn adam_config(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            eps: self.hyperparams.adam_eps,
            ..AdamConfig::new(lr)
        }
    }

    pub fn action_probabilities(&self, obs: &[f64; 2]) -> Vec<f64> {
        self.actor.forward(obs).expect("actor input dim")
    }

    pub fn select_action(&mut self, obs: &[f64; 2], mode: SelectMode) -> Action {
        let probs = self.action_probabilities(obs);
        match mode {
            SelectMode::Greedy => greedy_argmax(&probs),
            SelectMode::Sample => {
                let draw: f64 = self.rng.random_range(0.0..1.0);
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        return Action::from_index(i).unwrap();
                    }
                }
                Action::South
            }
        }
    }

    /// Eq-5 style TD error with the bootstrap zeroed at terminals.
    pub fn td_error(&self, t: &AcTransition) -> f64 {
        let q_sa = self.critic.forward(&t.obs).expect("critic input dim")[t.action.index()];
        let bootstrap = if t.done {
            0.0
        } else {
            self.target_critic.forward(&t.next_obs).expect("critic input dim")
                [t.next_action.index()]
        };
        t.reward + self.hyperparams.gamma * bootstrap - q_sa
    }

    /// Apply one actor + critic update for a precomputed TD error.
    pub fn apply_update(&mut self, t: &AcTransition, eta: f64) -> Result<AcDiagnostics, AgentError> {
        if !eta.is_finite() {
            return Err(AgentError::NonFinite("TD error".into()));
        }
        // Critic: squared TD loss; d(eta^2)/dQ(s,a) = -2*eta.
        let mut critic_grad = vec![0.0; NUM_ACTIONS];
        critic_grad[t.action.index()] = -2.0 * eta;
        let mut grads = self.critic.backward(&t.obs, &critic_grad)?;
        grads.clip_global_norm(GRAD_CLIP_NORM);
        self.critic
            .adam_step(&grads, &self.adam_config(self.hyperparams.critic_lr))?;

        // Actor: loss -eta*ln pi(a|s), eta held constant;
        // d/dpi(a) = -eta / pi(a).
        let probs = self.action_probabilities(&t.obs);
        let p_a = probs[t.action.index()].max(1e-12);
        let mut actor_grad = vec![0.0; NUM_ACTIONS];
        actor_grad[t.action.index()] = -eta / p_a;
        let mut grads = self.actor.backward(&t.obs, &actor_grad)?;
        grads.clip_global_norm(GRAD_CLIP_NORM);
        self.actor
            .adam_step(&grads, &self.adam_config(self.hyperparams.actor_lr))?;

        self.update_count += 1;
        if self.update_count % self.hyperparams.target_update_every as u64 == 0 {
            soft_update(&mut self.target_critic, &self.critic, self.hyperparams.target_tau)?;
        }

        Ok(AcDiagnostics {
            eta,
            actor_loss: -eta * p_a.ln(),
            critic_loss: eta * eta,
        })
    }

    pub fn update(&mut self, t: &AcTransition) -> Result<AcDiagnostics, AgentError> {
        let eta = self.td_error(t);
        self.apply_update(t, eta)
    }
}

pub fn greedy_argmax(values: &[f64]) -> Action {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Action::from_index(best).unwrap()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub total_discounted_reward: f64,
    pub steps: usize,
    pub handovers: usize,
    pub reached_goal: bool,
}

#[derive(Debug)]
pub struct AcTrainResult {
    pub agent: AcAgent,
    pub episodes: Vec<EpisodeStats>,
}

/// Called just before each update with the agent's pre-update networks, the
/// transition, and the TD error about to be applied.
pub type UpdateObserver<'a> = &'a mut dyn FnMut(&AcAgent, &AcTransition, f64);

pub fn train_ac(
    env: &mut GridEnv,
    hyperparams: AcHyperparams,
    seed: u64,
    mut observer: Option<UpdateObserver<'_>>,
) -> Result<AcTrainResult, AgentError> {
    let mut agent = AcAgent::new(hyperparams, seed)?;
    let mut episodes = Vec::with_capacity(hyperparams.episodes);

    for episode in 0..hyperparams.episodes {
        let state = env.reset();
        let mut obs = env.observation_encoding(state.position);
        let mut action = agent.select_action(&obs, SelectMode::Sample);
        let mut total = 0.0;
        let mut discount = 1.0;

        loop {
            let out = env.step(action).map_err(AgentError::Env)?;
            let next_obs = env.observation_encoding(out.next_observation);
            let next_action = agent.select_action(&next_obs, SelectMode::Sample);
            let t = AcTransition {
                obs,
                action,
                reward: out.reward,
                next_obs,
                next_action,
                // Step-limit truncation is not an environment terminal; only
                // goal arrival zeroes the bootstrap.
                done: out.terminal_reason == TerminalReason::Goal,
            };
            if let Some(obs_fn) = observer.as_deref_mut() {
                let eta = agent.td_error(&t);
                obs_fn(&agent, &t, eta);
            }
            agent.update(&t).map_err(|e| {
                AgentError::TrainingAborted {
                    episode,
                    step: env.state().steps_taken,
                    source: Box::new(e),
                }
            })?;

            total += discount * out.reward;
            discount *= hyperparams.gamma;

            if out.done {
                break;
            }
            obs = next_obs;
            action = next_action;
        }

        let st = env.state();
        episodes.push(EpisodeStats {
            total_discounted_reward: total,
            steps: st.steps_taken,
            handovers: st.handovers,
            reached_goal: st.position == env.config().goal_cell,
        });
    }

    Ok(AcTrainResult { agent, episodes })
}
