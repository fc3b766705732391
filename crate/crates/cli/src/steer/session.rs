//! The steering session state machine, independent of any transport.

use dppo::algo::{Agent, Algorithm};
use dppo::distribution::{distorted_value, distortion_weights, MetricKind};
use dppo::envs::{classify_path, Env, EnvKind, EnvSpec, Event, PathClass, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Version of the message protocol announced in the hello message.
pub const PROTOCOL_VERSION: u32 = 1;

/// Seconds a finished episode stays on screen before the automatic reset.
pub const AUTO_RESET_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    SetRisk { beta: f64 },
    Reset,
    Pause,
    Resume,
    SetEnv { name: String },
}

impl ClientMessage {
    pub const TYPES: [&'static str; 5] = ["set_risk", "reset", "pause", "resume", "set_env"];

    fn name(&self) -> &'static str {
        match self {
            ClientMessage::SetRisk { .. } => "set_risk",
            ClientMessage::Reset => "reset",
            ClientMessage::Pause => "pause",
            ClientMessage::Resume => "resume",
            ClientMessage::SetEnv { .. } => "set_env",
        }
    }

    /// Parses a text frame. The error text is ready to send back.
    pub fn parse(text: &str) -> Result<Self, String> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        let kind = value
            .get("type")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| "message has no string `type` field".to_string())?
            .to_string();
        if !Self::TYPES.contains(&kind.as_str()) {
            return Err(format!("unknown message type `{kind}`"));
        }
        serde_json::from_value(value).map_err(|e| format!("malformed {kind} message: {e}"))
    }
}

/// How the current episode ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoneInfo {
    pub terminated: bool,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<Event>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateMessage {
    pub tick: u64,
    pub episode: u64,
    pub env: EnvKind,
    pub position: Vec<f64>,
    pub reward: f64,
    pub cum_return: f64,
    pub beta: f64,
    /// Set on the first message of an episode started by a reset.
    pub reset: bool,
    pub done_info: Option<DoneInfo>,
    pub atoms: Vec<f64>,
    pub distorted_value: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol: u32,
        version: String,
        algorithm: Algorithm,
        metric: MetricKind,
        beta: f64,
        beta_bounds: [f64; 2],
        n_atoms: usize,
        tick_hz: f64,
    },
    State(StateMessage),
    Ack {
        request: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        clamped: bool,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// One live episode driven by a checkpoint's mean-action policy.
pub struct Session {
    agent: Agent,
    spec: EnvSpec,
    env: Env,
    rng: ChaCha8Rng,
    tick_hz: f64,
    beta: f64,
    /// Last-writer-wins risk parameter, read once per tick.
    mailbox: Option<f64>,
    paused: bool,
    pending_reset: bool,
    tick: u64,
    episode: u64,
    cum_return: f64,
    trajectory: Trajectory,
    done: Option<DoneInfo>,
    ticks_since_done: u64,
}

impl Session {
    pub fn new(agent: Agent, spec: EnvSpec, tick_hz: f64, seed: u64) -> Self {
        let mut env = spec.build();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset(&mut rng);
        let beta = agent.config.neutral_beta(agent.algorithm);
        let trajectory = Trajectory::start(&env);
        Self {
            agent,
            spec,
            env,
            rng,
            tick_hz,
            beta,
            mailbox: None,
            paused: false,
            pending_reset: false,
            tick: 0,
            episode: 0,
            cum_return: 0.0,
            trajectory,
            done: None,
            ticks_since_done: 0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn env_kind(&self) -> EnvKind {
        self.spec.kind
    }

    /// Range the risk parameter is clamped to.
    pub fn beta_bounds(&self) -> (f64, f64) {
        let cfg = &self.agent.config;
        match self.agent.algorithm {
            Algorithm::Dppo => cfg.metric.evaluation_bounds(),
            algo => cfg.beta_range(algo),
        }
    }

    /// Ticks between a terminal step and the automatic reset.
    pub fn reset_delay_ticks(&self) -> u64 {
        (AUTO_RESET_SECONDS * self.tick_hz).round().max(1.0) as u64
    }

    pub fn hello(&self) -> ServerMessage {
        let (lo, hi) = self.beta_bounds();
        ServerMessage::Hello {
            protocol: PROTOCOL_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            algorithm: self.agent.algorithm,
            metric: self.agent.config.metric,
            beta: self.mailbox.unwrap_or(self.beta),
            beta_bounds: [lo, hi],
            n_atoms: self.agent.critic.output_dim(),
            tick_hz: self.tick_hz,
        }
    }

    /// Applies a client request and returns the reply for that client.
    /// Nothing here steps the environment.
    pub fn apply(&mut self, msg: ClientMessage) -> ServerMessage {
        let request = msg.name().to_string();
        let ack = |beta, clamped| ServerMessage::Ack {
            request: request.clone(),
            beta,
            clamped,
        };
        match msg {
            ClientMessage::SetRisk { beta } => {
                if !beta.is_finite() {
                    return ServerMessage::error("beta must be a finite number");
                }
                let (lo, hi) = self.beta_bounds();
                let value = beta.clamp(lo, hi);
                self.mailbox = Some(value);
                ack(Some(value), value != beta)
            }
            ClientMessage::Reset => {
                self.pending_reset = true;
                ack(None, false)
            }
            ClientMessage::Pause => {
                self.paused = true;
                ack(None, false)
            }
            ClientMessage::Resume => {
                self.paused = false;
                ack(None, false)
            }
            ClientMessage::SetEnv { name } => {
                let kind: EnvKind = match name.parse() {
                    Ok(k) => k,
                    Err(e) => return ServerMessage::error(e.to_string()),
                };
                if kind.is_cliff() != self.agent.env.is_cliff() {
                    return ServerMessage::error(format!(
                        "checkpoint was trained on {}, cannot run on {kind}",
                        self.agent.env
                    ));
                }
                self.spec = EnvSpec::new(kind);
                self.env = self.spec.build();
                self.pending_reset = true;
                ack(None, false)
            }
        }
    }

    fn reset_episode(&mut self) {
        self.env.reset(&mut self.rng);
        self.trajectory = Trajectory::start(&self.env);
        self.cum_return = 0.0;
        self.done = None;
        self.ticks_since_done = 0;
        self.pending_reset = false;
        self.episode += 1;
    }

    /// Advances one tick. Paused sessions produce nothing.
    pub fn tick(&mut self) -> dppo::Result<Option<StateMessage>> {
        if self.paused {
            return Ok(None);
        }
        if let Some(beta) = self.mailbox.take() {
            self.beta = beta;
        }
        self.tick += 1;
        let mut reward = 0.0;
        let mut reset = false;
        if self.pending_reset || (self.done.is_some() && self.ticks_since_done >= self.reset_delay_ticks()) {
            self.reset_episode();
            reset = true;
        } else if self.done.is_some() {
            self.ticks_since_done += 1;
        } else {
            let obs = self.env.observation();
            let action = self.agent.mean_action(&obs, self.beta)?;
            let step = self.env.step(&action, &mut self.rng)?;
            self.trajectory.record(&self.env, &step);
            reward = step.reward;
            self.cum_return += reward;
            if step.done() {
                self.done = Some(DoneInfo {
                    terminated: step.terminated,
                    truncated: step.truncated,
                    event: step.event,
                    path: classify_path(&self.trajectory).ok(),
                });
                self.ticks_since_done = 0;
            }
        }

        let atoms = self.agent.critic_atoms(&self.env.observation(), self.beta)?;
        let metric = self.agent.config.value_metric(self.agent.algorithm, self.beta);
        Ok(Some(StateMessage {
            tick: self.tick,
            episode: self.episode,
            env: self.spec.kind,
            position: self.env.position(),
            reward,
            cum_return: self.cum_return,
            beta: self.beta,
            reset,
            done_info: self.done.clone(),
            distorted_value: distorted_value(&atoms, &metric)?,
            weights: distortion_weights(&metric, atoms.len())?,
            atoms: atoms.into_supports(),
        }))
    }
}
