//! Toy stochastic environments with a single Bernoulli hazard each, plus an
//! exact return-distribution oracle.
//!
//! * `risky-cliff`: walk right across a 10x4 field. Below `y = 1` the agent
//!   moves twice as fast but falls with probability 0.02 per step.
//! * `risky-cliff-deterministic`: the same field without falls.
//! * `gap-step`: walk right along a line; crossing `x = 2` is an attempt
//!   that succeeds with a probability decreasing in the obstacle height.
//!
//! Observations hold normalised positions only. The risk-parameter feature
//! is appended by the agent, see [`crate::algo`].

mod cliff;
mod gap;
mod oracle;
mod scripted;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cliff::{RiskyCliff, CLIFF_HORIZON, P_FALL};
pub use gap::{success_probability, GapStep, GAP_HEIGHTS, GAP_HORIZON};
pub use oracle::{oracle_return_distribution, OracleOptions, OracleResult};
pub use scripted::Scripted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "risky-cliff")]
    RiskyCliff,
    #[serde(rename = "risky-cliff-deterministic")]
    RiskyCliffDeterministic,
    #[serde(rename = "gap-step")]
    GapStep,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [
        EnvKind::RiskyCliff,
        EnvKind::RiskyCliffDeterministic,
        EnvKind::GapStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::RiskyCliff => "risky-cliff",
            EnvKind::RiskyCliffDeterministic => "risky-cliff-deterministic",
            EnvKind::GapStep => "gap-step",
        }
    }

    pub fn is_cliff(self) -> bool {
        matches!(self, EnvKind::RiskyCliff | EnvKind::RiskyCliffDeterministic)
    }

    /// Observation width without the risk feature: `(x/10, y/4)` on the
    /// cliff, `(x/4, h)` on the gap.
    pub fn obs_dim(self) -> usize {
        2
    }

    pub fn action_dim(self) -> usize {
        if self.is_cliff() {
            2
        } else {
            1
        }
    }

    /// Progress per step the agent is commanded to make.
    pub fn commanded_rate(self) -> f64 {
        if self.is_cliff() {
            1.0
        } else {
            0.5
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))
    }
}

/// Environment selection plus optional fixed obstacle height for gap-step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_height: Option<f64>,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            gap_height: None,
        }
    }

    pub fn gap_with_height(height: f64) -> Self {
        Self {
            kind: EnvKind::GapStep,
            gap_height: Some(height),
        }
    }

    pub fn build(&self) -> Env {
        match self.kind {
            EnvKind::RiskyCliff => Env::Cliff(RiskyCliff::new(P_FALL)),
            EnvKind::RiskyCliffDeterministic => Env::Cliff(RiskyCliff::new(0.0)),
            EnvKind::GapStep => Env::Gap(GapStep::new(self.gap_height)),
        }
    }
}

/// Named additive reward components. They always sum to the step reward.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTerms(Vec<(&'static str, f64)>);

impl RewardTerms {
    pub fn new(terms: Vec<(&'static str, f64)>) -> Self {
        Self(terms)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, v)| v).sum()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|(_, v)| *v).collect()
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Fell,
    Failed,
    Crossed,
    Goal,
    Refused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terms: RewardTerms,
    pub terminated: bool,
    pub truncated: bool,
    pub event: Option<Event>,
    /// The action was outside `[-1, 1]` and has been clamped.
    pub action_clamped: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }

    /// Episode ended by a failure before the horizon.
    pub fn early_termination(&self) -> bool {
        matches!(self.event, Some(Event::Fell | Event::Failed))
    }
}

/// Any environment from [`EnvKind`].
#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Cliff(RiskyCliff),
    Gap(GapStep),
}

impl Env {
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        match self {
            Env::Cliff(e) => e.reset(),
            Env::Gap(e) => e.reset(rng),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: &[f64], rng: &mut R) -> Result<StepResult> {
        self.step_with(action, &mut |p| rng.random::<f64>() < p)
    }

    /// Steps with an explicit source of Bernoulli outcomes; `coin(p)` must
    /// return `true` with probability `p`. At most one coin is flipped per
    /// step.
    pub fn step_with(&mut self, action: &[f64], coin: &mut dyn FnMut(f64) -> bool) -> Result<StepResult> {
        match self {
            Env::Cliff(e) => e.step_with(action, coin),
            Env::Gap(e) => e.step_with(action, coin),
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        match self {
            Env::Cliff(e) => e.observation(),
            Env::Gap(e) => e.observation(),
        }
    }

    /// World-frame position: `(x, y)` on the cliff, `(x)` on the gap.
    pub fn position(&self) -> Vec<f64> {
        match self {
            Env::Cliff(e) => vec![e.x(), e.y()],
            Env::Gap(e) => vec![e.x()],
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            Env::Cliff(e) if e.p_fall() == 0.0 => EnvKind::RiskyCliffDeterministic,
            Env::Cliff(_) => EnvKind::RiskyCliff,
            Env::Gap(_) => EnvKind::GapStep,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.kind().obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.kind().action_dim()
    }
}

/// Maps observations to actions without randomness.
pub trait DeterministicPolicy {
    fn act(&self, observation: &[f64]) -> Vec<f64>;

    fn is_deterministic(&self) -> bool {
        true
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> DeterministicPolicy for F {
    fn act(&self, observation: &[f64]) -> Vec<f64> {
        self(observation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathClass {
    Risky,
    Safe,
    Refusal,
    Failure,
    Success,
}

/// Positions and events of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: EnvKind,
    pub positions: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    pub rewards: Vec<f64>,
    pub finished: bool,
    pub early_termination: bool,
}

impl Trajectory {
    pub fn start(env: &Env) -> Self {
        Self {
            kind: env.kind(),
            positions: vec![env.position()],
            events: Vec::new(),
            rewards: Vec::new(),
            finished: false,
            early_termination: false,
        }
    }

    pub fn record(&mut self, env: &Env, step: &StepResult) {
        self.positions.push(env.position());
        self.rewards.push(step.reward);
        if let Some(e) = step.event {
            self.events.push(e);
        }
        self.early_termination |= step.early_termination();
        self.finished |= step.done();
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Shortfall of the realised mean progress rate against the commanded
    /// rate, floored at zero.
    pub fn tracking_error(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let start = self.positions[0][0];
        let end = self.positions[self.positions.len() - 1][0];
        let rate = (end - start) / self.len() as f64;
        (self.kind.commanded_rate() - rate).max(0.0)
    }
}

/// Classifies a finished episode: risky/safe on the cliff,
/// refusal/failure/success on the gap.
pub fn classify_path(trajectory: &Trajectory) -> Result<PathClass> {
    if !trajectory.finished {
        return Err(Error::IncompleteTrajectory);
    }
    let has = |e: Event| trajectory.events.contains(&e);
    if trajectory.kind.is_cliff() {
        let risky = has(Event::Fell) || trajectory.positions.iter().any(|p| p[1] < 1.0);
        Ok(if risky {
            PathClass::Risky
        } else {
            PathClass::Safe
        })
    } else if has(Event::Goal) {
        Ok(PathClass::Success)
    } else if has(Event::Failed) || has(Event::Crossed) {
        Ok(PathClass::Failure)
    } else {
        Ok(PathClass::Refusal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(spec: EnvSpec, policy: &dyn DeterministicPolicy, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = spec.build();
        let mut obs = env.reset(&mut rng);
        let mut traj = Trajectory::start(&env);
        loop {
            let step = env.step(&policy.act(&obs), &mut rng).unwrap();
            traj.record(&env, &step);
            obs = step.observation.clone();
            if step.done() {
                return traj;
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in EnvKind::ALL {
            assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert!("cliff".parse::<EnvKind>().is_err());
    }

    #[test]
    fn classify_cliff_paths() {
        let safe = run(EnvSpec::new(EnvKind::RiskyCliff), &Scripted::Safe, 0);
        assert_eq!(classify_path(&safe).unwrap(), PathClass::Safe);
        let risky = run(
            EnvSpec::new(EnvKind::RiskyCliffDeterministic),
            &Scripted::Risky,
            0,
        );
        assert_eq!(classify_path(&risky).unwrap(), PathClass::Risky);

        let mut fell = safe.clone();
        fell.events.push(Event::Fell);
        assert_eq!(classify_path(&fell).unwrap(), PathClass::Risky);
    }

    #[test]
    fn classify_gap_paths() {
        let refuse = run(EnvSpec::gap_with_height(0.5), &Scripted::Refuse, 0);
        assert_eq!(classify_path(&refuse).unwrap(), PathClass::Refusal);
        assert!(refuse.events.contains(&Event::Refused));

        let mut outcomes = std::collections::HashSet::new();
        for seed in 0..40 {
            let t = run(EnvSpec::gap_with_height(0.4), &Scripted::Attempt, seed);
            outcomes.insert(classify_path(&t).unwrap());
        }
        assert!(outcomes.contains(&PathClass::Success));
        assert!(outcomes.contains(&PathClass::Failure));
        assert!(!outcomes.contains(&PathClass::Refusal));
    }

    #[test]
    fn incomplete_trajectory_rejected() {
        let env = EnvSpec::new(EnvKind::GapStep).build();
        let traj = Trajectory::start(&env);
        assert!(matches!(classify_path(&traj), Err(Error::IncompleteTrajectory)));
    }

    #[test]
    fn tracking_error_of_stationary_policy() {
        let refuse = run(EnvSpec::gap_with_height(0.3), &Scripted::Refuse, 0);
        assert_eq!(refuse.tracking_error(), 0.5);
        let safe = run(EnvSpec::new(EnvKind::RiskyCliff), &Scripted::Safe, 0);
        assert_eq!(safe.tracking_error(), 0.0);
    }
}
