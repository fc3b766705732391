//! JSON checkpoint of a trained agent.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::algo::agent::Agent;
use crate::algo::config::{Algorithm, DppoConfig};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::net::{Activation, GaussianPolicyHead, Layer, Mlp};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// One dense layer; `weights` is row-major `(rows, cols)` = `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerRecord {
    fn from_layer(layer: &Layer) -> Self {
        Self {
            rows: layer.out_dim(),
            cols: layer.in_dim(),
            activation: layer.activation,
            weights: layer.weights.iter().copied().collect(),
            bias: layer.bias.to_vec(),
        }
    }

    fn to_layer(&self) -> Result<Layer> {
        let weights = Array2::from_shape_vec((self.rows, self.cols), self.weights.clone())
            .map_err(|e| Error::Shape(format!("layer weights: {e}")))?;
        Ok(Layer {
            weights,
            bias: Array1::from(self.bias.clone()),
            activation: self.activation,
        })
    }
}

/// Where the learner's random stream stood when the checkpoint was taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngSummary {
    pub algorithm: String,
    pub seed: u64,
    pub stream: u64,
    /// Decimal string; the position does not fit a JSON double.
    pub word_pos: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub config: DppoConfig,
    pub iteration: u64,
    pub env_steps: u64,
    pub actor: Vec<LayerRecord>,
    pub log_std: Vec<f64>,
    pub critic: Vec<LayerRecord>,
    pub rng: RngSummary,
}

fn records(net: &Mlp) -> Vec<LayerRecord> {
    net.layers().iter().map(LayerRecord::from_layer).collect()
}

fn network(records: &[LayerRecord]) -> Result<Mlp> {
    Mlp::from_layers(records.iter().map(LayerRecord::to_layer).collect::<Result<_>>()?)
}

impl Checkpoint {
    pub fn from_agent(agent: &Agent, iteration: u64, env_steps: u64, rng_word_pos: u128) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            algorithm: agent.algorithm,
            env: agent.env,
            config: agent.config.clone(),
            iteration,
            env_steps,
            actor: records(&agent.actor),
            log_std: agent.head.log_std().to_vec(),
            critic: records(&agent.critic),
            rng: RngSummary {
                algorithm: "chacha8".into(),
                seed: agent.config.seed,
                stream: 0,
                word_pos: rng_word_pos.to_string(),
            },
        }
    }

    pub fn to_agent(&self) -> Result<Agent> {
        Agent::from_parts(
            self.config.clone(),
            self.algorithm,
            self.env,
            network(&self.actor)?,
            GaussianPolicyHead::new(self.log_std.clone()),
            network(&self.critic)?,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a checkpoint, rejecting other schema versions before looking
    /// at the rest of the document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Config("checkpoint has no schema_version".into()))?;
        if found != u64::from(CHECKPOINT_SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        ckpt.to_agent()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (Agent, Checkpoint) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = DppoConfig {
            hidden: vec![8, 8],
            n_atoms: 6,
            ..DppoConfig::default()
        };
        let agent = Agent::new(&cfg, Algorithm::Dppo, EnvKind::RiskyCliff, &mut rng).unwrap();
        let ckpt = Checkpoint::from_agent(&agent, 4, 4096, 12345678901234567890123);
        (agent, ckpt)
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let (_, ckpt) = sample();
        let text = ckpt.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn restored_agent_matches_outputs() {
        let (agent, ckpt) = sample();
        let restored = Checkpoint::from_json(&ckpt.to_json().unwrap())
            .unwrap()
            .to_agent()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(agent.actor.predict(&x).unwrap(), restored.actor.predict(&x).unwrap());
            assert_eq!(agent.critic.predict(&x).unwrap(), restored.critic.predict(&x).unwrap());
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let (_, mut ckpt) = sample();
        ckpt.schema_version = 99;
        let err = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 99, expected: 1 }));
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn inconsistent_shapes_rejected() {
        let (_, mut ckpt) = sample();
        ckpt.env = EnvKind::GapStep;
        assert!(Checkpoint::from_json(&ckpt.to_json().unwrap()).is_err());
    }
}
