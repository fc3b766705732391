//! Training: DPPO, the PPO baseline and the reward-shaping baselines.

mod agent;
mod checkpoint;
mod config;
mod eval;
mod loss;
mod rollout;
mod shaping;
mod train;
mod update;

pub use agent::{Agent, AgentPolicy};
pub use checkpoint::{Checkpoint, LayerRecord, RngSummary, CHECKPOINT_SCHEMA_VERSION};
pub use config::{Algorithm, CriticLoss, DppoConfig};
pub use eval::{evaluate, EvalReport, EvalRow};
pub use loss::{
    actor_loss_and_grad, actor_params, clip_objective, critic_loss_and_grad, set_actor_params, ActorBatch,
    ActorLoss, ValueLoss,
};
pub use rollout::{sample_beta, Behavior, Collector, EpisodeSummary, LaneRollout, Rollout};
pub use shaping::{ppo1_shaped_reward, ppo2_shaped_reward, training_reward, PROGRESS_TERM};
pub use train::{beta_bucket, MetricsRecord, Trainer, BETA_BUCKETS};
pub use update::{dppo_update, normalize, ppo_update, prepare_batch, Learner, PreparedBatch, UpdateStats};
