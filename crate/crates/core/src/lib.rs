//! Distributional proximal policy optimization at desk scale.
//!
//! The critic predicts `N` quantile atoms of the return distribution. A
//! distortion risk metric (CVaR or Wang) turns those atoms into the risk
//! value used by generalized advantage estimation, and the policy is
//! conditioned on the metric's risk parameter so the preference can be
//! changed at deployment time.

pub mod algo;
pub mod distribution;
pub mod envs;
pub mod error;
pub mod net;
pub mod normal;
pub mod returns;

pub use error::{Error, Result};
