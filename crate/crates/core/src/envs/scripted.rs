use std::str::FromStr;

use crate::error::Error;

use super::DeterministicPolicy;

/// Canonical hand-written policies. They read the un-augmented observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scripted {
    /// Cliff: hold `y = 2` and walk right.
    Safe,
    /// Cliff: dive into the hazard strip, then run along it.
    Risky,
    /// Gap: stand still.
    Refuse,
    /// Gap: always walk right.
    Attempt,
}

impl FromStr for Scripted {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "safe" => Ok(Scripted::Safe),
            "risky" => Ok(Scripted::Risky),
            "refuse" => Ok(Scripted::Refuse),
            "attempt" => Ok(Scripted::Attempt),
            other => Err(Error::Config(format!("unknown scripted policy `{other}`"))),
        }
    }
}

impl DeterministicPolicy for Scripted {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        match self {
            Scripted::Safe => {
                let y = obs[1] * 4.0;
                vec![1.0, (2.0 - y).clamp(-1.0, 1.0)]
            }
            Scripted::Risky => {
                let y = obs[1] * 4.0;
                if y >= 1.0 {
                    vec![1.0, -1.0]
                } else {
                    vec![1.0, 0.0]
                }
            }
            Scripted::Refuse => vec![0.0],
            Scripted::Attempt => vec![1.0],
        }
    }
}
