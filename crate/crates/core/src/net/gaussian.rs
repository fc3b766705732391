//! Diagonal Gaussian action head with a state-independent log-std.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicyHead {
    log_std: Vec<f64>,
}

/// Log density and its partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbGrad {
    pub logprob: f64,
    pub d_mean: Vec<f64>,
    pub d_log_std: Vec<f64>,
}

impl GaussianPolicyHead {
    pub fn new(log_std: Vec<f64>) -> Self {
        let mut head = Self { log_std };
        head.clamp();
        head
    }

    pub fn with_dim(dim: usize, initial_log_std: f64) -> Self {
        Self::new(vec![initial_log_std; dim])
    }

    pub fn dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Replaces the log-std vector, projecting it onto the allowed range.
    pub fn set_log_std(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.log_std.len() {
            return Err(Error::LengthMismatch {
                what: "log_std",
                expected: self.log_std.len(),
                got: values.len(),
            });
        }
        self.log_std.copy_from_slice(values);
        self.clamp();
        Ok(())
    }

    fn clamp(&mut self) {
        for l in &mut self.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn entropy(&self) -> f64 {
        let per_dim = 0.5 * (2.0 * PI * std::f64::consts::E).ln();
        self.log_std.iter().map(|l| l + per_dim).sum()
    }

    pub fn logprob(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((m, a), l)| {
                let z = (a - m) / l.exp();
                -0.5 * z * z - l - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }

    pub fn logprob_and_grad(&self, mean: &[f64], action: &[f64]) -> Result<LogProbGrad> {
        if mean.len() != self.dim() || action.len() != self.dim() {
            return Err(Error::LengthMismatch {
                what: "action",
                expected: self.dim(),
                got: if mean.len() != self.dim() {
                    mean.len()
                } else {
                    action.len()
                },
            });
        }
        let mut d_mean = Vec::with_capacity(self.dim());
        let mut d_log_std = Vec::with_capacity(self.dim());
        for ((m, a), l) in mean.iter().zip(action).zip(&self.log_std) {
            let var = (2.0 * l).exp();
            let diff = a - m;
            d_mean.push(diff / var);
            d_log_std.push(diff * diff / var - 1.0);
        }
        Ok(LogProbGrad {
            logprob: self.logprob(mean, action),
            d_mean,
            d_log_std,
        })
    }

    /// Draws `mean + std * noise` given standard normal `noise`.
    pub fn sample_with(&self, mean: &[f64], noise: &[f64]) -> Vec<f64> {
        mean.iter()
            .zip(noise)
            .zip(&self.log_std)
            .map(|((m, z), l)| m + l.exp() * z)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_mean() {
        let head = GaussianPolicyHead::with_dim(1, 0.0);
        let lp = head.logprob(&[0.3], &[0.3]);
        assert!((lp + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn density_decreases_away_from_mean() {
        let head = GaussianPolicyHead::with_dim(2, -0.5);
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let d = k as f64 * 0.3;
            let lp = head.logprob(&[0.0, 1.0], &[d, 1.0 - d]);
            assert!(lp < prev);
            prev = lp;
        }
    }

    #[test]
    fn zero_mean_gradient_at_mean() {
        let head = GaussianPolicyHead::with_dim(3, 0.2);
        let g = head.logprob_and_grad(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.d_mean, vec![0.0; 3]);
        assert_eq!(g.d_log_std, vec![-1.0; 3]);
        assert!(head.logprob_and_grad(&[1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn gradient_matches_differences() {
        let head = GaussianPolicyHead::new(vec![0.3, -0.7]);
        let mean = [0.2, -0.4];
        let action = [1.1, 0.5];
        let g = head.logprob_and_grad(&mean, &action).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut up = mean;
            up[i] += h;
            let mut dn = mean;
            dn[i] -= h;
            let fd = (head.logprob(&up, &action) - head.logprob(&dn, &action)) / (2.0 * h);
            assert!((fd - g.d_mean[i]).abs() < 1e-8);

            let mut ls_up = head.log_std().to_vec();
            ls_up[i] += h;
            let mut ls_dn = head.log_std().to_vec();
            ls_dn[i] -= h;
            let fd = (GaussianPolicyHead::new(ls_up).logprob(&mean, &action)
                - GaussianPolicyHead::new(ls_dn).logprob(&mean, &action))
                / (2.0 * h);
            assert!((fd - g.d_log_std[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn log_std_is_clamped() {
        let head = GaussianPolicyHead::new(vec![-9.0, 4.0, 0.5]);
        assert_eq!(head.log_std(), &[LOG_STD_MIN, LOG_STD_MAX, 0.5]);
        assert!(head.std().iter().all(|s| *s > 0.0));
    }
}
