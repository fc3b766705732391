//! Quantile value distributions, distortion risk metrics and sample-set
//! distances used as critic losses.
//!
//! A [`QuantileDistribution`] is the uniform mixture of its `N` supports.
//! Risk metrics are applied by sorting the supports and weighting the
//! `k`-th smallest atom with `g(k/N) - g((k-1)/N)` for the metric's
//! distortion `g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Equally weighted support atoms of a return distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileDistribution {
    supports: Vec<f64>,
}

impl QuantileDistribution {
    pub fn new(supports: Vec<f64>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::Empty("quantile distribution"));
        }
        if supports.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("quantile distribution"));
        }
        Ok(Self { supports })
    }

    /// `n` atoms all located at `value`.
    pub fn constant(value: f64, n: usize) -> Self {
        assert!(n > 0, "atom count must be positive");
        Self {
            supports: vec![value; n],
        }
    }

    pub fn supports(&self) -> &[f64] {
        &self.supports
    }

    pub fn into_supports(self) -> Vec<f64> {
        self.supports
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.supports.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    pub fn mean(&self) -> f64 {
        mean(self)
    }

    /// Resamples to `n` atoms by linear interpolation of the empirical
    /// quantile function at the midpoints `(2k-1)/(2n)`.
    pub fn resample(&self, n: usize) -> Self {
        assert!(n > 0, "atom count must be positive");
        if n == self.len() {
            return self.clone();
        }
        let sorted = self.sorted();
        let m = sorted.len();
        let supports = (0..n)
            .map(|k| {
                let tau = (2 * k + 1) as f64 / (2 * n) as f64;
                // atom i sits at tau_i = (i + 0.5) / m
                let pos = (tau * m as f64 - 0.5).clamp(0.0, (m - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(m - 1);
                let frac = pos - lo as f64;
                sorted[lo] + frac * (sorted[hi] - sorted[lo])
            })
            .collect();
        Self { supports }
    }
}

impl TryFrom<Vec<f64>> for QuantileDistribution {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<QuantileDistribution> for Vec<f64> {
    fn from(value: QuantileDistribution) -> Self {
        value.supports
    }
}

/// Family of distortion risk metric, without its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Neutral,
    Cvar,
    Wang,
}

impl MetricKind {
    pub fn with_beta(self, beta: f64) -> RiskMetric {
        match self {
            MetricKind::Neutral => RiskMetric::Neutral,
            MetricKind::Cvar => RiskMetric::Cvar(beta),
            MetricKind::Wang => RiskMetric::Wang(beta),
        }
    }

    /// Risk parameter range sampled during training.
    pub fn training_range(self) -> (f64, f64) {
        match self {
            MetricKind::Neutral => (0.0, 0.0),
            MetricKind::Cvar => (0.0, 1.0),
            MetricKind::Wang => (-1.5, 1.5),
        }
    }

    /// Bounds accepted at deployment; values outside are clamped.
    pub fn evaluation_bounds(self) -> (f64, f64) {
        match self {
            MetricKind::Neutral => (0.0, 0.0),
            MetricKind::Cvar => (0.01, 1.0),
            MetricKind::Wang => (-3.0, 3.0),
        }
    }

    /// Value of the risk parameter that recovers the plain expectation.
    pub fn neutral_beta(self) -> f64 {
        match self {
            MetricKind::Cvar => 1.0,
            MetricKind::Neutral | MetricKind::Wang => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Neutral => "neutral",
            MetricKind::Cvar => "cvar",
            MetricKind::Wang => "wang",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(MetricKind::Neutral),
            "cvar" => Ok(MetricKind::Cvar),
            "wang" => Ok(MetricKind::Wang),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// A risk preference: distortion family plus risk parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "beta", rename_all = "lowercase")]
pub enum RiskMetric {
    Neutral,
    Cvar(f64),
    Wang(f64),
}

impl RiskMetric {
    pub fn kind(&self) -> MetricKind {
        match self {
            RiskMetric::Neutral => MetricKind::Neutral,
            RiskMetric::Cvar(_) => MetricKind::Cvar,
            RiskMetric::Wang(_) => MetricKind::Wang,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            RiskMetric::Neutral => 0.0,
            RiskMetric::Cvar(b) | RiskMetric::Wang(b) => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskMetric::Neutral => Ok(()),
            RiskMetric::Cvar(beta) if beta > 0.0 && beta <= 1.0 => Ok(()),
            RiskMetric::Cvar(beta) => Err(Error::InvalidRiskParameter { metric: "cvar", beta }),
            RiskMetric::Wang(beta) if beta.is_finite() => Ok(()),
            RiskMetric::Wang(beta) => Err(Error::InvalidRiskParameter { metric: "wang", beta }),
        }
    }

    /// The distortion `g` evaluated at `tau`.
    pub fn distort(&self, tau: f64) -> Result<f64> {
        match *self {
            RiskMetric::Neutral => Ok(tau.clamp(0.0, 1.0)),
            RiskMetric::Cvar(beta) => cvar_g(tau, beta),
            RiskMetric::Wang(beta) => {
                self.validate()?;
                Ok(wang_g(tau, beta))
            }
        }
    }
}

/// Arithmetic mean of the supports.
pub fn mean(dist: &QuantileDistribution) -> f64 {
    dist.supports.iter().sum::<f64>() / dist.supports.len() as f64
}

/// Wang distortion `Phi(Phi^-1(tau) + beta)`, pinned to 0 and 1 at the ends.
pub fn wang_g(tau: f64, beta: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    normal::cdf(normal::quantile(tau) + beta)
}

/// CVaR distortion `min(tau / beta, 1)`.
pub fn cvar_g(tau: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidRiskParameter { metric: "cvar", beta });
    }
    Ok((tau / beta).min(1.0))
}

/// Probability weights of the ascending-sorted atoms under `metric`.
pub fn distortion_weights(metric: &RiskMetric, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Empty("distortion weights"));
    }
    metric.validate()?;
    if let RiskMetric::Neutral = metric {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let mut prev = 0.0;
    let mut weights = Vec::with_capacity(n);
    for k in 1..=n {
        let g = if k == n {
            1.0
        } else {
            metric.distort(k as f64 / n as f64)?
        };
        weights.push((g - prev).max(0.0));
        prev = g;
    }
    Ok(weights)
}

/// Distorted expectation of `dist` under `metric`.
pub fn distorted_value(dist: &QuantileDistribution, metric: &RiskMetric) -> Result<f64> {
    if let RiskMetric::Neutral = metric {
        return Ok(dist.mean());
    }
    let weights = distortion_weights(metric, dist.len())?;
    Ok(dist
        .sorted()
        .iter()
        .zip(&weights)
        .map(|(theta, w)| theta * w)
        .sum())
}

/// Energy distance `2E|a-b| - E|b-b'| - E|a-a'|` over all index pairs.
pub fn energy_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("energy distance sample set"));
    }
    Ok(2.0 * mean_abs_diff(a, b) - mean_abs_diff(b, b) - mean_abs_diff(a, a))
}

/// Energy distance and its gradient with respect to every atom of `pred`.
pub fn energy_distance_grad(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = energy_distance(pred, target)?;
    let n = pred.len() as f64;
    let m = target.len() as f64;
    let grad = pred
        .iter()
        .map(|&p| {
            let cross: f64 = target.iter().map(|&t| sign(p - t)).sum();
            let own: f64 = pred.iter().map(|&q| sign(p - q)).sum();
            2.0 * cross / (n * m) - 2.0 * own / (n * n)
        })
        .collect();
    Ok((loss, grad))
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let total: f64 = a
        .iter()
        .map(|&x| b.iter().map(|&y| (x - y).abs()).sum::<f64>())
        .sum();
    total / (a.len() * b.len()) as f64
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn huber(u: f64, kappa: f64) -> f64 {
    if u.abs() <= kappa {
        0.5 * u * u
    } else {
        kappa * (u.abs() - 0.5 * kappa)
    }
}

/// Quantile-regression Huber loss of the QR-DQN family.
///
/// Atom `i` of `pred` is read as the `(2i+1)/(2N)` quantile estimate.
pub fn quantile_huber_loss(pred: &QuantileDistribution, target: &[f64], kappa: f64) -> Result<f64> {
    Ok(quantile_huber_grad(pred.supports(), target, kappa)?.0)
}

/// Quantile-Huber loss and its gradient with respect to `pred`.
pub fn quantile_huber_grad(pred: &[f64], target: &[f64], kappa: f64) -> Result<(f64, Vec<f64>)> {
    if !(kappa > 0.0) {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa,
            range: "> 0",
        });
    }
    if pred.is_empty() || target.is_empty() {
        return Err(Error::Empty("quantile huber sample set"));
    }
    let n = pred.len() as f64;
    let m = target.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, &theta) in pred.iter().enumerate() {
        let tau = (2 * i + 1) as f64 / (2.0 * n);
        for &t in target {
            let u = t - theta;
            let w = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
            loss += w * huber(u, kappa) / kappa;
            let dhuber = if u.abs() <= kappa { u } else { kappa * sign(u) };
            grad[i] -= w * dhuber / kappa / m;
        }
    }
    Ok((loss / m, grad))
}

/// 1-Wasserstein distance between two quantile distributions. The larger
/// one is resampled when the atom counts differ.
pub fn wasserstein1(a: &QuantileDistribution, b: &QuantileDistribution) -> f64 {
    let n = a.len().min(b.len());
    let a = a.resample(n).sorted();
    let b = b.resample(n).sorted();
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64
}
