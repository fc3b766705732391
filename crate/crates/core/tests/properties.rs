use dppo::algo::{clip_objective, normalize};
use dppo::distribution::{
    distorted_value, distortion_weights, energy_distance, wang_g, wasserstein1, QuantileDistribution, RiskMetric,
};
use dppo::envs::{oracle_return_distribution, EnvKind, EnvSpec, OracleOptions, Scripted};
use dppo::returns::{sr_lambda_targets, truncated_gae};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn supports() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, 1..40)
}

fn qd(v: Vec<f64>) -> QuantileDistribution {
    QuantileDistribution::new(v).unwrap()
}

/// Scalar TD(lambda) returns computed forward, one episode segment at a
/// time: `G_t = r_t + gamma ((1-lambda) v_{t+1} + lambda G_{t+1})`.
fn scalar_td_lambda(rewards: &[f64], dones: &[bool], next_values: &[f64], lambda: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            // expand the recursion forwards as a weighted sum of n-step returns
            let mut total = 0.0;
            let mut weight = 1.0;
            let mut discount = 1.0;
            let mut acc = 0.0;
            for k in t..n {
                acc += discount * rewards[k];
                discount *= gamma;
                if dones[k] {
                    return total + weight * acc;
                }
                if k + 1 == n {
                    return total + weight * (acc + discount * next_values[k]);
                }
                total += weight * (1.0 - lambda) * (acc + discount * next_values[k]);
                weight *= lambda;
            }
            unreachable!()
        })
        .collect()
}

fn problem() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>, f64, u64)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(prop::bool::weighted(0.2), n),
            prop::collection::vec(-10.0..10.0f64, n),
            0.5..1.0f64,
            any::<u64>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn neutral_parameters_recover_the_mean(v in supports()) {
        let d = qd(v);
        let m = d.mean();
        prop_assert!((distorted_value(&d, &RiskMetric::Cvar(1.0)).unwrap() - m).abs() < 1e-9);
        prop_assert!((distorted_value(&d, &RiskMetric::Wang(0.0)).unwrap() - m).abs() < 1e-9);
    }

    #[test]
    fn weights_form_a_distribution(n in 1usize..64, b in 0.01..1.0f64, w in -3.0..3.0f64) {
        for metric in [RiskMetric::Cvar(b), RiskMetric::Wang(w), RiskMetric::Neutral] {
            let ws = distortion_weights(&metric, n).unwrap();
            prop_assert!(ws.iter().all(|&x| x >= 0.0));
            prop_assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distorted_value_is_monotone_in_beta(v in supports()) {
        let d = qd(v);
        let cvar: Vec<f64> = (1..=20).map(|i| distorted_value(&d, &RiskMetric::Cvar(i as f64 / 20.0)).unwrap()).collect();
        prop_assert!(cvar.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        let wang: Vec<f64> = (0..20)
            .map(|i| distorted_value(&d, &RiskMetric::Wang(-3.0 + 6.0 * i as f64 / 19.0)).unwrap())
            .collect();
        prop_assert!(wang.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        // any distortion stays within the support
        let s = d.sorted();
        for x in cvar.iter().chain(&wang) {
            prop_assert!(*x >= s[0] - 1e-9 && *x <= s[s.len() - 1] + 1e-9);
        }
    }

    #[test]
    fn wang_distortion_is_monotone(tau in 0.001..0.999f64, dt in 0.0..0.5f64, beta in -3.0..3.0f64, db in 0.0..2.0f64) {
        prop_assert!(wang_g((tau + dt).min(1.0), beta) >= wang_g(tau, beta) - 1e-15);
        // g grows with beta, which moves weight onto the low atoms
        prop_assert!(wang_g(tau, beta + db) >= wang_g(tau, beta) - 1e-15);
    }

    #[test]
    fn energy_distance_is_a_divergence(a in supports(), b in supports(), shift in -5.0..5.0f64) {
        let ab = energy_distance(&a, &b).unwrap();
        prop_assert!(ab >= -1e-9);
        prop_assert!((ab - energy_distance(&b, &a).unwrap()).abs() < 1e-9);
        let mut perm = a.clone();
        perm.reverse();
        prop_assert!(energy_distance(&a, &perm).unwrap().abs() < 1e-9);
        // translation invariance
        let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
        prop_assert!((energy_distance(&a2, &b2).unwrap() - ab).abs() < 1e-8);
    }

    #[test]
    fn wasserstein_of_shift_is_the_shift(v in supports(), shift in -5.0..5.0f64) {
        let a = qd(v.clone());
        let b = qd(v.iter().map(|x| x + shift).collect());
        prop_assert!((wasserstein1(&a, &b) - shift.abs()).abs() < 1e-9);
    }

    #[test]
    fn sr_lambda_endpoints((rewards, dones, next, gamma, seed) in problem()) {
        let n_atoms = 4;
        let atoms: Vec<QuantileDistribution> = next
            .iter()
            .enumerate()
            .map(|(i, &v)| qd((0..n_atoms).map(|k| v + k as f64 + 0.1 * i as f64).collect()))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let one = sr_lambda_targets(&rewards, &dones, &atoms, 0.0, gamma, &mut rng).unwrap();
        let full = sr_lambda_targets(&rewards, &dones, &atoms, 1.0, gamma, &mut rng).unwrap();
        let horizon = rewards.len();
        for t in 0..horizon {
            for k in 0..n_atoms {
                let boot = if dones[t] { 0.0 } else { atoms[t].supports()[k] };
                prop_assert!((one.targets[t][k] - (rewards[t] + gamma * boot)).abs() < 1e-12);
                // n-step: rewards to the episode end or segment end, then atom k
                let mut acc = 0.0;
                let mut disc = 1.0;
                let mut j = t;
                loop {
                    acc += disc * rewards[j];
                    disc *= gamma;
                    if dones[j] {
                        break;
                    }
                    if j + 1 == horizon {
                        acc += disc * atoms[j].supports()[k];
                        break;
                    }
                    j += 1;
                }
                prop_assert!((full.targets[t][k] - acc).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sr_lambda_atoms_are_n_step_returns((rewards, dones, next, gamma, seed) in problem(), lambda in 0.0..1.0f64) {
        // with constant atoms per state, every target atom is one of the
        // n-step returns of its time step
        let atoms: Vec<QuantileDistribution> = next.iter().map(|&v| QuantileDistribution::constant(v, 10)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = sr_lambda_targets(&rewards, &dones, &atoms, lambda, gamma, &mut rng).unwrap();
        let horizon = rewards.len();
        for t in 0..horizon {
            let mut candidates = Vec::new();
            let mut acc = 0.0;
            let mut disc = 1.0;
            for j in t..horizon {
                acc += disc * rewards[j];
                disc *= gamma;
                if dones[j] {
                    candidates.push(acc);
                    break;
                }
                candidates.push(acc + disc * next[j]);
            }
            for z in &out.targets[t] {
                prop_assert!(candidates.iter().any(|c| (c - z).abs() < 1e-10), "{z} not in {candidates:?}");
            }
        }
    }

    #[test]
    fn degenerate_atoms_match_scalar_td_at_the_endpoints((rewards, dones, next, gamma, seed) in problem()) {
        let atoms: Vec<QuantileDistribution> = next.iter().map(|&v| QuantileDistribution::constant(v, 8)).collect();
        for lambda in [0.0, 1.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = sr_lambda_targets(&rewards, &dones, &atoms, lambda, gamma, &mut rng).unwrap();
            let td = scalar_td_lambda(&rewards, &dones, &next, lambda, gamma);
            for (set, g) in out.targets.iter().zip(&td) {
                prop_assert!(set.iter().all(|z| (z - g).abs() < 1e-10));
            }
        }
    }

    #[test]
    fn gae_does_not_cross_episode_boundaries((rewards, dones, next, gamma, _seed) in problem(), lambda in 0.0..1.0f64) {
        let n = rewards.len();
        let mut values = next.clone();
        values.push(1.0);
        let base = truncated_gae(&rewards, &dones, &values, gamma, lambda).unwrap();
        // perturbing anything after a terminal step leaves earlier advantages alone
        if let Some(end) = dones.iter().position(|&d| d) {
            let mut r2 = rewards.clone();
            let mut v2 = values.clone();
            for k in end + 1..n {
                r2[k] += 3.0;
                v2[k] -= 2.0;
            }
            v2[n] += 5.0;
            let other = truncated_gae(&r2, &dones, &v2, gamma, lambda).unwrap();
            for t in 0..=end {
                prop_assert!((base.advantages[t] - other.advantages[t]).abs() < 1e-12);
            }
        }
        // lambda = 0 gives one-step residuals
        let one = truncated_gae(&rewards, &dones, &values, gamma, 0.0).unwrap();
        prop_assert_eq!(&one.advantages, &one.residuals);
    }

    #[test]
    fn gae_matches_scalar_td_lambda((rewards, dones, next, gamma, _seed) in problem(), lambda in 0.0..1.0f64) {
        // A_t + V(s_t) is the TD(lambda) return when V is the bootstrap value
        let n = rewards.len();
        let mut values = vec![0.0; n + 1];
        values[1..].copy_from_slice(&next);
        values[0] = 0.7;
        let gae = truncated_gae(&rewards, &dones, &values, gamma, lambda).unwrap();
        let td = scalar_td_lambda(&rewards, &dones, &values[1..], lambda, gamma);
        for (r, g) in gae.returns().iter().zip(&td) {
            prop_assert!((r - g).abs() < 1e-9);
        }
    }

    #[test]
    fn clip_objective_cases(ratio in 0.0..3.0f64, adv in -5.0..5.0f64, eps in 0.05..0.5f64) {
        let v = clip_objective(ratio, adv, eps);
        let expected = if adv >= 0.0 {
            ratio.min(1.0 + eps) * adv
        } else {
            ratio.max(1.0 - eps) * adv
        };
        prop_assert!((v - expected).abs() < 1e-12);
        prop_assert!(v <= ratio * adv + 1e-12);
    }

    #[test]
    fn normalized_advantages_are_standard(mut xs in prop::collection::vec(-100.0..100.0f64, 2..200)) {
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        normalize(&mut xs);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quantile_distribution_json_round_trip(v in supports()) {
        let d = qd(v);
        let text = serde_json::to_string(&d).unwrap();
        prop_assert_eq!(serde_json::from_str::<QuantileDistribution>(&text).unwrap(), d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_probabilities_sum_to_one(h in prop::sample::select(vec![0.2, 0.3, 0.4, 0.5]), gamma in 0.9..1.0f64) {
        let opts = OracleOptions { gamma, ..OracleOptions::default() };
        let cases = [
            (EnvSpec::new(EnvKind::RiskyCliff), Scripted::Risky),
            (EnvSpec::new(EnvKind::RiskyCliff), Scripted::Safe),
            (EnvSpec::gap_with_height(h), Scripted::Attempt),
            (EnvSpec::gap_with_height(h), Scripted::Refuse),
        ];
        for (spec, script) in cases {
            let r = oracle_return_distribution(&spec, &script, &opts).unwrap();
            prop_assert!(r.exact);
            prop_assert!((r.total_probability() - 1.0).abs() < 1e-12);
        }
    }
}
