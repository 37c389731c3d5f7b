use super::WeightVec;
use crate::mdp::{DistSA, QTable};
use crate::{Error, Result};

/// The bootstrap pair `(s′, â)` of a transition; terminal successors contribute nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NextRef {
    pub state: usize,
    pub action: usize,
    pub terminal: bool,
}

fn lookup(values: &dyn Fn(usize, usize) -> f64, next: &[NextRef]) -> Vec<f64> {
    next.iter()
        .map(|n| if n.terminal { 0.0 } else { values(n.state, n.action).max(0.0) })
        .collect()
}

/// `Δ̂_i = |Q_k(s_i, a_i) − y_i| + γ Δ_target(s′_i, â_i)`.
pub fn delta_targets(
    delta_target: &dyn Fn(usize, usize) -> f64,
    next: &[NextRef],
    bellman_abs_error: &[f64],
    discount: f64,
) -> Vec<f64> {
    lookup(delta_target, next)
        .into_iter()
        .zip(bellman_abs_error)
        .map(|(d, e)| e + discount * d)
        .collect()
}

/// `exp(−γ v_i / τ)` self-normalised, for bootstrapped error estimates `v_i`.
pub fn weights_from_bootstrap(values: &[f64], discount: f64, tau: f64) -> Result<WeightVec> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature {tau} must be positive")));
    }
    // shift by the smallest exponent before exponentiating; the shift cancels in normalisation
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min.is_finite() { min } else { 0.0 };
    WeightVec::normalized(values.iter().map(|v| (-discount * (v - shift) / tau).exp()).collect())
}

/// DisCor weights from the error model's target copy.
pub fn discor_weights(
    delta_target: &dyn Fn(usize, usize) -> f64,
    next: &[NextRef],
    discount: f64,
    tau: f64,
) -> Result<WeightVec> {
    weights_from_bootstrap(&lookup(delta_target, next), discount, tau)
}

/// DisCor weights with the true error `|Q_{k−1} − Q*|` at `(s′, â)` in place of Δ.
pub fn oracle_discor_weights(
    q_prev: &QTable,
    q_star: &QTable,
    next: &[NextRef],
    discount: f64,
    tau: f64,
) -> Result<WeightVec> {
    let err = |s: usize, a: usize| (q_prev.get(s, a) - q_star.get(s, a)).abs();
    weights_from_bootstrap(&lookup(&err, next), discount, tau)
}

/// `τ ← max(τ_floor, (1 − η)τ + η · mean(Δ))`.
pub fn update_temperature(tau: f64, rate: f64, floor: f64, delta_values: &[f64]) -> Result<f64> {
    if delta_values.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mean = delta_values.iter().sum::<f64>() / delta_values.len() as f64;
    Ok(((1.0 - rate) * tau + rate * mean).max(floor))
}

/// `p ∝ exp(−|Q_{k−1} − Q*|) · |Q_{k−1} − B*Q_{k−1}|` over all pairs, uniform when
/// every Bellman error is zero.
pub fn optimal_p_distribution(q_prev: &QTable, q_star: &QTable, bellman_abs_error: &[f64]) -> Result<DistSA> {
    let (ns, na) = (q_prev.num_states(), q_prev.num_actions());
    if bellman_abs_error.len() != ns * na || q_star.values().len() != ns * na {
        return Err(Error::InvalidArgument("optimal-p inputs disagree on the pair count".into()));
    }
    let mass: Vec<f64> = q_prev
        .abs_diff(q_star)
        .iter()
        .zip(bellman_abs_error)
        .map(|(e, b)| (-e).exp() * b.abs())
        .collect();
    if mass.iter().all(|m| *m == 0.0) {
        return Ok(DistSA::uniform(ns, na));
    }
    DistSA::from_weights(ns, na, mass)
}

/// Priorities `(|e| + ε)^α` self-normalised.
pub fn bellman_priority_weights(bellman_abs_error: &[f64], alpha: f64, epsilon: f64) -> Result<WeightVec> {
    WeightVec::normalized(bellman_abs_error.iter().map(|e| (e.abs() + epsilon).powf(alpha)).collect())
}

/// `(min, max)` of the Bellman errors over the buffer support.
pub fn c1_c2_bracket(bellman_abs_error: &[f64]) -> Result<(f64, f64)> {
    if bellman_abs_error.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let lo = bellman_abs_error.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = bellman_abs_error.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn next(states: &[usize]) -> Vec<NextRef> {
        states
            .iter()
            .map(|s| NextRef {
                state: *s,
                action: 0,
                terminal: false,
            })
            .collect()
    }

    #[test]
    fn delta_target_examples() {
        let terminal = [NextRef {
            state: 0,
            action: 0,
            terminal: true,
        }];
        assert_eq!(delta_targets(&|_, _| 5.0, &terminal, &[0.0], 0.9), vec![0.0]);
        let t = delta_targets(&|_, _| 2.0, &next(&[1]), &[0.5], 0.9);
        assert!((t[0] - 2.3).abs() < 1e-15);
    }

    #[test]
    fn delta_decays_geometrically_without_bellman_error() {
        let mut delta = 4.0;
        for k in 1..=20 {
            delta = delta_targets(&|_, _| delta, &next(&[0]), &[0.0], 0.9)[0];
            assert!((delta - 4.0 * 0.9f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_item_discor_weights() {
        let delta = |s: usize, _: usize| s as f64;
        let w = discor_weights(&delta, &next(&[0, 1]), 0.9, 10.0).unwrap();
        // 2/(1 + e^{−0.09}) evaluated independently at high precision
        assert!((w.as_slice()[0] - 1.044_969_649_583_6).abs() < 1e-12);
        assert!((w.as_slice()[1] - 0.955_030_350_416_4).abs() < 1e-12);
        assert!((w.as_slice()[0] - 1.044975).abs() < 1e-5);
        // unnormalised ratio is exp(−0.09)
        assert!((w.as_slice()[1] / w.as_slice()[0] - 0.913931).abs() < 1e-6);
        let q_prev = QTable::from_values(2, 1, vec![0.0, 1.0]).unwrap();
        let q_star = QTable::zeros(2, 1);
        let o = oracle_discor_weights(&q_prev, &q_star, &next(&[0, 1]), 0.9, 10.0).unwrap();
        assert_eq!(o, w);
        let same = oracle_discor_weights(&q_star, &q_star, &next(&[0, 1]), 0.9, 10.0).unwrap();
        assert_eq!(same, WeightVec::ones(2));
    }

    #[test]
    fn constant_delta_and_huge_tau_are_uniform() {
        let w = discor_weights(&|_, _| 3.0, &next(&[0, 1, 2]), 0.9, 10.0).unwrap();
        assert_eq!(w, WeightVec::ones(3));
        let w = discor_weights(&|s, _| s as f64, &next(&[0, 5, 9]), 0.99, 1e9).unwrap();
        assert!(w.as_slice().iter().all(|x| (x - 1.0).abs() < 1e-8));
    }

    #[test]
    fn terminal_successor_gets_unit_weight_before_normalisation() {
        let items = [
            NextRef {
                state: 0,
                action: 0,
                terminal: true,
            },
            NextRef {
                state: 0,
                action: 0,
                terminal: false,
            },
        ];
        let w = discor_weights(&|_, _| 1.0, &items, 0.9, 1.0).unwrap();
        let ratio = w.as_slice()[1] / w.as_slice()[0];
        assert!((ratio - (-0.9f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(update_temperature(10.0, 0.3, 1e-4, &[10.0, 10.0]).unwrap(), 10.0);
        assert!((update_temperature(10.0, 0.005, 1e-4, &[0.0]).unwrap() - 9.95).abs() < 1e-12);
        assert_eq!(update_temperature(1e-4, 1.0, 1e-4, &[0.0]).unwrap(), 1e-4);
        assert!(update_temperature(10.0, 0.005, 1e-4, &[]).is_err());
    }

    #[test]
    fn optimal_p_examples() {
        let q_star = QTable::zeros(1, 3);
        let q_prev = QTable::from_values(1, 3, vec![0.0, 1.0, -2.0]).unwrap();
        let p = optimal_p_distribution(&q_prev, &q_star, &[1.0, 1.0, 1.0]).unwrap();
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        let expected = [1.0 / z, (-1.0f64).exp() / z, (-2.0f64).exp() / z];
        for (a, b) in p.mass().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = optimal_p_distribution(&q_prev, &q_star, &[0.0; 3]).unwrap();
        assert_eq!(p, DistSA::uniform(1, 3));
        let p = optimal_p_distribution(&q_star, &q_star, &[2.0; 3]).unwrap();
        assert_eq!(p, DistSA::uniform(1, 3));
    }

    #[test]
    fn priority_examples() {
        let w = bellman_priority_weights(&[0.0, 3.0], 1.0, 1e-3).unwrap();
        assert!((w.as_slice()[0] - 0.002 / 3.002).abs() < 1e-15);
        assert!((w.as_slice()[0] - 0.000666).abs() < 1e-6);
        assert!((w.as_slice()[1] - 1.999333).abs() < 1e-6);
        assert_eq!(bellman_priority_weights(&[2.0, 2.0], 1.0, 1e-3).unwrap(), WeightVec::ones(2));
        assert_eq!(bellman_priority_weights(&[0.0, 7.0], 0.0, 1e-3).unwrap(), WeightVec::ones(2));
    }

    #[test]
    fn bracket() {
        assert_eq!(c1_c2_bracket(&[0.1, 0.4, 0.2]).unwrap(), (0.1, 0.4));
        assert_eq!(c1_c2_bracket(&[0.3; 4]).unwrap(), (0.3, 0.3));
        assert!(c1_c2_bracket(&[]).is_err());
    }

    proptest! {
        #[test]
        fn weights_have_mean_one(values in proptest::collection::vec(0.0f64..50.0, 1..64), tau in 1e-3f64..100.0) {
            let w = weights_from_bootstrap(&values, 0.95, tau).unwrap();
            let mean = w.as_slice().iter().sum::<f64>() / w.len() as f64;
            prop_assert!((mean - 1.0).abs() < 1e-9);
            prop_assert!(w.as_slice().iter().all(|x| x.is_finite() && *x >= 0.0));
        }

        #[test]
        fn larger_error_never_gets_larger_weight(values in proptest::collection::vec(0.0f64..20.0, 2..32), tau in 0.01f64..50.0) {
            let w = weights_from_bootstrap(&values, 0.9, tau).unwrap();
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] > values[j] {
                        prop_assert!(w.as_slice()[i] <= w.as_slice()[j]);
                    }
                }
            }
        }
    }
}
