use std::ops::ControlFlow;

use crate::approx::ApproxSpec;
use crate::envs::{make_env, representation_residual};
use crate::trainer::{run_exact, Exploration, TrainConfig, Mode};
use crate::weighting::SchemeKind;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityOptions {
    pub epsilon: f64,
    pub discount: f64,
    /// Fraction of `‖Q*‖∞` in the convergence threshold.
    pub target_fraction: f64,
    pub budget: usize,
    /// Fixed Boltzmann temperature of the behaviour policies.
    pub policy_temperature: f64,
}

impl Default for ComplexityOptions {
    fn default() -> Self {
        ComplexityOptions {
            epsilon: 0.3,
            discount: 0.95,
            target_fraction: 0.05,
            budget: 5000,
            policy_temperature: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub depth: usize,
    pub scheme: SchemeKind,
    pub seed: u64,
    /// First `k` with `‖Q_k − Q*‖∞ ≤ threshold`; `None` if the budget ran out or the
    /// iterates stopped moving first.
    pub iterations: Option<usize>,
    /// Iterations actually run.
    pub ran: usize,
    pub threshold: f64,
    /// Representation residual `δ` of the feature map.
    pub delta_feature: f64,
}

/// Exact-mode linear FQI on the tree family, recording iterations to reach
/// `target_fraction · ‖Q*‖∞ + δ` for each `(H, scheme, seed)`.
///
/// Runs whose distribution is a fixed function of the current iterate (on-policy,
/// uniform) stop early once `Q_k = Q_{k−1}` to machine precision, since they can no
/// longer move.
pub fn iteration_complexity_sweep(
    depths: &[usize],
    schemes: &[SchemeKind],
    seeds: &[u64],
    opts: &ComplexityOptions,
) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::new();
    for &depth in depths {
        for &seed in seeds {
            let id = format!("tree:H={depth},gamma={},eps={}", opts.discount, opts.epsilon);
            let env = make_env(&id, seed)?;
            for &scheme in schemes {
                rows.push(one(&env, depth, scheme, seed, opts)?);
            }
        }
    }
    Ok(rows)
}

fn one(env: &crate::envs::Environment, depth: usize, scheme: SchemeKind, seed: u64, opts: &ComplexityOptions) -> Result<ComplexityRow> {
    let q_star = crate::mdp::value_iteration(&env.mdp, 1e-12)?;
    let (_, delta_feature) = representation_residual(&env.features, &q_star)?;
    let threshold = opts.target_fraction * q_star.max_abs() + delta_feature;
    let stationary = matches!(scheme, SchemeKind::OnPolicy | SchemeKind::Uniform);

    let mut config = TrainConfig::new(&env.id, scheme, Mode::Exact);
    config.approx = ApproxSpec::Linear;
    config.iterations = opts.budget;
    config.seed = seed;
    config.exploration = Exploration::fixed(opts.policy_temperature);

    let mut hit = None;
    let mut ran = 0;
    run_exact(&config, env, &mut |snap| {
        ran = snap.k;
        if snap.q.sup_distance(&q_star) <= threshold {
            hit = Some(snap.k);
            return ControlFlow::Break(());
        }
        if stationary && snap.q.sup_distance(snap.q_prev) <= 1e-12 {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    Ok(ComplexityRow {
        depth,
        scheme,
        seed,
        iterations: hit,
        ran,
        threshold,
        delta_feature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_one_converges_immediately() {
        let rows = iteration_complexity_sweep(&[1], &[SchemeKind::OnPolicy, SchemeKind::DisCor], &[0, 1], &ComplexityOptions::default()).unwrap();
        for r in rows {
            assert!(r.iterations.is_some_and(|k| k <= 2), "{r:?}");
        }
    }
}
