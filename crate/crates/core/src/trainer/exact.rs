use std::time::Instant;

use super::{Observer, OracleSide, RunOutput, Session, Snapshot, TrainConfig};
use crate::approx::Target;
use crate::envs::Environment;
use crate::mdp::{apply_bootstrap_transition, bellman_optimality_backup, greedy_policy, TieBreak};
use crate::weighting::{
    bellman_priority_weights, c1_c2_bracket, exact_mode_distribution, optimal_p_distribution,
    weights_from_bootstrap, SchemeKind,
};
use crate::{Error, Result};

/// Exact-mode fitted Q-iteration: every pair is a regression target each iteration and
/// the scheme chooses the distribution `D_k` that weights them.
pub fn run_exact(config: &TrainConfig, env: &Environment, observer: &mut Observer) -> Result<RunOutput> {
    let mut run = Session::new(config, env)?;
    let mdp = run.env.mdp.clone();
    let gamma = mdp.discount();
    let pairs = mdp.num_pairs();
    let mut prev_be = vec![0.0; pairs];

    for k in 1..=config.iterations {
        let started = Instant::now();
        let q_prev = run.q.table();
        let d_prev = run.behaviour_marginal(k - 1, &q_prev)?;
        run.scheme.push_marginal(d_prev.clone());
        let greedy_prev = greedy_policy(&q_prev, TieBreak::LowestIndex);

        let targets = if config.mode == super::Mode::Bandit {
            run.oracle.q_star.clone()
        } else {
            bellman_optimality_backup(&mdp, &q_prev)
        };

        // Bootstrapped error estimate that feeds the DisCor-style weights.
        let bootstrap = match config.scheme {
            SchemeKind::DisCor => Some(apply_bootstrap_transition(&mdp, &greedy_prev, &run.delta.target_values())),
            SchemeKind::DisCorOracle => {
                let err = q_prev.abs_diff(&run.oracle.q_star);
                Some(match config.oracle_side {
                    OracleSide::Target => apply_bootstrap_transition(&mdp, &greedy_prev, &err),
                    OracleSide::Current => err,
                })
            }
            _ => None,
        };
        let field: Option<Vec<f64>> = match config.scheme {
            SchemeKind::DisCor | SchemeKind::DisCorOracle => Some(
                weights_from_bootstrap(bootstrap.as_deref().expect("set above"), gamma, run.scheme.tau)?
                    .as_slice()
                    .to_vec(),
            ),
            SchemeKind::BellmanPriority => Some(
                bellman_priority_weights(&prev_be, config.per_alpha, config.per_epsilon)?
                    .as_slice()
                    .to_vec(),
            ),
            SchemeKind::OptimalP => {
                let own_be = q_prev.abs_diff(&bellman_optimality_backup(&mdp, &q_prev));
                Some(optimal_p_distribution(&q_prev, &run.oracle.q_star, &own_be)?.mass().to_vec())
            }
            _ => None,
        };
        let dist = exact_mode_distribution(&run.scheme, field.as_deref())?;

        let batch: Vec<Target> = targets
            .values()
            .iter()
            .enumerate()
            .map(|(pair, value)| Target { pair, value: *value })
            .collect();
        run.q
            .project_weighted(&batch, dist.mass(), config.budget)
            .map_err(|e| Error::Projection {
                iteration: k,
                source: Box::new(e),
            })?;
        let q = run.q.table();
        let be = q.abs_diff(&targets);

        if run.tracks_delta() {
            let carried = apply_bootstrap_transition(&mdp, &greedy_prev, &run.delta.target_values());
            let delta_batch: Vec<Target> = (0..pairs)
                .map(|pair| Target {
                    pair,
                    value: be[pair] + gamma * carried[pair],
                })
                .collect();
            run.delta.fit(&delta_batch, config.budget)?;
        }
        match config.scheme {
            SchemeKind::DisCor => {
                let values = run.delta.values();
                run.scheme.update_temperature(&values)?;
            }
            SchemeKind::DisCorOracle => {
                let err = q.abs_diff(&run.oracle.q_star);
                run.scheme.update_temperature(&err)?;
            }
            _ => {}
        }

        let weights: Vec<f64> = dist.mass().iter().map(|m| m * pairs as f64).collect();
        let stats = crate::weighting::WeightVec::normalized(weights)?.stats();
        let support: Vec<f64> = be
            .iter()
            .zip(dist.mass())
            .filter(|(_, m)| **m > 0.0)
            .map(|(e, _)| *e)
            .collect();
        let bracket = c1_c2_bracket(if support.is_empty() { &be } else { &support })?;
        let record = run.record(k, &q_prev, &q, &d_prev, stats, bracket, started)?;
        prev_be = be;

        let delta_now = run.delta.values();
        let snapshot = Snapshot {
            k,
            q_prev: &q_prev,
            q: &q,
            delta: &delta_now,
            distribution: Some(&dist),
            record: &record,
        };
        if observer(&snapshot).is_break() {
            break;
        }
    }
    Ok(run.finish())
}
