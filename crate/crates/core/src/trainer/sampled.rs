use std::time::Instant;

use rand::Rng as _;

use super::eval::{sample_initial, sample_next};
use super::{Mode, Observer, OracleSide, ReplayBuffer, RunOutput, Session, Snapshot, TrainConfig};
use crate::approx::Target;
use crate::envs::Environment;
use crate::mdp::boltzmann_policy;
use crate::rng::{self, Stream};
use crate::weighting::{
    bellman_priority_weights, c1_c2_bracket, delta_targets, discor_weights, oracle_discor_weights,
    weights_from_bootstrap, NextRef, SchemeKind, WeightVec,
};
use crate::{Error, Result};

/// Replay-buffer fitted Q-iteration with bootstrapped targets `r + γ max_a′ Q_{k−1}(s′, a′)`.
pub fn run_sampled(config: &TrainConfig, env: &Environment, observer: &mut Observer) -> Result<RunOutput> {
    let mut config = config.clone();
    config.mode = Mode::Sampled;
    sampled_loop(&config, env, observer)
}

/// The sampled loop with the true `Q*(s, a)` as regression target.
pub fn run_bandit(config: &TrainConfig, env: &Environment, observer: &mut Observer) -> Result<RunOutput> {
    let mut config = config.clone();
    config.mode = Mode::Bandit;
    sampled_loop(&config, env, observer)
}

fn sampled_loop(config: &TrainConfig, env: &Environment, observer: &mut Observer) -> Result<RunOutput> {
    let mut run = Session::new(config, env)?;
    let mdp = run.env.mdp.clone();
    let gamma = mdp.discount();
    let na = mdp.num_actions();
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let mut rollout_rng = rng::stream(config.seed, Stream::Rollout);
    let mut batch_rng = rng::stream(config.seed, Stream::Batch);
    let mut state = sample_initial(&mdp, &mut rollout_rng);
    let mut steps = 0usize;

    for k in 1..=config.iterations {
        let started = Instant::now();
        let q_prev = run.q.table();
        let pi = boltzmann_policy(&q_prev, config.exploration.at(k - 1))?;
        let d_prev = run.behaviour_marginal(k - 1, &q_prev)?;

        for _ in 0..config.samples_per_iter {
            let a = pi.sample(state, rollout_rng.random());
            let next = sample_next(&mdp, state, a, &mut rollout_rng);
            let terminal = mdp.is_terminal(next);
            buffer.push(state, a, mdp.reward_at(state, a), next, terminal);
            steps += 1;
            if terminal || steps >= run.env.horizon {
                state = sample_initial(&mdp, &mut rollout_rng);
                steps = 0;
            } else {
                state = next;
            }
        }
        let window = (config.scheme == SchemeKind::OnPolicy).then_some(config.samples_per_iter);
        let batch = buffer.sample(config.batch_size, window, &mut batch_rng)?;

        let next: Vec<NextRef> = batch
            .iter()
            .map(|t| NextRef {
                state: t.next_state,
                action: q_prev.argmax_at(t.next_state),
                terminal: t.terminal,
            })
            .collect();
        let targets: Vec<Target> = batch
            .iter()
            .map(|t| {
                let pair = t.state * na + t.action;
                let value = if config.mode == Mode::Bandit {
                    run.oracle.q_star.get(t.state, t.action)
                } else if t.terminal {
                    t.reward
                } else {
                    t.reward + gamma * q_prev.max_at(t.next_state)
                };
                Target { pair, value }
            })
            .collect();
        let prev_err: Vec<f64> = targets
            .iter()
            .map(|t| (q_prev.values()[t.pair] - t.value).abs())
            .collect();

        let weights = match config.scheme {
            SchemeKind::Uniform | SchemeKind::OnPolicy | SchemeKind::ReplayMixture => WeightVec::ones(batch.len()),
            SchemeKind::BellmanPriority => bellman_priority_weights(&prev_err, config.per_alpha, config.per_epsilon)?,
            SchemeKind::DisCor => {
                let delta = &run.delta;
                discor_weights(&|s, a| delta.target_value(s, a), &next, gamma, run.scheme.tau)?
            }
            SchemeKind::DisCorOracle => match config.oracle_side {
                OracleSide::Target => oracle_discor_weights(&q_prev, &run.oracle.q_star, &next, gamma, run.scheme.tau)?,
                OracleSide::Current => {
                    let err: Vec<f64> = targets
                        .iter()
                        .map(|t| (q_prev.values()[t.pair] - run.oracle.q_star.values()[t.pair]).abs())
                        .collect();
                    weights_from_bootstrap(&err, gamma, run.scheme.tau)?
                }
            },
            SchemeKind::OptimalP => {
                let raw = targets
                    .iter()
                    .zip(&prev_err)
                    .map(|(t, e)| (-(q_prev.values()[t.pair] - run.oracle.q_star.values()[t.pair]).abs()).exp() * e)
                    .collect();
                WeightVec::normalized(raw)?
            }
        };

        run.q
            .project_weighted(&targets, weights.as_slice(), config.budget)
            .map_err(|e| Error::Projection {
                iteration: k,
                source: Box::new(e),
            })?;
        let q = run.q.table();
        let be: Vec<f64> = targets.iter().map(|t| (q.values()[t.pair] - t.value).abs()).collect();

        if run.tracks_delta() {
            let delta = &run.delta;
            let values = delta_targets(&|s, a| delta.target_value(s, a), &next, &be, gamma);
            let delta_batch: Vec<Target> = targets
                .iter()
                .zip(&values)
                .map(|(t, v)| Target { pair: t.pair, value: *v })
                .collect();
            run.delta.fit(&delta_batch, config.budget)?;
            if config.scheme == SchemeKind::DisCor {
                run.scheme.update_temperature(&values)?;
            }
        }
        if config.scheme == SchemeKind::DisCorOracle {
            let err: Vec<f64> = targets
                .iter()
                .map(|t| (q.values()[t.pair] - run.oracle.q_star.values()[t.pair]).abs())
                .collect();
            run.scheme.update_temperature(&err)?;
        }

        let bracket = c1_c2_bracket(&be)?;
        let record = run.record(k, &q_prev, &q, &d_prev, weights.stats(), bracket, started)?;
        let delta_now = run.delta.values();
        let snapshot = Snapshot {
            k,
            q_prev: &q_prev,
            q: &q,
            delta: &delta_now,
            distribution: None,
            record: &record,
        };
        if observer(&snapshot).is_break() {
            break;
        }
    }
    Ok(run.finish())
}
