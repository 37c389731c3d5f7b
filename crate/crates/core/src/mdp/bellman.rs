use nalgebra::{DMatrix, DVector};

use super::{DistSA, Policy, QTable, TabularMdp};
use crate::{linalg, Error, Result};

pub const DEFAULT_VI_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Rule for resolving ties in `argmax`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

fn check_shape(mdp: &TabularMdp, s: usize, a: usize) {
    assert_eq!(
        (mdp.num_states(), mdp.num_actions()),
        (s, a),
        "table shape does not match the MDP"
    );
}

/// `(B*Q)(s,a) = r(s,a) + γ Σ_{s'} T(s'|s,a) max_{a'} Q(s',a')`.
///
/// Terminal states have target 0 and terminal successors contribute no bootstrap value.
pub fn bellman_optimality_backup(mdp: &TabularMdp, q: &QTable) -> QTable {
    check_shape(mdp, q.num_states(), q.num_actions());
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let next_value: Vec<f64> = (0..ns)
        .map(|s| if mdp.is_terminal(s) { 0.0 } else { q.max_at(s) })
        .collect();
    let mut out = QTable::zeros(ns, na);
    for s in 0..ns {
        if mdp.is_terminal(s) {
            continue;
        }
        for a in 0..na {
            let boot: f64 = mdp.successors(s, a).iter().map(|(n, p)| p * next_value[*n]).sum();
            out.set(s, a, mdp.reward_at(s, a) + gamma * boot);
        }
    }
    out
}

/// Q* by repeated backups from zero, to `‖B*Q − Q‖∞ ≤ tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    value_iteration_with(mdp, tol, DEFAULT_MAX_SWEEPS)
}

pub fn value_iteration_with(mdp: &TabularMdp, tol: f64, max_sweeps: usize) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let next = bellman_optimality_backup(mdp, &q);
        residual = next.sup_distance(&q);
        if residual <= tol {
            return Ok(q);
        }
        q = next;
    }
    Err(Error::NonConvergence {
        sweeps: max_sweeps,
        residual,
    })
}

/// Deterministic policy on `argmax_a q(s, a)`.
pub fn greedy_policy(q: &QTable, tie_break: TieBreak) -> Policy {
    let TieBreak::LowestIndex = tie_break;
    let actions: Vec<usize> = (0..q.num_states()).map(|s| q.argmax_at(s)).collect();
    Policy::deterministic(q.num_actions(), &actions)
}

/// `π(a|s) ∝ exp(q(s,a) / temperature)`, evaluated with max-subtraction.
pub fn boltzmann_policy(q: &QTable, temperature: f64) -> Result<Policy> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    let na = q.num_actions();
    let mut probs = Vec::with_capacity(q.values().len());
    for s in 0..q.num_states() {
        let row = q.row(s);
        let m = q.max_at(s);
        let start = probs.len();
        probs.extend(row.iter().map(|v| ((v - m) / temperature).exp()));
        let z: f64 = probs[start..].iter().sum();
        probs[start..].iter_mut().for_each(|p| *p /= z);
    }
    Policy::from_probs(q.num_states(), na, probs)
}

/// Dense `P^π` over pairs: `((s,a),(s',a')) ↦ T(s'|s,a) π(a'|s')`.
pub fn policy_transition_matrix(mdp: &TabularMdp, pi: &Policy) -> DMatrix<f64> {
    check_shape(mdp, pi.num_states(), pi.num_actions());
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let n = ns * na;
    let mut p = DMatrix::zeros(n, n);
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            for &(next, prob) in mdp.successors(s, a) {
                for b in 0..na {
                    p[(row, next * na + b)] += prob * pi.prob(next, b);
                }
            }
        }
    }
    p
}

/// `P^π v` without materialising the matrix.
pub fn apply_policy_transition(mdp: &TabularMdp, pi: &Policy, v: &[f64]) -> Vec<f64> {
    expected_next(mdp, pi, v, false)
}

/// `P^π v` with terminal successors contributing zero, as in the backup operator.
pub fn apply_bootstrap_transition(mdp: &TabularMdp, pi: &Policy, v: &[f64]) -> Vec<f64> {
    expected_next(mdp, pi, v, true)
}

/// `P^π v` with terminal successors contributing zero, the bootstrap convention of the
/// backup operator.
pub(crate) fn expected_next(mdp: &TabularMdp, pi: &Policy, v: &[f64], mask_terminal: bool) -> Vec<f64> {
    check_shape(mdp, pi.num_states(), pi.num_actions());
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    assert_eq!(v.len(), ns * na);
    let state_value: Vec<f64> = (0..ns)
        .map(|s| {
            if mask_terminal && mdp.is_terminal(s) {
                0.0
            } else {
                (0..na).map(|b| pi.prob(s, b) * v[s * na + b]).sum()
            }
        })
        .collect();
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            out[s * na + a] = mdp.successors(s, a).iter().map(|(n, p)| p * state_value[*n]).sum();
        }
    }
    out
}

/// Discounted state marginal `(1−γ) Σ_t γ^t Pr(s_t = s)` by a dense linear solve.
pub fn discounted_state_marginal(mdp: &TabularMdp, pi: &Policy) -> Result<Vec<f64>> {
    check_shape(mdp, pi.num_states(), pi.num_actions());
    let ns = mdp.num_states();
    let gamma = mdp.discount();
    // (I − γ P_πᵀ) d = (1 − γ) ρ
    let mut m = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for a in 0..mdp.num_actions() {
            let pa = pi.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for &(next, prob) in mdp.successors(s, a) {
                m[(next, s)] -= gamma * pa * prob;
            }
        }
    }
    let rhs = DVector::from_iterator(ns, mdp.initial_dist().iter().map(|p| (1.0 - gamma) * p));
    let d = linalg::solve(m, &rhs, "discounted state marginal")?;
    // Round-off can leave entries at -1e-17.
    Ok(d.iter().map(|v| v.max(0.0)).collect())
}

/// Discounted state-action marginal `d^π(s,a) = d^π(s) π(a|s)`.
pub fn discounted_sa_marginal(mdp: &TabularMdp, pi: &Policy) -> Result<DistSA> {
    let ds = discounted_state_marginal(mdp, pi)?;
    let na = mdp.num_actions();
    let mut mass = Vec::with_capacity(ds.len() * na);
    for (s, d) in ds.iter().enumerate() {
        mass.extend((0..na).map(|a| d * pi.prob(s, a)));
    }
    DistSA::from_weights(mdp.num_states(), na, mass)
}

/// `Σ_{s,a} d(s,a) |q − q*|(s,a)`.
pub fn value_error(q: &QTable, q_star: &QTable, d: &DistSA) -> f64 {
    q.abs_diff(q_star)
        .iter()
        .zip(d.mass())
        .map(|(e, m)| e * m)
        .sum()
}

/// `max_s ½ Σ_a |π(a|s) − π'(a|s)|`.
pub fn max_total_variation(pi: &Policy, other: &Policy) -> f64 {
    (0..pi.num_states())
        .map(|s| {
            0.5 * pi
                .row(s)
                .iter()
                .zip(other.row(s))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}
