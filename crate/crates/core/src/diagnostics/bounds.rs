use crate::mdp::{
    apply_bootstrap_transition, bellman_optimality_backup, greedy_policy, max_total_variation, Policy, QTable,
    TabularMdp, TieBreak,
};
use crate::{Error, Result};

/// `k₀ = ⌈log(1 − γ) / log γ⌉`.
pub fn k0(discount: f64) -> usize {
    ((1.0 - discount).ln() / discount.ln()).ceil() as usize
}

/// `α = (2 R_max / (1 − γ)) · max_s D_TV(π, π*)`.
pub fn alpha(mdp: &TabularMdp, pi: &Policy, pi_star: &Policy) -> f64 {
    2.0 * mdp.r_max() / (1.0 - mdp.discount()) * max_total_variation(pi, pi_star)
}

/// `(γ(1 − p̄))^{−H}`, `+∞` on overflow.
pub fn lower_bound_scale_check(discount: f64, min_action_prob: f64, horizon: u32) -> f64 {
    (-(horizon as f64) * (discount * (1.0 - min_action_prob)).ln()).exp()
}

/// Smallest pointwise slack and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slack {
    pub value: f64,
    pub pair: usize,
}

fn min_slack(values: impl Iterator<Item = f64>) -> Slack {
    values.enumerate().fold(
        Slack {
            value: f64::INFINITY,
            pair: 0,
        },
        |best, (pair, value)| if value < best.value { Slack { value, pair } } else { best },
    )
}

/// `min_{s,a} [ |Q_k − B*Q_{k−1}| + γ P^{π_{k−1}} |Q_{k−1} − Q*| + α(π_{k−1}) − |Q_k − Q*| ]`
/// with `π_{k−1}` greedy in `Q_{k−1}`.
pub fn lemma_b1_slack(mdp: &TabularMdp, q_prev: &QTable, q_next: &QTable, q_star: &QTable, pi_star: &Policy) -> Slack {
    let gamma = mdp.discount();
    let pi_prev = greedy_policy(q_prev, TieBreak::LowestIndex);
    let target = bellman_optimality_backup(mdp, q_prev);
    let be = q_next.abs_diff(&target);
    let carried = apply_bootstrap_transition(mdp, &pi_prev, &q_prev.abs_diff(q_star));
    let a = alpha(mdp, &pi_prev, pi_star);
    let lhs = q_next.abs_diff(q_star);
    min_slack((0..lhs.len()).map(|i| be[i] + gamma * carried[i] + a - lhs[i]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub trials: usize,
    pub worst: Slack,
    pub worst_trial: usize,
    pub violations: Vec<usize>,
}

/// Run [`lemma_b1_slack`] over a set of `(Q_{k−1}, Q_k)` pairs, counting slacks below `−tol`.
pub fn verify_lemma_b1(
    mdp_for: &mut dyn FnMut(usize) -> (TabularMdp, QTable, QTable),
    trials: usize,
    tol: f64,
) -> Result<LemmaReport> {
    let mut report = LemmaReport {
        trials,
        worst: Slack {
            value: f64::INFINITY,
            pair: 0,
        },
        worst_trial: 0,
        violations: Vec::new(),
    };
    for t in 0..trials {
        let (mdp, q_prev, q_next) = mdp_for(t);
        let q_star = crate::mdp::value_iteration(&mdp, 1e-12)?;
        let pi_star = greedy_policy(&q_star, TieBreak::LowestIndex);
        let s = lemma_b1_slack(&mdp, &q_prev, &q_next, &q_star, &pi_star);
        if s.value < report.worst.value {
            report.worst = s;
            report.worst_trial = t;
        }
        if s.value < -tol {
            report.violations.push(t);
        }
    }
    Ok(report)
}

/// Incremental bookkeeping for the error-bound check: the exact tabular recursion
/// `Δ'_k = |Q_k − B*Q_{k−1}| + γ P^{π_{k−1}} Δ'_{k−1}` and `A_k = Σ_{i≤k} γ^{k−i} α_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm3Tracker {
    pub delta: Vec<f64>,
    pub alpha_sum: f64,
    pub k: usize,
}

impl Thm3Tracker {
    pub fn new(num_pairs: usize) -> Self {
        Thm3Tracker {
            delta: vec![0.0; num_pairs],
            alpha_sum: 0.0,
            k: 0,
        }
    }

    /// Advance by one iteration and return the slack `min (Δ'_k + A_k − |Q_k − Q*|)`.
    pub fn step(&mut self, mdp: &TabularMdp, q_prev: &QTable, q_next: &QTable, q_star: &QTable, pi_star: &Policy) -> Slack {
        let gamma = mdp.discount();
        let pi_prev = greedy_policy(q_prev, TieBreak::LowestIndex);
        let be = q_next.abs_diff(&bellman_optimality_backup(mdp, q_prev));
        let carried = apply_bootstrap_transition(mdp, &pi_prev, &self.delta);
        self.delta = be.iter().zip(&carried).map(|(b, c)| b + gamma * c).collect();
        self.alpha_sum = gamma * self.alpha_sum + alpha(mdp, &pi_prev, pi_star);
        self.k += 1;
        thm3_slack(&self.delta, self.alpha_sum, q_next, q_star)
    }
}

fn thm3_slack(delta: &[f64], alpha_sum: f64, q: &QTable, q_star: &QTable) -> Slack {
    let err = q.abs_diff(q_star);
    min_slack(delta.iter().zip(&err).map(|(d, e)| d + alpha_sum - e))
}

/// A recorded run: `qs[0]` is `Q_0` and `deltas[k−1]` is `Δ_k` for `k = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundTrace {
    pub qs: Vec<QTable>,
    pub deltas: Vec<Vec<f64>>,
    pub tabular_delta: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thm3Report {
    pub k0: usize,
    /// `(k, slack)` for every iteration, including those before `k₀`.
    pub slacks: Vec<(usize, Slack)>,
    /// First `k ≥ k₀` whose slack is below `−tol`.
    pub first_violation: Option<(usize, Slack)>,
    pub violations: usize,
}

impl Thm3Report {
    pub fn worst_after_k0(&self) -> Option<(usize, Slack)> {
        self.slacks
            .iter()
            .filter(|(k, _)| *k >= self.k0)
            .copied()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
    }
}

/// Check `Δ_k + Σ_{i≤k} γ^{k−i} α_i ≥ |Q_k − Q*| − tol` pointwise for `k ≥ k₀`.
pub fn verify_thm3(mdp: &TabularMdp, q_star: &QTable, trace: &BoundTrace, tol: f64) -> Result<Thm3Report> {
    if !trace.tabular_delta {
        return Err(Error::InvalidArgument("Theorem 3 is checked only for a tabular Δ recursion".into()));
    }
    if trace.qs.len() != trace.deltas.len() + 1 {
        return Err(Error::InvalidArgument("trace needs one more Q table than Δ tables".into()));
    }
    let gamma = mdp.discount();
    let pi_star = greedy_policy(q_star, TieBreak::LowestIndex);
    let k0 = k0(gamma);
    let mut alpha_sum = 0.0;
    let mut report = Thm3Report {
        k0,
        slacks: Vec::with_capacity(trace.deltas.len()),
        first_violation: None,
        violations: 0,
    };
    for (i, delta) in trace.deltas.iter().enumerate() {
        let k = i + 1;
        let pi_prev = greedy_policy(&trace.qs[i], TieBreak::LowestIndex);
        alpha_sum = gamma * alpha_sum + alpha(mdp, &pi_prev, &pi_star);
        let s = thm3_slack(delta, alpha_sum, &trace.qs[k], q_star);
        if k >= k0 && s.value < -tol {
            report.violations += 1;
            report.first_violation.get_or_insert((k, s));
        }
        report.slacks.push((k, s));
    }
    Ok(report)
}
