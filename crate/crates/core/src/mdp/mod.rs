//! Finite MDPs, action-value tables, policies and state-action distributions.

mod bellman;
pub mod text;

pub use bellman::{
    apply_bootstrap_transition, apply_policy_transition, bellman_optimality_backup, boltzmann_policy, discounted_sa_marginal,
    discounted_state_marginal, greedy_policy, max_total_variation, policy_transition_matrix,
    value_error, value_iteration, value_iteration_with, TieBreak, DEFAULT_MAX_SWEEPS,
    DEFAULT_VI_TOL,
};

use crate::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with a dense transition tensor.
///
/// Terminal states are zero-reward absorbing self-loops. Bootstrapping through a terminal
/// successor contributes nothing, so the Bellman target of a pair that enters a terminal
/// state is its immediate reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    initial: Vec<f64>,
    terminal: Vec<bool>,
    successors: Vec<Vec<(usize, f64)>>,
}

impl TabularMdp {
    /// Builds and validates an MDP. `transition` is laid out `[s][a][s']`, `reward` `[s][a]`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidMdp(m));
        if num_states == 0 || num_actions == 0 {
            return invalid("state and action counts must be positive".into());
        }
        let sa = num_states * num_actions;
        if transition.len() != sa * num_states {
            return invalid(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                sa * num_states
            ));
        }
        if reward.len() != sa {
            return invalid(format!("reward has {} entries, expected {sa}", reward.len()));
        }
        if initial.len() != num_states || terminal.len() != num_states {
            return invalid("initial distribution and terminal mask must have one entry per state".into());
        }
        if !(discount > 0.0 && discount < 1.0) {
            return invalid(format!("discount {discount} outside (0, 1)"));
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return invalid(format!("non-finite reward {r}"));
        }
        let mut successors = Vec::with_capacity(sa);
        for pair in 0..sa {
            let row = &transition[pair * num_states..(pair + 1) * num_states];
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return invalid(format!("transition row of pair {pair} has a negative or non-finite entry"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return invalid(format!("transition row of pair {pair} sums to {total}"));
            }
            successors.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(s, p)| (s, *p))
                    .collect(),
            );
        }
        if initial.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid("initial distribution has a negative or non-finite entry".into());
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return invalid(format!("initial distribution sums to {total}"));
        }
        for s in 0..num_states {
            if !terminal[s] {
                continue;
            }
            for a in 0..num_actions {
                let pair = s * num_actions + a;
                if transition[pair * num_states + s] != 1.0 {
                    return invalid(format!("terminal state {s} is not absorbing under action {a}"));
                }
                if reward[pair] != 0.0 {
                    return invalid(format!("terminal state {s} has nonzero reward under action {a}"));
                }
            }
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            transition,
            reward,
            discount,
            initial,
            terminal,
            successors,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same dynamics under a different discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidMdp(format!("discount {discount} outside (0, 1)")));
        }
        Ok(TabularMdp {
            discount,
            ..self.clone()
        })
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// `T(· | s, a)` as a dense row over next states.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.pair(s, a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    /// Nonzero entries of `T(· | s, a)` as `(next_state, probability)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[self.pair(s, a)]
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn reward_at(&self, s: usize, a: usize) -> f64 {
        self.reward[self.pair(s, a)]
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial
    }

    pub fn terminal(&self) -> &[bool] {
        &self.terminal
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Largest absolute reward over non-terminal pairs.
    pub fn r_max(&self) -> f64 {
        (0..self.num_states)
            .filter(|s| !self.terminal[*s])
            .flat_map(|s| (0..self.num_actions).map(move |a| (s, a)))
            .fold(0.0, |m, (s, a)| m.max(self.reward_at(s, a).abs()))
    }
}

/// Action values over all state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        QTable {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::InvalidArgument(format!(
                "Q table needs {} values, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        Ok(QTable {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn max_at(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index among the maximising actions of `s`.
    pub fn argmax_at(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise `|self − other|`.
    pub fn abs_diff(&self, other: &QTable) -> Vec<f64> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect()
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.abs_diff(other).into_iter().fold(0.0, f64::max)
    }
}

/// Stochastic policy `π(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn from_probs(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::InvalidArgument("policy shape mismatch".into()));
        }
        for s in 0..num_states {
            let row = &probs[s * num_actions..(s + 1) * num_actions];
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!("policy row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidArgument(format!("policy row {s} sums to {total}")));
            }
        }
        Ok(Policy {
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        Policy {
            num_states: actions.len(),
            num_actions,
            probs,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Smallest action probability over all states (p̄).
    pub fn min_action_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Samples an action with inverse-CDF on a uniform draw in [0, 1).
    pub fn sample(&self, s: usize, u: f64) -> usize {
        let row = self.row(s);
        let mut acc = 0.0;
        for (a, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

/// Probability distribution over state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistSA {
    num_states: usize,
    num_actions: usize,
    mass: Vec<f64>,
}

impl DistSA {
    /// Normalises non-negative weights into a distribution; all-zero input is rejected.
    pub fn from_weights(num_states: usize, num_actions: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != num_states * num_actions {
            return Err(Error::InvalidArgument("distribution shape mismatch".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("distribution weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("distribution weights sum to zero".into()));
        }
        Ok(DistSA {
            num_states,
            num_actions,
            mass: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions;
        DistSA {
            num_states,
            num_actions,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, s: usize, a: usize) -> f64 {
        self.mass[s * self.num_actions + a]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// State marginal `Σ_a d(s, a)`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.mass
            .chunks(self.num_actions)
            .map(|row| row.iter().sum())
            .collect()
    }
}
