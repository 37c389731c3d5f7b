//! Training-distribution schemes: baselines, DisCor's error model and weights, and the
//! oracle variants that read the true Q*.

mod error_model;
mod exact;
mod schemes;

use std::fmt;
use std::str::FromStr;

pub use error_model::{ErrorModel, DEFAULT_MLP_DELTA_RATE};
pub use exact::exact_mode_distribution;
pub use schemes::{
    bellman_priority_weights, c1_c2_bracket, delta_targets, discor_weights, optimal_p_distribution,
    oracle_discor_weights, update_temperature, weights_from_bootstrap, NextRef,
};

use crate::mdp::DistSA;
use crate::{Error, Result};

pub const DEFAULT_TAU0: f64 = 10.0;
pub const DEFAULT_TAU_RATE: f64 = 0.005;
pub const TAU_FLOOR: f64 = 1e-4;
pub const PER_ALPHA: f64 = 1.0;
pub const PER_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Uniform,
    OnPolicy,
    ReplayMixture,
    BellmanPriority,
    DisCor,
    DisCorOracle,
    OptimalP,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::Uniform,
        SchemeKind::OnPolicy,
        SchemeKind::ReplayMixture,
        SchemeKind::BellmanPriority,
        SchemeKind::DisCor,
        SchemeKind::DisCorOracle,
        SchemeKind::OptimalP,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SchemeKind::Uniform => "uniform",
            SchemeKind::OnPolicy => "onpolicy",
            SchemeKind::ReplayMixture => "replay",
            SchemeKind::BellmanPriority => "per",
            SchemeKind::DisCor => "discor",
            SchemeKind::DisCorOracle => "discor-oracle",
            SchemeKind::OptimalP => "optimal-p",
        }
    }

    /// Whether the scheme reads Q* and so only runs where the oracle is available.
    pub fn needs_oracle(self) -> bool {
        matches!(self, SchemeKind::DisCorOracle | SchemeKind::OptimalP)
    }

    /// Whether the scheme reweights a base distribution rather than defining one.
    pub fn is_weighted(self) -> bool {
        matches!(self, SchemeKind::BellmanPriority | SchemeKind::DisCor | SchemeKind::DisCorOracle)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Non-negative per-item weights rescaled to batch mean one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVec(Vec<f64>);

impl WeightVec {
    /// Self-normalise `raw`; an all-zero (or empty-mass) input becomes uniform.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if raw.is_empty() {
            return Ok(WeightVec(raw));
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if mean > 0.0 && mean.is_finite() {
            Ok(WeightVec(raw.into_iter().map(|w| w / mean).collect()))
        } else {
            Ok(WeightVec::ones(raw.len()))
        }
    }

    pub fn ones(n: usize) -> Self {
        WeightVec(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(mean, min, max)`.
    pub fn stats(&self) -> (f64, f64, f64) {
        if self.0.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let mean = self.0.iter().sum::<f64>() / self.0.len() as f64;
        let min = self.0.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mean, min, max)
    }
}

/// Per-run scheme bookkeeping: DisCor temperature, last Bellman-error bracket and the
/// on-policy marginals that make up the replay mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub kind: SchemeKind,
    pub tau: f64,
    pub tau_rate: f64,
    pub tau_floor: f64,
    pub bracket: Option<(f64, f64)>,
    history: Vec<DistSA>,
    mixture_sum: Vec<f64>,
}

impl SchemeState {
    pub fn new(kind: SchemeKind, tau0: f64, tau_rate: f64) -> Result<Self> {
        if !(tau0 > 0.0) || !(0.0..=1.0).contains(&tau_rate) {
            return Err(Error::InvalidArgument(format!("bad temperature {tau0} or rate {tau_rate}")));
        }
        Ok(SchemeState {
            kind,
            tau: tau0.max(TAU_FLOOR),
            tau_rate,
            tau_floor: TAU_FLOOR,
            bracket: None,
            history: Vec::new(),
            mixture_sum: Vec::new(),
        })
    }

    pub fn history(&self) -> &[DistSA] {
        &self.history
    }

    pub fn push_marginal(&mut self, d: DistSA) {
        if self.mixture_sum.is_empty() {
            self.mixture_sum = vec![0.0; d.mass().len()];
        }
        for (acc, m) in self.mixture_sum.iter_mut().zip(d.mass()) {
            *acc += m;
        }
        self.history.push(d);
    }

    /// `(1/k) Σ_{i≤k} d^{π_i}`, `None` before any marginal is recorded.
    pub fn replay_mixture(&self) -> Option<DistSA> {
        let last = self.history.last()?;
        let k = self.history.len() as f64;
        let mass = self.mixture_sum.iter().map(|m| m / k).collect();
        Some(DistSA::from_weights(last.num_states(), last.num_actions(), mass).expect("mixture of distributions"))
    }

    pub fn update_temperature(&mut self, delta_values: &[f64]) -> Result<f64> {
        self.tau = update_temperature(self.tau, self.tau_rate, self.tau_floor, delta_values)?;
        Ok(self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_ids_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.id().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("dis-cor".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn weightvec_mean_one() {
        let w = WeightVec::normalized(vec![1.0, 2.0, 3.0, 0.0]).unwrap();
        let (mean, min, max) = w.stats();
        assert!((mean - 1.0).abs() < 1e-12);
        assert_eq!(min, 0.0);
        assert!((max - 2.0).abs() < 1e-12);
        assert_eq!(WeightVec::normalized(vec![0.0; 3]).unwrap(), WeightVec::ones(3));
        assert!(WeightVec::normalized(vec![-1.0]).is_err());
    }

    #[test]
    fn mixture_of_identical_marginals() {
        let d = DistSA::from_weights(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut state = SchemeState::new(SchemeKind::ReplayMixture, 10.0, 0.005).unwrap();
        for _ in 0..3 {
            state.push_marginal(d.clone());
        }
        let mix = state.replay_mixture().unwrap();
        for (a, b) in mix.mass().iter().zip(d.mass()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(state.history().len(), 3);
    }
}
