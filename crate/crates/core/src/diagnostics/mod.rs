//! Oracle-based measurement: value error, corrective-feedback cosine, error-bound
//! slack and the iteration-complexity experiment on the tree family.

mod bounds;
mod complexity;

pub use bounds::{
    alpha, k0, lemma_b1_slack, lower_bound_scale_check, verify_lemma_b1, verify_thm3, BoundTrace, LemmaReport,
    Slack, Thm3Report, Thm3Tracker,
};
pub use complexity::{iteration_complexity_sweep, ComplexityOptions, ComplexityRow};

use crate::mdp::{DistSA, QTable};

/// Metrics of one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub iter: usize,
    pub value_error: f64,
    pub eval_return: f64,
    pub norm_return: f64,
    pub cosine_sim: f64,
    pub w_mean: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub slack_thm3: f64,
    pub slack_lemma: f64,
    pub dtv: f64,
    pub wall_ms: f64,
}

impl RunRecord {
    pub const COLUMNS: [&'static str; 15] = [
        "iter",
        "value_error",
        "return",
        "norm_return",
        "cosine_sim",
        "w_mean",
        "w_min",
        "w_max",
        "tau",
        "c1",
        "c2",
        "slack_thm3",
        "slack_lemma",
        "dtv",
        "wall_ms",
    ];

    /// Every column after `iter`, in schema order.
    pub fn metrics(&self) -> [f64; 14] {
        [
            self.value_error,
            self.eval_return,
            self.norm_return,
            self.cosine_sim,
            self.w_mean,
            self.w_min,
            self.w_max,
            self.tau,
            self.c1,
            self.c2,
            self.slack_thm3,
            self.slack_lemma,
            self.dtv,
            self.wall_ms,
        ]
    }

    pub fn from_metrics(iter: usize, m: [f64; 14]) -> Self {
        RunRecord {
            iter,
            value_error: m[0],
            eval_return: m[1],
            norm_return: m[2],
            cosine_sim: m[3],
            w_mean: m[4],
            w_min: m[5],
            w_max: m[6],
            tau: m[7],
            c1: m[8],
            c2: m[9],
            slack_thm3: m[10],
            slack_lemma: m[11],
            dtv: m[12],
            wall_ms: m[13],
        }
    }
}

/// Which visitation distribution the corrective-feedback cosine is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CosineMarginal {
    /// Per pair, against `d(s, a)`.
    #[default]
    StateAction,
    /// Per state, with both vectors summed over actions.
    State,
}

impl std::str::FromStr for CosineMarginal {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "state-action" | "sa" => Ok(CosineMarginal::StateAction),
            "state" => Ok(CosineMarginal::State),
            _ => Err(crate::Error::InvalidArgument(format!("unknown cosine marginal `{s}`"))),
        }
    }
}

impl CosineMarginal {
    pub fn id(self) -> &'static str {
        match self {
            CosineMarginal::StateAction => "state-action",
            CosineMarginal::State => "state",
        }
    }
}

/// Cosine between the per-pair error change `|q_next − q*| − |q_prev − q*|` and `d`.
/// Zero when either vector is zero.
pub fn corrective_feedback_cosine(q_prev: &QTable, q_next: &QTable, q_star: &QTable, d: &DistSA) -> f64 {
    corrective_feedback_cosine_with(q_prev, q_next, q_star, d, CosineMarginal::StateAction)
}

pub fn corrective_feedback_cosine_with(
    q_prev: &QTable,
    q_next: &QTable,
    q_star: &QTable,
    d: &DistSA,
    marginal: CosineMarginal,
) -> f64 {
    let before = q_prev.abs_diff(q_star);
    let after = q_next.abs_diff(q_star);
    let e: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    match marginal {
        CosineMarginal::StateAction => cosine(&e, d.mass()),
        CosineMarginal::State => {
            let na = q_next.num_actions();
            let per_state: Vec<f64> = e.chunks(na).map(|c| c.iter().sum()).collect();
            cosine(&per_state, &d.state_marginal())
        }
    }
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / (nx * ny)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        let q_star = QTable::zeros(1, 3);
        let q_prev = QTable::zeros(1, 3);
        let d = DistSA::from_weights(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        let same = QTable::from_values(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        assert!((corrective_feedback_cosine(&q_prev, &same, &q_star, &d) - 1.0).abs() < 1e-12);
        // e = −d: errors shrink from d to 0
        assert!((corrective_feedback_cosine(&same, &q_prev, &q_star, &d) + 1.0).abs() < 1e-12);
        let ortho = QTable::from_values(1, 3, vec![0.3, 0.0, 0.0]).unwrap();
        let d2 = DistSA::from_weights(1, 3, vec![0.0, 0.4, 0.6]).unwrap();
        assert_eq!(corrective_feedback_cosine(&q_prev, &ortho, &q_star, &d2), 0.0);
        assert_eq!(corrective_feedback_cosine(&q_prev, &q_prev, &q_star, &d), 0.0);
    }

    #[test]
    fn state_marginal_cosine_sums_actions() {
        let q_star = QTable::zeros(2, 2);
        let q_prev = QTable::zeros(2, 2);
        // error grows by 1 in state 0 only, split across its actions
        let next = QTable::from_values(2, 2, vec![0.25, 0.75, 0.0, 0.0]).unwrap();
        let d = DistSA::from_weights(2, 2, vec![0.1, 0.1, 0.4, 0.4]).unwrap();
        let c = corrective_feedback_cosine_with(&q_prev, &next, &q_star, &d, CosineMarginal::State);
        // (1, 0) against (0.2, 0.8)
        assert!((c - 0.2 / 0.68f64.sqrt()).abs() < 1e-12);
        let sa = corrective_feedback_cosine(&q_prev, &next, &q_star, &d);
        assert!((sa - 0.1 / (0.625f64.sqrt() * 0.34f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn record_metrics_round_trip() {
        let r = RunRecord::from_metrics(3, std::array::from_fn(|i| i as f64 * 0.5));
        assert_eq!(RunRecord::from_metrics(r.iter, r.metrics()), r);
        assert_eq!(RunRecord::COLUMNS.len(), 1 + r.metrics().len());
    }
}
