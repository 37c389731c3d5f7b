//! Q-function and error-model representations with weighted projection.

pub mod checkpoint;
pub mod linear;
mod mlp;

use std::sync::Arc;

pub use linear::{ridge_fit, RIDGE};
pub use mlp::Mlp;

use crate::envs::FeatureMap;
use crate::mdp::QTable;
use crate::rng::Rng;
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
pub const DEFAULT_STEP_SIZE: f64 = 1e-2;
pub const DEFAULT_BUDGET: usize = 200;

/// One regression target for the pair `s * num_actions + a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub pair: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApproxSpec {
    Tabular,
    Linear,
    Mlp { hidden: Vec<usize>, step_size: f64 },
}

impl ApproxSpec {
    pub fn mlp_default() -> Self {
        ApproxSpec::Mlp {
            hidden: DEFAULT_HIDDEN.to_vec(),
            step_size: DEFAULT_STEP_SIZE,
        }
    }

    /// Accepts `tabular`, `linear`, `mlp` and `mlp:32x32`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "tabular" => Ok(ApproxSpec::Tabular),
            "linear" => Ok(ApproxSpec::Linear),
            "mlp" => Ok(ApproxSpec::mlp_default()),
            _ => {
                let widths = text
                    .strip_prefix("mlp:")
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown approximator `{text}`")))?;
                let hidden = widths
                    .split('x')
                    .map(|w| match w.parse::<usize>() {
                        Ok(n) if (1..=4096).contains(&n) => Ok(n),
                        _ => Err(Error::InvalidArgument(format!("bad layer width `{w}` in `{text}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ApproxSpec::Mlp {
                    hidden,
                    step_size: DEFAULT_STEP_SIZE,
                })
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            ApproxSpec::Tabular => "tabular".into(),
            ApproxSpec::Linear => "linear".into(),
            ApproxSpec::Mlp { hidden, .. } => {
                let w: Vec<String> = hidden.iter().map(usize::to_string).collect();
                format!("mlp:{}", w.join("x"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Tabular(Vec<f64>),
    Linear(Vec<f64>),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Approximator {
    repr: Repr,
    features: Arc<FeatureMap>,
    num_states: usize,
    num_actions: usize,
}

impl Approximator {
    /// Tabular and linear representations start at zero; networks draw their initial
    /// weights from `rng`.
    pub fn new(
        spec: &ApproxSpec,
        features: Arc<FeatureMap>,
        num_states: usize,
        num_actions: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if features.rows() != num_states * num_actions {
            return Err(Error::InvalidArgument(format!(
                "feature map has {} rows for {} pairs",
                features.rows(),
                num_states * num_actions
            )));
        }
        let repr = match spec {
            ApproxSpec::Tabular => Repr::Tabular(vec![0.0; num_states * num_actions]),
            ApproxSpec::Linear => Repr::Linear(vec![0.0; features.dim()]),
            ApproxSpec::Mlp { hidden, step_size } => {
                if !(*step_size > 0.0) || hidden.contains(&0) {
                    return Err(Error::InvalidArgument("mlp needs positive widths and step size".into()));
                }
                let mut widths = vec![features.dim()];
                widths.extend(hidden);
                widths.push(1);
                Repr::Mlp(Mlp::new(widths, *step_size, rng))
            }
        };
        Ok(Approximator {
            repr,
            features,
            num_states,
            num_actions,
        })
    }

    pub fn tabular_from(q: &QTable) -> Self {
        let n = q.values().len();
        Approximator {
            repr: Repr::Tabular(q.values().to_vec()),
            features: Arc::new(FeatureMap::identity(n)),
            num_states: q.num_states(),
            num_actions: q.num_actions(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn features(&self) -> &Arc<FeatureMap> {
        &self.features
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self.repr, Repr::Tabular(_))
    }

    pub fn variant_tag(&self) -> u8 {
        match self.repr {
            Repr::Tabular(_) => 0,
            Repr::Linear(_) => 1,
            Repr::Mlp(_) => 2,
        }
    }

    /// Shape list recorded in checkpoints.
    pub fn shape(&self) -> Vec<u64> {
        match &self.repr {
            Repr::Tabular(_) => vec![self.num_states as u64, self.num_actions as u64],
            Repr::Linear(w) => vec![w.len() as u64],
            Repr::Mlp(m) => m.widths().iter().map(|w| *w as u64).collect(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match &self.repr {
            Repr::Tabular(v) | Repr::Linear(v) => v,
            Repr::Mlp(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match &mut self.repr {
            Repr::Tabular(v) | Repr::Linear(v) => v,
            Repr::Mlp(m) => m.params_mut(),
        }
    }

    pub fn mlp(&self) -> Option<&Mlp> {
        match &self.repr {
            Repr::Mlp(m) => Some(m),
            _ => None,
        }
    }

    pub fn eval(&self, pair: usize) -> f64 {
        match &self.repr {
            Repr::Tabular(v) => v[pair],
            Repr::Linear(w) => self.features.row(pair).iter().zip(w).map(|(a, b)| a * b).sum(),
            Repr::Mlp(m) => m.eval(self.features.row(pair)),
        }
    }

    pub fn table(&self) -> QTable {
        let values = match &self.repr {
            Repr::Tabular(v) => v.clone(),
            _ => (0..self.num_states * self.num_actions).map(|p| self.eval(p)).collect(),
        };
        QTable::from_values(self.num_states, self.num_actions, values).expect("shape matches")
    }

    /// Weighted projection of `batch` onto the representation.
    ///
    /// Weights are rescaled to mean one before use, so any positive multiple of a weight
    /// vector gives the same result. Tabular entries become the weighted mean of their
    /// targets (untouched when their total weight is zero); linear weights solve the
    /// ridge-damped normal equations; networks take `budget` gradient steps.
    pub fn project_weighted(&mut self, batch: &[Target], weights: &[f64], budget: usize) -> Result<()> {
        if batch.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} targets but {} weights",
                batch.len(),
                weights.len()
            )));
        }
        if batch.is_empty() {
            return Ok(());
        }
        let pairs = self.num_states * self.num_actions;
        if let Some(t) = batch.iter().find(|t| t.pair >= pairs || !t.value.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad target {t:?}")));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        if mean <= 0.0 {
            return Ok(());
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / mean).collect();
        match &mut self.repr {
            Repr::Tabular(v) => {
                for (pair, total, value) in linear::aggregate(batch, &weights) {
                    if total > 0.0 {
                        v[pair] = value;
                    }
                }
            }
            Repr::Linear(w) => *w = ridge_fit(&self.features, batch, &weights, RIDGE)?,
            Repr::Mlp(m) => m.descend(&self.features, batch, &weights, budget),
        }
        Ok(())
    }

    /// `θ ← (1 − rate)·θ + rate·θ_source`; both sides must share a variant and shape.
    pub fn soft_update_from(&mut self, source: &Approximator, rate: f64) -> Result<()> {
        if self.variant_tag() != source.variant_tag() || self.shape() != source.shape() {
            return Err(Error::InvalidArgument("soft update between mismatched approximators".into()));
        }
        for (p, s) in self.params_mut().iter_mut().zip(source.params()) {
            *p = (1.0 - rate) * *p + rate * s;
        }
        Ok(())
    }
}

/// Gradient of `(1/N) Σ w_i (Q(s_i, a_i) − y_i)²` for a network approximator, with the
/// weights used as given.
pub fn mlp_gradient(approx: &Approximator, batch: &[Target], weights: &[f64]) -> Result<Vec<f64>> {
    match &approx.repr {
        Repr::Mlp(m) => Ok(m.gradient(&approx.features, batch, weights)),
        _ => Err(Error::InvalidArgument("mlp_gradient needs an mlp approximator".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use rand::Rng as _;

    fn rng() -> Rng {
        rng::stream(0, Stream::QInit)
    }

    fn random_features(rows: usize, dim: usize, seed: u64) -> Arc<FeatureMap> {
        let mut r = rng::stream(seed, Stream::Features);
        let data = (0..rows * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        Arc::new(FeatureMap::new(rows, dim, data, seed).unwrap())
    }

    #[test]
    fn tabular_single_target() {
        let mut q = Approximator::new(&ApproxSpec::Tabular, Arc::new(FeatureMap::identity(4)), 2, 2, &mut rng()).unwrap();
        q.project_weighted(&[Target { pair: 3, value: 3.0 }], &[1.0], 0).unwrap();
        assert_eq!(q.table().values(), &[0.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn tabular_zero_weight_leaves_entry() {
        let mut q = Approximator::tabular_from(&QTable::from_values(1, 2, vec![5.0, 6.0]).unwrap());
        let batch = [Target { pair: 0, value: 1.0 }, Target { pair: 1, value: 2.0 }];
        q.project_weighted(&batch, &[0.0, 1.0], 0).unwrap();
        assert_eq!(q.params(), &[5.0, 2.0]);
    }

    #[test]
    fn linear_identity_matches_tabular() {
        let f = Arc::new(FeatureMap::identity(6));
        let mut lin = Approximator::new(&ApproxSpec::Linear, f.clone(), 3, 2, &mut rng()).unwrap();
        let mut tab = Approximator::new(&ApproxSpec::Tabular, f, 3, 2, &mut rng()).unwrap();
        let batch: Vec<Target> = (0..6).map(|p| Target { pair: p, value: p as f64 - 2.5 }).collect();
        let w = [0.5, 1.0, 2.0, 1.5, 0.25, 0.75];
        lin.project_weighted(&batch, &w, 0).unwrap();
        tab.project_weighted(&batch, &w, 0).unwrap();
        // the ridge term shrinks each coordinate by (w/N) / (w/N + λ)
        let mean = w.iter().sum::<f64>() / 6.0;
        for p in 0..6 {
            let d = w[p] / mean / 6.0;
            assert!((lin.eval(p) - tab.eval(p) * d / (d + RIDGE)).abs() < 1e-12);
            assert!((lin.eval(p) - tab.eval(p)).abs() < 1e-6);
        }
    }

    #[test]
    fn scaling_weights_changes_nothing() {
        let f = random_features(12, 5, 3);
        let batch: Vec<Target> = (0..12).map(|p| Target { pair: p, value: (p as f64).sin() }).collect();
        let w: Vec<f64> = (0..12).map(|i| 0.1 + i as f64 / 7.0).collect();
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        for spec in [ApproxSpec::Tabular, ApproxSpec::Linear] {
            let base = Approximator::new(&spec, f.clone(), 6, 2, &mut rng()).unwrap();
            let (mut a, mut b) = (base.clone(), base);
            a.project_weighted(&batch, &w, 0).unwrap();
            b.project_weighted(&batch, &w2, 0).unwrap();
            assert_eq!(a.params(), b.params());
        }
    }

    #[test]
    fn zero_weight_rows_barely_move_linear_fit() {
        let f = random_features(10, 4, 8);
        let batch: Vec<Target> = (0..10).map(|p| Target { pair: p, value: p as f64 }).collect();
        let mut w = vec![1.0; 10];
        w[9] = 0.0;
        let mut with = Approximator::new(&ApproxSpec::Linear, f.clone(), 5, 2, &mut rng()).unwrap();
        with.project_weighted(&batch, &w, 0).unwrap();
        let mut without = Approximator::new(&ApproxSpec::Linear, f, 5, 2, &mut rng()).unwrap();
        // dropping the row changes N, which rescales the ridge term only
        let kept: Vec<f64> = w[..9].iter().map(|x| x * 9.0 / 10.0).collect();
        without.project_weighted(&batch[..9], &kept, 0).unwrap();
        for (a, b) in with.params().iter().zip(without.params()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn spec_names_round_trip() {
        for text in ["tabular", "linear", "mlp:64x64", "mlp:8"] {
            assert_eq!(ApproxSpec::parse(text).unwrap().name(), text);
        }
        assert_eq!(ApproxSpec::parse("mlp").unwrap(), ApproxSpec::mlp_default());
        for bad in ["", "mlp:", "mlp:0", "mlp:4x", "conv"] {
            assert!(ApproxSpec::parse(bad).is_err());
        }
    }

    #[test]
    fn mlp_gradient_zero_at_zero_residual() {
        let f = random_features(6, 3, 1);
        let q = Approximator::new(&ApproxSpec::mlp_default(), f, 3, 2, &mut rng()).unwrap();
        let batch: Vec<Target> = (0..6).map(|p| Target { pair: p, value: q.eval(p) }).collect();
        let g = mlp_gradient(&q, &batch, &[1.0; 6]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn single_linear_layer_gradient_by_hand() {
        let f = Arc::new(FeatureMap::new(1, 3, vec![0.5, -1.0, 2.0], 0).unwrap());
        let mut q = Approximator::new(
            &ApproxSpec::Mlp {
                hidden: vec![],
                step_size: 0.1,
            },
            f,
            1,
            1,
            &mut rng(),
        )
        .unwrap();
        q.params_mut().copy_from_slice(&[0.2, 0.3, -0.1, 0.05]);
        // pred = 0.1 − 0.3 − 0.2 + 0.05 = −0.35
        let g = mlp_gradient(&q, &[Target { pair: 0, value: 1.0 }], &[1.5]).unwrap();
        let c = 2.0 * 1.5 * (-0.35 - 1.0);
        let expected = [c * 0.5, -c, c * 2.0, c];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let f = random_features(8, 5, 4);
        let spec = ApproxSpec::Mlp {
            hidden: vec![7, 6],
            step_size: 0.01,
        };
        let mut r = rng::stream(9, Stream::QInit);
        let q = Approximator::new(&spec, f.clone(), 4, 2, &mut r).unwrap();
        let batch: Vec<Target> = (0..8).map(|p| Target { pair: p, value: r.random_range(-1.0..1.0) }).collect();
        let weights: Vec<f64> = (0..8).map(|_| r.random_range(0.0..2.0)).collect();
        let g = mlp_gradient(&q, &batch, &weights).unwrap();
        let mlp = q.mlp().unwrap();
        let h = 1e-6;
        let mut checked = 0;
        for i in (0..mlp.num_params()).step_by(mlp.num_params() / 100 + 1).chain([mlp.num_params() - 1]) {
            let (mut plus, mut minus) = (mlp.clone(), mlp.clone());
            plus.params_mut()[i] += h;
            minus.params_mut()[i] -= h;
            let fd = (plus.loss(&f, &batch, &weights) - minus.loss(&f, &batch, &weights)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3), "param {i}: fd {fd} vs {}", g[i]);
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn mlp_descent_reduces_loss() {
        let f = random_features(10, 4, 2);
        let mut q = Approximator::new(&ApproxSpec::mlp_default(), f.clone(), 5, 2, &mut rng()).unwrap();
        let batch: Vec<Target> = (0..10).map(|p| Target { pair: p, value: 0.3 * p as f64 }).collect();
        let w = vec![1.0; 10];
        let before = q.mlp().unwrap().loss(&f, &batch, &w);
        q.project_weighted(&batch, &w, 200).unwrap();
        assert!(q.mlp().unwrap().loss(&f, &batch, &w) < before);
        assert_eq!(q.mlp().unwrap().steps, 200);
    }

    #[test]
    fn mlp_init_is_seed_reproducible() {
        let f = random_features(4, 3, 2);
        let a = Approximator::new(&ApproxSpec::mlp_default(), f.clone(), 2, 2, &mut rng::stream(5, Stream::QInit)).unwrap();
        let b = Approximator::new(&ApproxSpec::mlp_default(), f, 2, 2, &mut rng::stream(5, Stream::QInit)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params().len(), 3 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    }

    #[test]
    fn soft_update() {
        let f = Arc::new(FeatureMap::identity(2));
        let mut a = Approximator::tabular_from(&QTable::from_values(1, 2, vec![0.0, 4.0]).unwrap());
        let b = Approximator::tabular_from(&QTable::from_values(1, 2, vec![2.0, 0.0]).unwrap());
        a.soft_update_from(&b, 0.25).unwrap();
        assert_eq!(a.params(), &[0.5, 3.0]);
        a.soft_update_from(&b, 1.0).unwrap();
        assert_eq!(a.params(), b.params());
        let lin = Approximator::new(&ApproxSpec::Linear, f, 1, 2, &mut rng()).unwrap();
        assert!(a.soft_update_from(&lin, 0.5).is_err());
    }
}
