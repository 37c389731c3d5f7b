use std::sync::Arc;

use crate::approx::{ApproxSpec, Approximator, Target};
use crate::envs::FeatureMap;
use crate::mdp::QTable;
use crate::rng::Rng;
use crate::Result;

pub const DEFAULT_MLP_DELTA_RATE: f64 = 0.005;

/// Δ representation with a soft-updated target copy used for bootstrapping and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    model: Approximator,
    target: Approximator,
    pub rate: f64,
}

impl ErrorModel {
    pub fn tabular(num_states: usize, num_actions: usize) -> Self {
        let model = Approximator::tabular_from(&QTable::zeros(num_states, num_actions));
        ErrorModel {
            target: model.clone(),
            model,
            rate: 1.0,
        }
    }

    /// Error model matched to a Q representation: tabular for tabular and linear Q,
    /// and for a network Q a network with one more hidden layer.
    pub fn for_q(
        q_spec: &ApproxSpec,
        features: Arc<FeatureMap>,
        num_states: usize,
        num_actions: usize,
        rate: Option<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        match q_spec {
            ApproxSpec::Tabular | ApproxSpec::Linear => {
                let mut m = ErrorModel::tabular(num_states, num_actions);
                m.rate = rate.unwrap_or(1.0);
                Ok(m)
            }
            ApproxSpec::Mlp { hidden, step_size } => {
                let mut hidden = hidden.clone();
                hidden.push(hidden.last().copied().unwrap_or(64));
                let spec = ApproxSpec::Mlp {
                    hidden,
                    step_size: *step_size,
                };
                let model = Approximator::new(&spec, features, num_states, num_actions, rng)?;
                Ok(ErrorModel {
                    target: model.clone(),
                    model,
                    rate: rate.unwrap_or(DEFAULT_MLP_DELTA_RATE),
                })
            }
        }
    }

    pub fn model(&self) -> &Approximator {
        &self.model
    }

    pub fn target_model(&self) -> &Approximator {
        &self.target
    }

    pub fn num_actions(&self) -> usize {
        self.model.num_actions()
    }

    /// Δ_target(s, a), clamped at zero.
    pub fn target_value(&self, s: usize, a: usize) -> f64 {
        self.target.eval(s * self.num_actions() + a).max(0.0)
    }

    /// The online Δ over all pairs, clamped at zero.
    pub fn values(&self) -> Vec<f64> {
        self.model.table().into_values().into_iter().map(|v| v.max(0.0)).collect()
    }

    pub fn target_values(&self) -> Vec<f64> {
        self.target.table().into_values().into_iter().map(|v| v.max(0.0)).collect()
    }

    /// Regress Δ onto `batch` with uniform weights, clamp tabular entries at zero and
    /// move the target copy toward the result.
    pub fn fit(&mut self, batch: &[Target], budget: usize) -> Result<()> {
        self.model.project_weighted(batch, &vec![1.0; batch.len()], budget)?;
        if self.model.is_tabular() {
            self.model.params_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        self.target.soft_update_from(&self.model, self.rate)
    }

    /// Overwrite the online and target tables; tabular models only.
    pub fn set_tabular(&mut self, values: &[f64]) {
        assert!(self.model.is_tabular());
        self.model.params_mut().copy_from_slice(values);
        self.target.params_mut().copy_from_slice(values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_fit_is_exact_and_clamped() {
        let mut m = ErrorModel::tabular(2, 2);
        let batch = [Target { pair: 1, value: 2.5 }, Target { pair: 2, value: -1.0 }];
        m.fit(&batch, 0).unwrap();
        assert_eq!(m.values(), vec![0.0, 2.5, 0.0, 0.0]);
        assert_eq!(m.target_value(0, 1), 2.5);
    }

    #[test]
    fn soft_rate_lags_target() {
        let mut m = ErrorModel::tabular(1, 1);
        m.rate = 0.5;
        m.fit(&[Target { pair: 0, value: 4.0 }], 0).unwrap();
        assert_eq!(m.target_value(0, 0), 2.0);
        m.fit(&[Target { pair: 0, value: 4.0 }], 0).unwrap();
        assert_eq!(m.target_value(0, 0), 3.0);
    }

    #[test]
    fn mlp_model_has_extra_layer() {
        let f = Arc::new(FeatureMap::identity(4));
        let mut rng = crate::rng::stream(0, crate::rng::Stream::DeltaInit);
        let m = ErrorModel::for_q(&ApproxSpec::mlp_default(), f, 2, 2, None, &mut rng).unwrap();
        assert_eq!(m.model().mlp().unwrap().widths(), &[4, 64, 64, 64, 1]);
        assert_eq!(m.rate, DEFAULT_MLP_DELTA_RATE);
    }
}
