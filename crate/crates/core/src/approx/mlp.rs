use nalgebra::DMatrix;
use rand::Rng as _;

use super::Target;
use crate::envs::FeatureMap;
use crate::rng::Rng;

/// Fully connected network with tanh hidden layers and a single linear output.
///
/// Parameters are stored layer by layer, each as a row-major `out × in` weight block
/// followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
    pub step_size: f64,
    pub steps: u64,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// `widths` lists every layer including input and the final output of width 1.
    /// Weights are uniform in `±1/√fan_in`, biases start at zero.
    pub fn new(widths: Vec<usize>, step_size: f64, rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2 && widths.iter().all(|w| *w > 0) && widths[widths.len() - 1] == 1);
        let mut params = Vec::with_capacity(param_count(&widths));
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Mlp {
            widths,
            params,
            step_size,
            steps: 0,
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Forward pass keeping every layer's post-activation output.
    fn forward_all(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.widths.len() - 2;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.widths.len());
        let mut offset = 0;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let x: &[f64] = if l == 0 { input } else { &acts[l - 1] };
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let mut out = bias.to_vec();
            // one-hot style inputs are mostly zero; iterate the nonzero columns only
            let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
            for (j, o) in out.iter_mut().enumerate() {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                *o += nz.iter().map(|(i, v)| row[*i] * v).sum::<f64>();
            }
            if l < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
            offset += fan_in * fan_out + fan_out;
        }
        acts
    }

    pub fn eval(&self, input: &[f64]) -> f64 {
        self.forward_all(input).last().expect("at least one layer")[0]
    }

    fn layer(&self, offset: usize, fan_in: usize, fan_out: usize) -> (DMatrix<f64>, &[f64]) {
        let w = DMatrix::from_row_slice(fan_out, fan_in, &self.params[offset..offset + fan_in * fan_out]);
        let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        (w, b)
    }

    /// Gradient of `(1/N) Σ w_i (Q(x_i) − y_i)²` with the inputs stacked as rows of `x`.
    fn batch_gradient(&self, x: &DMatrix<f64>, y: &[f64], weights: &[f64], n: f64) -> Vec<f64> {
        let layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut acts: Vec<DMatrix<f64>> = Vec::with_capacity(layers);
        let mut mats = Vec::with_capacity(layers);
        for l in 0..layers {
            let (w, b) = self.layer(offsets[l], self.widths[l], self.widths[l + 1]);
            let input = if l == 0 { x } else { &acts[l - 1] };
            let mut z = input * w.transpose();
            for (j, mut col) in z.column_iter_mut().enumerate() {
                col.add_scalar_mut(b[j]);
            }
            if l + 1 < layers {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
            mats.push(w);
        }
        let pred = &acts[layers - 1];
        let mut delta = DMatrix::from_fn(y.len(), 1, |i, _| 2.0 * weights[i] * (pred[(i, 0)] - y[i]) / n);
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let input = if l == 0 { x } else { &acts[l - 1] };
            // column-major in × out is the row-major out × in layout of the weights
            let gw = input.transpose() * &delta;
            let o = offsets[l];
            grad[o..o + fan_in * fan_out].copy_from_slice(gw.as_slice());
            for j in 0..fan_out {
                grad[o + fan_in * fan_out + j] = delta.column(j).sum();
            }
            if l > 0 {
                let mut prev = &delta * &mats[l];
                prev.zip_apply(&acts[l - 1], |p, a| *p *= 1.0 - a * a);
                delta = prev;
            }
        }
        grad
    }

    fn stack(features: &FeatureMap, batch: &[Target], weights: &[f64]) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let kept: Vec<(&Target, f64)> = batch.iter().zip(weights).filter(|(_, w)| **w != 0.0).map(|(t, w)| (t, *w)).collect();
        let x = DMatrix::from_fn(kept.len(), features.dim(), |i, j| features.row(kept[i].0.pair)[j]);
        let y = kept.iter().map(|(t, _)| t.value).collect();
        let w = kept.iter().map(|(_, w)| *w).collect();
        (x, y, w)
    }

    /// Gradient of `(1/N) Σ w_i (Q(φ_i) − y_i)²`.
    pub fn gradient(&self, features: &FeatureMap, batch: &[Target], weights: &[f64]) -> Vec<f64> {
        let (x, y, w) = Self::stack(features, batch, weights);
        if y.is_empty() {
            return vec![0.0; self.params.len()];
        }
        self.batch_gradient(&x, &y, &w, batch.len() as f64)
    }

    pub fn loss(&self, features: &FeatureMap, batch: &[Target], weights: &[f64]) -> f64 {
        let n = batch.len() as f64;
        batch
            .iter()
            .zip(weights)
            .map(|(t, w)| w * (self.eval(features.row(t.pair)) - t.value).powi(2))
            .sum::<f64>()
            / n
    }

    pub fn descend(&mut self, features: &FeatureMap, batch: &[Target], weights: &[f64], steps: usize) {
        let (x, y, w) = Self::stack(features, batch, weights);
        if y.is_empty() {
            self.steps += steps as u64;
            return;
        }
        let n = batch.len() as f64;
        for _ in 0..steps {
            let grad = self.batch_gradient(&x, &y, &w, n);
            for (p, g) in self.params.iter_mut().zip(&grad) {
                *p -= self.step_size * g;
            }
            self.steps += 1;
        }
    }
}
