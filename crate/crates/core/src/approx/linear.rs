use nalgebra::{DMatrix, DVector};

use super::Target;
use crate::envs::FeatureMap;
use crate::{linalg, Result};

pub const RIDGE: f64 = 1e-8;

/// Targets and weights merged per pair: `(pair, total weight, weighted mean target)`.
pub(crate) fn aggregate(batch: &[Target], weights: &[f64]) -> Vec<(usize, f64, f64)> {
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by_key(|i| batch[*i].pair);
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    for i in order {
        let (t, w) = (batch[i], weights[i]);
        match out.last_mut() {
            Some(last) if last.0 == t.pair => {
                last.1 += w;
                last.2 += w * t.value;
            }
            _ => out.push((t.pair, w, w * t.value)),
        }
    }
    for entry in &mut out {
        if entry.1 > 0.0 {
            entry.2 /= entry.1;
        }
    }
    out
}

/// Minimiser of `(1/N) Σ w_i (φ_iᵀθ − y_i)² + λ‖θ‖²` for mean-one weights `w`.
///
/// Duplicate pairs are merged first. When the feature dimension exceeds the number of
/// distinct pairs the equivalent dual system `θ = Φᵀ(DΦΦᵀ + λI)⁻¹Dy` is solved instead.
pub fn ridge_fit(features: &FeatureMap, batch: &[Target], weights: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let n = batch.len() as f64;
    let rows = aggregate(batch, weights);
    let dim = features.dim();
    let m = rows.len();
    let mut phi = DMatrix::<f64>::zeros(m, dim);
    for (i, (pair, _, _)) in rows.iter().enumerate() {
        phi.row_mut(i).copy_from_slice(features.row(*pair));
    }
    let d = DVector::from_iterator(m, rows.iter().map(|r| r.1 / n));
    let y = DVector::from_iterator(m, rows.iter().map(|r| r.2));
    let dy = d.component_mul(&y);
    let theta = if dim <= m {
        let mut dphi = phi.clone();
        for (i, mut row) in dphi.row_iter_mut().enumerate() {
            row *= d[i];
        }
        let mut normal = phi.transpose() * dphi;
        for i in 0..dim {
            normal[(i, i)] += ridge;
        }
        linalg::solve(normal, &(phi.transpose() * dy), "linear projection normal equations")?
    } else {
        let mut system = &phi * phi.transpose();
        for (i, mut row) in system.row_iter_mut().enumerate() {
            row *= d[i];
        }
        for i in 0..m {
            system[(i, i)] += ridge;
        }
        let alpha = linalg::solve(system, &dy, "linear projection dual system")?;
        phi.transpose() * alpha
    };
    Ok(theta.iter().copied().collect())
}
