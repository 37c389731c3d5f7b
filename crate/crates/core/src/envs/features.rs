use nalgebra::{DMatrix, DVector};

use crate::{linalg, mdp::QTable, Error, Result};

/// Feature matrix over state-action pairs, `[S·A][dim]`, rows laid out by pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    /// Verified bound on `‖I − ΦΦᵀ‖∞`, when the construction asserts one.
    pub epsilon: Option<f64>,
    pub seed: u64,
}

impl FeatureMap {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>, seed: u64) -> Result<Self> {
        if rows == 0 || dim == 0 || data.len() != rows * dim {
            return Err(Error::InvalidArgument(format!(
                "feature matrix {rows}x{dim} does not match {} values",
                data.len()
            )));
        }
        Ok(FeatureMap {
            rows,
            dim,
            data,
            epsilon: None,
            seed,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        FeatureMap {
            rows: n,
            dim: n,
            data,
            epsilon: Some(0.0),
            seed: 0,
        }
    }

    /// `φ(s, a) = e_a ⊗ obs(s)`: the state observation placed in the block of action `a`.
    pub fn from_state_observations(obs: &[Vec<f64>], num_actions: usize, seed: u64) -> Result<Self> {
        let obs_dim = obs.first().map_or(0, Vec::len);
        let dim = obs_dim * num_actions;
        let mut data = vec![0.0; obs.len() * num_actions * dim];
        for (s, o) in obs.iter().enumerate() {
            for a in 0..num_actions {
                let row = (s * num_actions + a) * dim;
                data[row + a * obs_dim..row + (a + 1) * obs_dim].copy_from_slice(o);
            }
        }
        FeatureMap::new(obs.len() * num_actions, dim, data, seed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.dim, &self.data)
    }

    /// Gram matrix `ΦΦᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let phi = self.to_matrix();
        &phi * phi.transpose()
    }

    /// `‖I − ΦΦᵀ‖∞` as the largest absolute entry, by exhaustive pairwise dot products.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut g = self.gram();
        for i in 0..self.rows {
            g[(i, i)] -= 1.0;
        }
        linalg::max_abs(&g)
    }

    pub fn max_row_norm_error(&self) -> f64 {
        (0..self.rows)
            .map(|i| (self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares fit of a single weight vector to `q`, returning the weights and the
/// representation residual `δ = ‖q − Φw‖∞`.
pub fn representation_residual(features: &FeatureMap, q: &QTable) -> Result<(Vec<f64>, f64)> {
    if q.values().len() != features.rows() {
        return Err(Error::InvalidArgument("Q table and features disagree on the pair count".into()));
    }
    let phi = features.to_matrix();
    let gram = &phi * phi.transpose();
    let target = DVector::from_row_slice(q.values());
    // Dual form: w = Φᵀα with α the min-norm solution of ΦΦᵀα = q.
    let alpha = linalg::least_squares(gram.clone(), &target)?;
    let w = phi.transpose() * &alpha;
    let fitted = &phi * &w;
    let delta = fitted
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((w.iter().copied().collect(), delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_orthonormal() {
        let f = FeatureMap::identity(5);
        assert_eq!(f.orthogonality_defect(), 0.0);
        assert_eq!(f.max_row_norm_error(), 0.0);
    }

    #[test]
    fn action_blocks_are_orthogonal() {
        let obs = vec![vec![0.6, 0.8], vec![1.0, 0.0]];
        let f = FeatureMap::from_state_observations(&obs, 3, 0).unwrap();
        assert_eq!((f.rows(), f.dim()), (6, 6));
        assert_eq!(f.row(1), &[0.0, 0.0, 0.6, 0.8, 0.0, 0.0]);
        let g = f.gram();
        assert!((g[(0, 3)] - 0.6).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn residual_zero_when_representable() {
        let f = FeatureMap::identity(4);
        let q = QTable::from_values(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let (w, delta) = representation_residual(&f, &q).unwrap();
        assert!(delta < 1e-12);
        assert!((w[1] + 2.0).abs() < 1e-12);
    }
}
