//! Binary-tree MDP family with a single rewarding leaf action.
//!
//! Nodes are stored in heap order: node `n` at level `⌊log2(n+1)⌋` has children `2n+1`
//! (action 0) and `2n+2` (action 1). Levels run `0..H`; every action at a level-`H−1` leaf
//! enters one shared absorbing sink, which is the only terminal state. The tree therefore
//! has `2^H − 1` decision states plus the sink.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use super::features::FeatureMap;
use crate::mdp::TabularMdp;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Constant in the per-level block dimension `⌈c · ln(S·A) / ε²⌉`.
pub const FEATURE_DIM_CONSTANT: f64 = 8.0;
pub const FEATURE_RETRY_BUDGET: usize = 100;
/// Action taken at `s*` to collect the reward.
pub const REWARD_ACTION: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    pub depth: usize,
    /// Index of `s*` among the `2^{H−1}` leaves, left to right.
    pub reward_leaf_index: usize,
    pub discount: f64,
}

impl TreeSpec {
    pub fn num_nodes(&self) -> usize {
        (1usize << self.depth) - 1
    }

    pub fn sink(&self) -> usize {
        self.num_nodes()
    }

    pub fn num_states(&self) -> usize {
        self.num_nodes() + 1
    }

    pub fn reward_state(&self) -> usize {
        (1usize << (self.depth - 1)) - 1 + self.reward_leaf_index
    }

    /// Level of a state; the sink sits at level `H`.
    pub fn level(&self, s: usize) -> usize {
        if s >= self.num_nodes() {
            self.depth
        } else {
            (usize::BITS - 1 - (s + 1).leading_zeros()) as usize
        }
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 20 {
            return Err(Error::InvalidArgument(format!("tree depth {} outside 1..=20", self.depth)));
        }
        if self.reward_leaf_index >= 1usize << (self.depth - 1) {
            return Err(Error::InvalidArgument(format!(
                "reward leaf index {} out of range for depth {}",
                self.reward_leaf_index, self.depth
            )));
        }
        Ok(())
    }
}

pub fn build_tree(spec: &TreeSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let ns = spec.num_states();
    let na = 2;
    let nodes = spec.num_nodes();
    let sink = spec.sink();
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let pair = s * na + a;
            let next = if s == sink {
                sink
            } else {
                let child = 2 * s + 1 + a;
                if child < nodes {
                    child
                } else {
                    sink
                }
            };
            transition[pair * ns + next] = 1.0;
        }
    }
    reward[spec.reward_state() * na + REWARD_ACTION] = 1.0;
    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    let mut terminal = vec![false; ns];
    terminal[sink] = true;
    TabularMdp::new(ns, na, transition, reward, spec.discount, initial, terminal)
}

/// Per-level block dimension `⌈c · ln(S·A) / ε²⌉`.
pub fn feature_block_dim(spec: &TreeSpec, epsilon: f64) -> usize {
    let pairs = (spec.num_states() * 2) as f64;
    (FEATURE_DIM_CONSTANT * pairs.ln() / (epsilon * epsilon)).ceil() as usize
}

/// Random unit-norm features, zero-padded so that each level occupies its own block.
///
/// Pairs on different levels are exactly orthogonal; within a level the vectors are
/// resampled until every pairwise inner product is at most `epsilon` in magnitude.
pub fn build_tree_features(spec: &TreeSpec, epsilon: f64, seed: u64) -> Result<FeatureMap> {
    spec.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let block = feature_block_dim(spec, epsilon);
    let levels = spec.depth + 1;
    let rows = spec.num_states() * 2;
    let dim = block * levels;
    let mut rng = rng::stream(seed, Stream::Features);
    let mut best = f64::INFINITY;
    for _ in 0..FEATURE_RETRY_BUDGET {
        let mut data = vec![0.0; rows * dim];
        for pair in 0..rows {
            let offset = spec.level(pair / 2) * block;
            let v = DVector::<f64>::from_iterator(block, (0..block).map(|_| StandardNormal.sample(&mut rng)));
            let v = v.normalize();
            data[pair * dim + offset..pair * dim + offset + block].copy_from_slice(v.as_slice());
        }
        let mut features = FeatureMap::new(rows, dim, data, seed)?;
        let defect = features.orthogonality_defect();
        if defect <= epsilon {
            features.epsilon = Some(epsilon);
            return Ok(features);
        }
        best = best.min(defect);
    }
    Err(Error::FeatureConstruction {
        attempts: FEATURE_RETRY_BUDGET,
        best,
        epsilon,
    })
}
