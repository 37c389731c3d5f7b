//! Benchmark MDPs and their feature maps, addressable by string id.
//!
//! Recognised ids:
//!
//! - `grid16onehot`, `grid16randomobs`, `grid16smoothobs` (dense reward) and
//!   `grid16onehotsparse`, `grid16randomsparse`, `grid16smoothsparse` (sparse reward)
//! - `grid:W=8,H=8,reward=sparse,obs=random[,obs_dim=16]`
//! - `tree:H=5[,leaf=3][,gamma=0.95][,eps=0.3]`; without `leaf` the rewarding leaf is drawn from the seed
//! - `cliffwalk:8`
//! - `random:S=10,A=3[,gamma=0.9][,obs_dim=4]`

mod cliff;
pub mod features;
mod grid;
pub mod random;
mod tree;

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub use cliff::{build_cliffwalk, CliffLayout};
pub use features::{representation_residual, FeatureMap};
pub use grid::{build_gridworld, GridSpec, ObsStyle, RewardStyle, DOWN, LEFT, RIGHT, UP};
pub use tree::{build_tree, build_tree_features, feature_block_dim, TreeSpec, REWARD_ACTION};

use crate::mdp::TabularMdp;
use crate::rng::{self, Stream};
use crate::{Error, Result};

pub const DEFAULT_TREE_EPSILON: f64 = 0.3;
pub const DEFAULT_TREE_DISCOUNT: f64 = 0.95;

/// A constructed benchmark: dynamics, features for the parametric approximators and
/// the evaluation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub id: String,
    pub mdp: TabularMdp,
    pub features: FeatureMap,
    pub horizon: usize,
    pub entropy_coeff: f64,
    pub tree: Option<TreeSpec>,
}

impl Environment {
    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        self.mdp = self.mdp.with_discount(discount)?;
        if let Some(t) = &mut self.tree {
            t.discount = discount;
        }
        Ok(self)
    }
}

fn kv_args(id: &str, body: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::UnknownEnv(format!("{id}: expected key=value, got `{part}`")))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::UnknownEnv(format!("{id}: duplicate key `{}`", k.trim())));
        }
    }
    Ok(out)
}

fn take<T: std::str::FromStr>(id: &str, args: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match args.remove(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::UnknownEnv(format!("{id}: bad value `{v}` for `{key}`"))),
    }
}

fn finish(id: &str, args: BTreeMap<String, String>) -> Result<()> {
    match args.keys().next() {
        Some(k) => Err(Error::UnknownEnv(format!("{id}: unknown key `{k}`"))),
        None => Ok(()),
    }
}

fn grid_env(id: &str, spec: GridSpec) -> Result<Environment> {
    let (mdp, features) = build_gridworld(&spec)?;
    Ok(Environment {
        id: id.to_string(),
        mdp,
        features,
        horizon: 4 * (spec.width + spec.height),
        entropy_coeff: spec.entropy_coeff,
        tree: None,
    })
}

/// Build an environment from its registry id. `seed` drives observation features and,
/// for trees without an explicit leaf, the rewarding leaf.
pub fn make_env(id: &str, seed: u64) -> Result<Environment> {
    let named = |reward, obs| grid_env(id, GridSpec::new(16, 16, reward, obs, seed));
    match id {
        "grid16onehot" => return named(RewardStyle::Dense, ObsStyle::OneHot),
        "grid16randomobs" => return named(RewardStyle::Dense, ObsStyle::Random),
        "grid16smoothobs" => return named(RewardStyle::Dense, ObsStyle::Smooth),
        "grid16onehotsparse" => return named(RewardStyle::Sparse, ObsStyle::OneHot),
        "grid16randomsparse" => return named(RewardStyle::Sparse, ObsStyle::Random),
        "grid16smoothsparse" => return named(RewardStyle::Sparse, ObsStyle::Smooth),
        _ => {}
    }
    let (family, body) = id.split_once(':').ok_or_else(|| Error::UnknownEnv(id.to_string()))?;
    match family {
        "grid" => {
            let mut args = kv_args(id, body)?;
            let width = take(id, &mut args, "W")?.unwrap_or(16);
            let height = take(id, &mut args, "H")?.unwrap_or(16);
            let reward = match take::<String>(id, &mut args, "reward")?.as_deref() {
                None | Some("dense") => RewardStyle::Dense,
                Some("sparse") => RewardStyle::Sparse,
                Some(other) => return Err(Error::UnknownEnv(format!("{id}: reward style `{other}`"))),
            };
            let obs = match take::<String>(id, &mut args, "obs")?.as_deref() {
                None | Some("onehot") => ObsStyle::OneHot,
                Some("random") => ObsStyle::Random,
                Some("smooth") => ObsStyle::Smooth,
                Some(other) => return Err(Error::UnknownEnv(format!("{id}: obs style `{other}`"))),
            };
            let mut spec = GridSpec::new(width, height, reward, obs, seed);
            if let Some(d) = take(id, &mut args, "obs_dim")? {
                spec.obs_dim = d;
            }
            finish(id, args)?;
            if width.checked_mul(height).is_none_or(|n| n > 4096) {
                return Err(Error::UnknownEnv(format!("{id}: grid too large")));
            }
            grid_env(id, spec)
        }
        "tree" => {
            let mut args = kv_args(id, body)?;
            let depth: usize = take(id, &mut args, "H")?
                .ok_or_else(|| Error::UnknownEnv(format!("{id}: missing depth H")))?;
            if depth == 0 || depth > 12 {
                return Err(Error::UnknownEnv(format!("{id}: depth must be in 1..=12")));
            }
            let leaf = match take(id, &mut args, "leaf")? {
                Some(l) => l,
                None => rng::stream(seed, Stream::Layout).random_range(0..1usize << (depth - 1)),
            };
            let discount = take(id, &mut args, "gamma")?.unwrap_or(DEFAULT_TREE_DISCOUNT);
            let epsilon = take(id, &mut args, "eps")?.unwrap_or(DEFAULT_TREE_EPSILON);
            finish(id, args)?;
            let spec = TreeSpec {
                depth,
                reward_leaf_index: leaf,
                discount,
            };
            let mdp = build_tree(&spec)?;
            let features = build_tree_features(&spec, epsilon, seed)?;
            Ok(Environment {
                id: id.to_string(),
                mdp,
                features,
                horizon: depth,
                entropy_coeff: 0.0,
                tree: Some(spec),
            })
        }
        "cliffwalk" => {
            let length: usize = body
                .trim()
                .parse()
                .map_err(|_| Error::UnknownEnv(format!("{id}: bad length")))?;
            if length > 4096 {
                return Err(Error::UnknownEnv(format!("{id}: cliffwalk too long")));
            }
            let (mdp, features) = build_cliffwalk(length, seed)?;
            Ok(Environment {
                id: id.to_string(),
                mdp,
                features,
                horizon: 4 * (length + 2),
                entropy_coeff: 0.0,
                tree: None,
            })
        }
        "random" => {
            let mut args = kv_args(id, body)?;
            let ns: usize = take(id, &mut args, "S")?.unwrap_or(10);
            let na: usize = take(id, &mut args, "A")?.unwrap_or(3);
            let discount = take(id, &mut args, "gamma")?.unwrap_or(0.9);
            let obs_dim: usize = take(id, &mut args, "obs_dim")?.unwrap_or(ns.div_ceil(2).max(1));
            finish(id, args)?;
            if ns == 0 || na == 0 || obs_dim == 0 || ns > 512 || na > 16 || obs_dim > 512 {
                return Err(Error::UnknownEnv(format!("{id}: sizes out of range")));
            }
            if !(discount > 0.0 && discount < 1.0) {
                return Err(Error::UnknownEnv(format!("{id}: gamma must be in (0, 1)")));
            }
            let mdp = random_mdp_env(ns, na, discount, seed);
            let mut rng = rng::stream(seed, Stream::Features);
            let obs: Vec<Vec<f64>> = (0..ns)
                .map(|_| {
                    let v: Vec<f64> = (0..obs_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect();
            let features = FeatureMap::from_state_observations(&obs, na, seed)?;
            Ok(Environment {
                id: id.to_string(),
                mdp,
                features,
                horizon: 50,
                entropy_coeff: 0.0,
                tree: None,
            })
        }
        _ => Err(Error::UnknownEnv(id.to_string())),
    }
}

fn random_mdp_env(ns: usize, na: usize, discount: f64, seed: u64) -> TabularMdp {
    random::random_mdp(ns, na, discount, &mut rng::stream(seed, Stream::Environment))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_grids() {
        for id in ["grid16onehot", "grid16randomobs", "grid16smoothobs", "grid16smoothsparse", "grid16randomsparse"] {
            let env = make_env(id, 1).unwrap();
            assert_eq!(env.mdp.num_states(), 256);
            assert_eq!(env.horizon, 128);
        }
    }

    #[test]
    fn parameterised_ids() {
        let env = make_env("tree:H=3,leaf=2", 0).unwrap();
        assert_eq!(env.tree.as_ref().unwrap().reward_leaf_index, 2);
        assert_eq!(env.mdp.num_states(), 8);
        let env = make_env("grid:W=3,H=2,reward=sparse,obs=smooth,obs_dim=6", 0).unwrap();
        assert_eq!(env.features.dim(), 24);
        assert_eq!(make_env("cliffwalk:8", 0).unwrap().mdp.num_states(), 11);
        let env = make_env("random:S=7,A=2,gamma=0.8", 4).unwrap();
        assert_eq!(env.mdp.discount(), 0.8);
        assert_eq!(env.features.dim(), 8);
    }

    #[test]
    fn tree_leaf_from_seed_is_stable() {
        let a = make_env("tree:H=6", 11).unwrap();
        let b = make_env("tree:H=6", 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_ids() {
        for id in ["", "grid17", "tree:", "tree:H=x", "tree:H=3,foo=1", "tree:H=3,H=4", "cliffwalk:", "random:S=0", "grid:W=1,H=1", "space:1"] {
            assert!(make_env(id, 0).is_err(), "{id}");
        }
    }
}
