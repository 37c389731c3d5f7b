use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::features::FeatureMap;
use crate::mdp::TabularMdp;
use crate::rng::{self, Stream};
use crate::{Error, Result};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// Length scale, in cells, of the smooth observation field.
const SMOOTH_LENGTH_SCALE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardStyle {
    /// Negative Manhattan distance of the next cell to the goal, scaled to [−1, 0].
    Dense,
    /// 1 on entering the goal, 0 elsewhere.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsStyle {
    OneHot,
    Random,
    Smooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub reward_style: RewardStyle,
    pub obs_style: ObsStyle,
    /// Per-state observation size; one-hot observations always use one entry per cell.
    pub obs_dim: usize,
    /// Recorded for the harness; the dynamics do not depend on it.
    pub entropy_coeff: f64,
    pub discount: f64,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, reward_style: RewardStyle, obs_style: ObsStyle, seed: u64) -> Self {
        GridSpec {
            width,
            height,
            reward_style,
            obs_style,
            obs_dim: match obs_style {
                ObsStyle::OneHot => width * height,
                _ => 16,
            },
            entropy_coeff: 0.01,
            discount: 0.95,
            seed,
        }
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn goal(&self) -> usize {
        self.width * self.height - 1
    }
}

/// Four-action gridworld with a terminal goal in the bottom-right cell. Episodes start in
/// a uniformly random non-goal cell; moves into walls leave the agent in place.
pub fn build_gridworld(spec: &GridSpec) -> Result<(TabularMdp, FeatureMap)> {
    if spec.width == 0 || spec.height == 0 || spec.width * spec.height < 2 {
        return Err(Error::InvalidArgument("grid needs at least two cells".into()));
    }
    let ns = spec.width * spec.height;
    let min_obs = match spec.obs_style {
        ObsStyle::OneHot => ns,
        ObsStyle::Random => 1,
        ObsStyle::Smooth => 2,
    };
    if spec.obs_dim < min_obs {
        return Err(Error::InvalidArgument(format!(
            "obs_dim {} too small for {:?} observations (needs {min_obs})",
            spec.obs_dim, spec.obs_style
        )));
    }
    let na = 4;
    let goal = spec.goal();
    let max_dist = (spec.width - 1 + spec.height - 1) as f64;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for y in 0..spec.height {
        for x in 0..spec.width {
            let s = spec.cell(x, y);
            for a in 0..na {
                let pair = s * na + a;
                if s == goal {
                    transition[pair * ns + s] = 1.0;
                    continue;
                }
                let (nx, ny) = match a {
                    UP => (x, y.saturating_sub(1)),
                    DOWN => (x, (y + 1).min(spec.height - 1)),
                    LEFT => (x.saturating_sub(1), y),
                    _ => ((x + 1).min(spec.width - 1), y),
                };
                let next = spec.cell(nx, ny);
                transition[pair * ns + next] = 1.0;
                reward[pair] = match spec.reward_style {
                    RewardStyle::Sparse => f64::from(next == goal),
                    RewardStyle::Dense => {
                        let d = (spec.width - 1 - nx) + (spec.height - 1 - ny);
                        if max_dist > 0.0 {
                            -(d as f64) / max_dist
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
    }
    let mut initial = vec![1.0 / (ns - 1) as f64; ns];
    initial[goal] = 0.0;
    let mut terminal = vec![false; ns];
    terminal[goal] = true;
    let mdp = TabularMdp::new(ns, na, transition, reward, spec.discount, initial, terminal)?;
    let obs = observations(spec);
    let features = FeatureMap::from_state_observations(&obs, na, spec.seed)?;
    Ok((mdp, features))
}

fn observations(spec: &GridSpec) -> Vec<Vec<f64>> {
    let ns = spec.width * spec.height;
    let mut rng = rng::stream(spec.seed, Stream::Features);
    let raw: Vec<Vec<f64>> = match spec.obs_style {
        ObsStyle::OneHot => (0..ns)
            .map(|s| {
                let mut v = vec![0.0; ns];
                v[s] = 1.0;
                v
            })
            .collect(),
        ObsStyle::Random => (0..ns)
            .map(|_| (0..spec.obs_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect(),
        ObsStyle::Smooth => {
            // Random Fourier features of the cell coordinates.
            let freqs: Vec<(f64, f64, f64)> = (0..spec.obs_dim)
                .map(|_| {
                    let wx: f64 = StandardNormal.sample(&mut rng);
                    let wy: f64 = StandardNormal.sample(&mut rng);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    (wx / SMOOTH_LENGTH_SCALE, wy / SMOOTH_LENGTH_SCALE, phase)
                })
                .collect();
            (0..ns)
                .map(|s| {
                    let (x, y) = ((s % spec.width) as f64, (s / spec.width) as f64);
                    freqs.iter().map(|(wx, wy, b)| (wx * x + wy * y + b).cos()).collect()
                })
                .collect()
        }
    };
    raw.into_iter()
        .map(|mut v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            } else {
                v[0] = 1.0;
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::value_iteration;

    #[test]
    fn sixteen_by_sixteen_onehot_dense() {
        let spec = GridSpec::new(16, 16, RewardStyle::Dense, ObsStyle::OneHot, 0);
        let (mdp, features) = build_gridworld(&spec).unwrap();
        assert_eq!((mdp.num_states(), mdp.num_actions()), (256, 4));
        assert_eq!(features.orthogonality_defect(), 0.0);
        assert!(mdp.reward().iter().all(|r| (-1.0..=0.0).contains(r)));
    }

    #[test]
    fn two_cell_sparse_values() {
        let spec = GridSpec::new(2, 1, RewardStyle::Sparse, ObsStyle::OneHot, 0);
        let (mdp, _) = build_gridworld(&spec).unwrap();
        let q = value_iteration(&mdp, 1e-12).unwrap();
        assert!((q.get(0, RIGHT) - 1.0).abs() < 1e-10);
        assert!((q.get(0, LEFT) - 0.95).abs() < 1e-10);
        assert_eq!(q.get(1, RIGHT), 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = GridSpec::new(5, 4, RewardStyle::Dense, ObsStyle::Random, 42);
        assert_eq!(build_gridworld(&spec).unwrap(), build_gridworld(&spec).unwrap());
        let other = GridSpec { seed: 43, ..spec.clone() };
        assert_ne!(build_gridworld(&spec).unwrap().1, build_gridworld(&other).unwrap().1);
    }

    #[test]
    fn obs_dim_too_small() {
        let mut spec = GridSpec::new(4, 4, RewardStyle::Sparse, ObsStyle::OneHot, 0);
        spec.obs_dim = 3;
        assert!(build_gridworld(&spec).is_err());
        let mut spec = GridSpec::new(4, 4, RewardStyle::Sparse, ObsStyle::Smooth, 0);
        spec.obs_dim = 1;
        assert!(build_gridworld(&spec).is_err());
    }

    #[test]
    fn smooth_neighbours_are_more_similar_than_random_pairs() {
        let spec = GridSpec::new(16, 16, RewardStyle::Dense, ObsStyle::Smooth, 7);
        let obs = observations(&spec);
        let cos = |a: usize, b: usize| obs[a].iter().zip(&obs[b]).map(|(x, y)| x * y).sum::<f64>();
        let mut neighbour = 0.0;
        let mut n = 0;
        for y in 0..16 {
            for x in 0..15 {
                neighbour += cos(spec.cell(x, y), spec.cell(x + 1, y));
                n += 1;
            }
        }
        neighbour /= n as f64;
        let mut rng = rng::stream(1, Stream::Layout);
        let random: f64 = (0..2000)
            .map(|_| cos(rng.random_range(0..256), rng.random_range(0..256)))
            .sum::<f64>()
            / 2000.0;
        assert!(neighbour > random + 0.3, "neighbour {neighbour} random {random}");
    }
}
