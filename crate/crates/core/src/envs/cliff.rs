use rand_distr::{Distribution, StandardNormal};

use super::features::FeatureMap;
use super::grid::{DOWN, LEFT, RIGHT, UP};
use crate::mdp::TabularMdp;
use crate::rng::{self, Stream};
use crate::{Error, Result};

pub const CLIFF_PENALTY: f64 = -1.0;
pub const GOAL_REWARD: f64 = 1.0;
const OBS_DIM: usize = 16;

/// State indices of a cliffwalk of a given length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CliffLayout {
    pub length: usize,
}

impl CliffLayout {
    /// Safe cell `c` of the top row.
    pub fn top(&self, c: usize) -> usize {
        c
    }

    pub fn start(&self) -> usize {
        self.length
    }

    pub fn goal(&self) -> usize {
        self.length + 1
    }

    pub fn sink(&self) -> usize {
        self.length + 2
    }

    pub fn num_states(&self) -> usize {
        self.length + 3
    }
}

/// Two-row cliffwalk. The bottom row holds the start (column 0), the goal (last column)
/// and cliff cells in between; stepping onto the cliff costs `CLIFF_PENALTY` and returns
/// the agent to the start. Any action at the goal pays `GOAL_REWARD` and enters a terminal sink.
pub fn build_cliffwalk(length: usize, seed: u64) -> Result<(TabularMdp, FeatureMap)> {
    if length < 2 {
        return Err(Error::InvalidArgument(format!("cliffwalk length {length} < 2")));
    }
    let layout = CliffLayout { length };
    let (ns, na) = (layout.num_states(), 4);
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];

    // Where a move lands on the bottom row at column c, with its reward.
    let bottom = |c: usize| -> (usize, f64) {
        if c == 0 {
            (layout.start(), 0.0)
        } else if c == length - 1 {
            (layout.goal(), 0.0)
        } else {
            (layout.start(), CLIFF_PENALTY)
        }
    };

    for s in 0..ns {
        for a in 0..na {
            let (next, r) = if s == layout.sink() {
                (s, 0.0)
            } else if s == layout.goal() {
                (layout.sink(), GOAL_REWARD)
            } else if s == layout.start() {
                match a {
                    UP => (layout.top(0), 0.0),
                    RIGHT => bottom(1),
                    _ => (s, 0.0),
                }
            } else {
                let c = s;
                match a {
                    UP => (s, 0.0),
                    DOWN => bottom(c),
                    LEFT => (layout.top(c.saturating_sub(1)), 0.0),
                    _ => (layout.top((c + 1).min(length - 1)), 0.0),
                }
            };
            transition[(s * na + a) * ns + next] = 1.0;
            reward[s * na + a] = r;
        }
    }
    let mut initial = vec![0.0; ns];
    initial[layout.start()] = 1.0;
    let mut terminal = vec![false; ns];
    terminal[layout.sink()] = true;
    let mdp = TabularMdp::new(ns, na, transition, reward, 0.95, initial, terminal)?;

    let mut rng = rng::stream(seed, Stream::Features);
    let obs: Vec<Vec<f64>> = (0..ns)
        .map(|_| {
            let v: Vec<f64> = (0..OBS_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let features = FeatureMap::from_state_observations(&obs, na, seed)?;
    Ok((mdp, features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{greedy_policy, value_iteration, TieBreak};

    #[test]
    fn shortest_instance() {
        let (mdp, _) = build_cliffwalk(2, 0).unwrap();
        let q = value_iteration(&mdp, 1e-12).unwrap();
        let start = CliffLayout { length: 2 }.start();
        assert!((q.get(start, RIGHT) - 0.95).abs() < 1e-10);
    }

    #[test]
    fn optimal_policy_avoids_the_cliff() {
        for length in 3..10 {
            let layout = CliffLayout { length };
            let (mdp, _) = build_cliffwalk(length, 3).unwrap();
            let pi = greedy_policy(&value_iteration(&mdp, 1e-12).unwrap(), TieBreak::LowestIndex);
            let mut s = layout.start();
            let mut steps = 0;
            while s != layout.sink() {
                let a = (0..4).find(|a| pi.prob(s, *a) == 1.0).unwrap();
                assert!(mdp.reward_at(s, a) >= 0.0, "entered the cliff at {s}");
                s = mdp.successors(s, a)[0].0;
                steps += 1;
                assert!(steps < 4 * (length + 2));
            }
        }
    }

    #[test]
    fn same_seed_same_mdp() {
        assert_eq!(build_cliffwalk(6, 9).unwrap(), build_cliffwalk(6, 9).unwrap());
    }

    #[test]
    fn too_short() {
        assert!(build_cliffwalk(1, 0).is_err());
    }
}
