use rand::Rng as _;

use crate::mdp::{greedy_policy, Policy, QTable, TabularMdp, TieBreak};
use crate::rng::Rng;

pub fn sample_initial(mdp: &TabularMdp, rng: &mut Rng) -> usize {
    sample_categorical(mdp.initial_dist(), rng.random())
}

pub fn sample_next(mdp: &TabularMdp, s: usize, a: usize, rng: &mut Rng) -> usize {
    let succ = mdp.successors(s, a);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (next, p) in succ {
        acc += p;
        if u < acc {
            return *next;
        }
    }
    succ.last().expect("every pair has a successor").0
}

fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Mean undiscounted return of `episodes` rollouts of the greedy policy of `q`, each
/// cut at `horizon` steps or at a terminal state.
pub fn greedy_rollout_return(mdp: &TabularMdp, q: &QTable, horizon: usize, episodes: usize, rng: &mut Rng) -> f64 {
    if episodes == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = sample_initial(mdp, rng);
        for _ in 0..horizon {
            if mdp.is_terminal(s) {
                break;
            }
            let a = q.argmax_at(s);
            total += mdp.reward_at(s, a);
            s = sample_next(mdp, s, a, rng);
        }
    }
    total / episodes as f64
}

/// Exact expected undiscounted return of `pi` over `horizon` steps from the initial distribution.
pub fn expected_return(mdp: &TabularMdp, pi: &Policy, horizon: usize) -> f64 {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; ns];
    for _ in 0..horizon {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        let p = pi.prob(s, a);
                        if p == 0.0 {
                            return 0.0;
                        }
                        let cont: f64 = mdp.successors(s, a).iter().map(|(n, q)| q * v[*n]).sum();
                        p * (mdp.reward_at(s, a) + cont)
                    })
                    .sum()
            })
            .collect();
        v = next;
    }
    v.iter().zip(mdp.initial_dist()).map(|(v, p)| v * p).sum()
}

/// Oracle quantities shared by every metric of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub q_star: QTable,
    pub pi_star: Policy,
    pub optimal_return: f64,
    pub random_return: f64,
}

impl Oracle {
    pub fn new(mdp: &TabularMdp, horizon: usize) -> crate::Result<Self> {
        let q_star = crate::mdp::value_iteration(mdp, crate::mdp::DEFAULT_VI_TOL)?;
        let pi_star = greedy_policy(&q_star, TieBreak::LowestIndex);
        let optimal_return = expected_return(mdp, &pi_star, horizon);
        let random_return = expected_return(mdp, &Policy::uniform(mdp.num_states(), mdp.num_actions()), horizon);
        Ok(Oracle {
            q_star,
            pi_star,
            optimal_return,
            random_return,
        })
    }

    /// `(R − R_random) / (R_optimal − R_random)`, zero when the two references coincide.
    pub fn normalize(&self, ret: f64) -> f64 {
        let span = self.optimal_return - self.random_return;
        if span.abs() < 1e-12 {
            0.0
        } else {
            (ret - self.random_return) / span
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;
    use crate::mdp::value_iteration;
    use crate::rng::{self, Stream};

    #[test]
    fn optimal_greedy_rollouts_reach_the_oracle_return() {
        let env = make_env("grid:W=4,H=3,reward=sparse", 0).unwrap();
        let q = value_iteration(&env.mdp, 1e-12).unwrap();
        let mut r = rng::stream(0, Stream::Rollout);
        let oracle = Oracle::new(&env.mdp, env.horizon).unwrap();
        let ret = greedy_rollout_return(&env.mdp, &q, env.horizon, 20, &mut r);
        assert_eq!(ret, 1.0);
        assert!((oracle.optimal_return - 1.0).abs() < 1e-12);
        assert!(oracle.random_return > 0.0 && oracle.random_return < 1.0);
        assert!((oracle.normalize(1.0) - 1.0).abs() < 1e-12);
        assert_eq!(oracle.normalize(oracle.random_return), 0.0);
    }

    #[test]
    fn expected_return_of_two_step_chain() {
        // s0 -> s1 (reward 1), s1 -> s2 terminal (reward 2)
        let t = vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let mdp = TabularMdp::new(3, 1, t, vec![1.0, 2.0, 0.0], 0.9, vec![1.0, 0.0, 0.0], vec![false, false, true]).unwrap();
        let pi = Policy::uniform(3, 1);
        assert_eq!(expected_return(&mdp, &pi, 1), 1.0);
        assert_eq!(expected_return(&mdp, &pi, 5), 3.0);
    }
}
