use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::mdp::TabularMdp;
use crate::rng::Rng;

/// Dense random MDP without terminal states: transition rows drawn from a flat Dirichlet,
/// rewards uniform on `[0, 1)`, uniform initial distribution.
pub fn random_mdp(num_states: usize, num_actions: usize, discount: f64, rng: &mut Rng) -> TabularMdp {
    let (ns, na) = (num_states, num_actions);
    let mut transition = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        let row: Vec<f64> = (0..ns).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = row.iter().sum();
        transition.extend(row.iter().map(|p| p / total));
    }
    let reward = (0..ns * na).map(|_| rng.random::<f64>()).collect();
    let initial = vec![1.0 / ns as f64; ns];
    TabularMdp::new(ns, na, transition, reward, discount, initial, vec![false; ns])
        .expect("random MDP construction satisfies the invariants")
}
