use super::{SchemeKind, SchemeState};
use crate::mdp::DistSA;
use crate::{Error, Result};

/// Training distribution `D_k` for exact mode.
///
/// `state` must already hold the on-policy marginal of the current policy. Weighted
/// schemes multiply the replay mixture by `field` and renormalise; `OptimalP` uses
/// `field` as the distribution itself.
pub fn exact_mode_distribution(state: &SchemeState, field: Option<&[f64]>) -> Result<DistSA> {
    let current = state
        .history()
        .last()
        .ok_or_else(|| Error::InvalidArgument("no on-policy marginal recorded".into()))?;
    let (ns, na) = (current.num_states(), current.num_actions());
    let need_field = || {
        field
            .filter(|f| f.len() == ns * na)
            .ok_or_else(|| Error::InvalidArgument(format!("scheme {} needs a weight field over all pairs", state.kind)))
    };
    match state.kind {
        SchemeKind::Uniform => Ok(DistSA::uniform(ns, na)),
        SchemeKind::OnPolicy => Ok(current.clone()),
        SchemeKind::ReplayMixture => Ok(state.replay_mixture().expect("history is non-empty")),
        SchemeKind::OptimalP => DistSA::from_weights(ns, na, need_field()?.to_vec()),
        SchemeKind::BellmanPriority | SchemeKind::DisCor | SchemeKind::DisCorOracle => {
            let base = state.replay_mixture().expect("history is non-empty");
            let field = need_field()?;
            let mass: Vec<f64> = base.mass().iter().zip(field).map(|(b, w)| b * w).collect();
            if mass.iter().sum::<f64>() > 0.0 {
                DistSA::from_weights(ns, na, mass)
            } else {
                Ok(base)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(kind: SchemeKind, marginals: &[Vec<f64>]) -> SchemeState {
        let mut s = SchemeState::new(kind, 10.0, 0.005).unwrap();
        for m in marginals {
            s.push_marginal(DistSA::from_weights(2, 2, m.clone()).unwrap());
        }
        s
    }

    #[test]
    fn first_iteration_replay_is_on_policy() {
        let m = vec![0.1, 0.2, 0.3, 0.4];
        let on = exact_mode_distribution(&state(SchemeKind::OnPolicy, std::slice::from_ref(&m)), None).unwrap();
        let rep = exact_mode_distribution(&state(SchemeKind::ReplayMixture, &[m]), None).unwrap();
        assert_eq!(on, rep);
    }

    #[test]
    fn uniform_over_pairs() {
        let mut s = SchemeState::new(SchemeKind::Uniform, 10.0, 0.005).unwrap();
        s.push_marginal(DistSA::uniform(4, 3));
        let d = exact_mode_distribution(&s, None).unwrap();
        assert!(d.mass().iter().all(|m| (m - 1.0 / 12.0).abs() < 1e-15));
    }

    #[test]
    fn weighted_schemes_reweight_the_mixture() {
        let s = state(SchemeKind::DisCor, &[vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]]);
        let d = exact_mode_distribution(&s, Some(&[1.0, 3.0, 1.0, 3.0])).unwrap();
        assert_eq!(d.mass(), &[0.125, 0.375, 0.125, 0.375]);
        assert!(exact_mode_distribution(&s, None).is_err());
    }

    #[test]
    fn optimal_p_uses_the_field_directly() {
        let s = state(SchemeKind::OptimalP, &[vec![1.0, 0.0, 0.0, 0.0]]);
        let d = exact_mode_distribution(&s, Some(&[0.0, 1.0, 1.0, 2.0])).unwrap();
        assert_eq!(d.mass(), &[0.0, 0.25, 0.25, 0.5]);
    }
}
