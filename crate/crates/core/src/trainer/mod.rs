//! Fitted Q-iteration with pluggable training distributions.
//!
//! Three modes share one loop shape: `exact` projects the full backup `B*Q_{k−1}` under
//! an explicit distribution over all pairs, `sampled` collects transitions with a
//! Boltzmann behaviour policy into a replay buffer and regresses onto sampled targets,
//! and `bandit` does the same with the true `Q*` as the regression target.

mod buffer;
mod eval;
mod exact;
mod sampled;

use std::ops::ControlFlow;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub use buffer::{ReplayBuffer, Transition};
pub use eval::{expected_return, greedy_rollout_return, Oracle};
pub use exact::run_exact;
pub use sampled::{run_bandit, run_sampled};

use crate::approx::{ApproxSpec, Approximator, DEFAULT_BUDGET};
use crate::diagnostics::{corrective_feedback_cosine_with, lemma_b1_slack, CosineMarginal, RunRecord, Thm3Tracker};
use crate::envs::{make_env, Environment};
use crate::mdp::{
    boltzmann_policy, discounted_sa_marginal, greedy_policy, max_total_variation, value_error, DistSA, QTable,
    TieBreak,
};
use crate::rng::{self, Stream};
use crate::weighting::{
    ErrorModel, SchemeKind, SchemeState, DEFAULT_TAU0, DEFAULT_TAU_RATE, PER_ALPHA, PER_EPSILON,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sampled,
    Bandit,
}

impl Mode {
    pub fn id(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Sampled => "sampled",
            Mode::Bandit => "bandit",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            "bandit" => Ok(Mode::Bandit),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

/// Where DisCor-oracle reads `|Q_{k−1} − Q*|`: at the bootstrap pair `(s′, â)` or at `(s, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSide {
    Target,
    Current,
}

impl OracleSide {
    pub fn id(self) -> &'static str {
        match self {
            OracleSide::Target => "target",
            OracleSide::Current => "current",
        }
    }
}

impl FromStr for OracleSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(OracleSide::Target),
            "current" => Ok(OracleSide::Current),
            _ => Err(Error::InvalidArgument(format!("unknown oracle side `{s}`"))),
        }
    }
}

/// Boltzmann temperature `max(floor, initial · decay^k)` at iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    pub temperature: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration {
            temperature: 1.0,
            decay: 0.995,
            floor: 0.01,
        }
    }
}

impl Exploration {
    pub fn fixed(temperature: f64) -> Self {
        Exploration {
            temperature,
            decay: 1.0,
            floor: temperature,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        (self.temperature * self.decay.powi(k.min(i32::MAX as usize) as i32)).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: String,
    pub scheme: SchemeKind,
    pub approx: ApproxSpec,
    pub mode: Mode,
    pub iterations: usize,
    /// Environment steps collected per iteration (`M`).
    pub samples_per_iter: usize,
    pub batch_size: usize,
    /// Gradient steps per projection for network approximators (`G`).
    pub budget: usize,
    pub exploration: Exploration,
    pub seed: u64,
    pub discount: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub tau0: f64,
    pub tau_rate: f64,
    /// Soft update rate of the Δ target copy; defaults by representation.
    pub delta_rate: Option<f64>,
    pub per_alpha: f64,
    pub per_epsilon: f64,
    pub oracle_side: OracleSide,
    pub cosine_marginal: CosineMarginal,
}

impl TrainConfig {
    pub fn new(env: &str, scheme: SchemeKind, mode: Mode) -> Self {
        TrainConfig {
            env: env.to_string(),
            scheme,
            approx: ApproxSpec::Tabular,
            mode,
            iterations: if mode == Mode::Exact { 300 } else { 500 },
            samples_per_iter: 100,
            batch_size: 256,
            budget: DEFAULT_BUDGET,
            exploration: Exploration::default(),
            seed: 0,
            discount: None,
            replay_capacity: None,
            tau0: DEFAULT_TAU0,
            tau_rate: DEFAULT_TAU_RATE,
            delta_rate: None,
            per_alpha: PER_ALPHA,
            per_epsilon: PER_EPSILON,
            oracle_side: OracleSide::Target,
            cosine_marginal: CosineMarginal::StateAction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.mode == Mode::Exact && self.replay_capacity.is_some() {
            return bad("exact mode has no replay buffer; drop replay_capacity");
        }
        if self.mode != Mode::Exact && (self.samples_per_iter == 0 || self.batch_size == 0) {
            return bad("sampled and bandit modes need samples_per_iter and batch_size > 0");
        }
        if self.replay_capacity == Some(0) {
            return bad("replay_capacity must be positive");
        }
        let e = &self.exploration;
        if !(e.temperature > 0.0 && e.floor > 0.0 && e.decay > 0.0 && e.decay <= 1.0) {
            return bad("exploration temperature, floor and decay must be positive with decay ≤ 1");
        }
        if !(self.tau0 > 0.0) || !(0.0..=1.0).contains(&self.tau_rate) {
            return bad("tau0 must be positive and tau_rate in [0, 1]");
        }
        if self.delta_rate.is_some_and(|r| !(r > 0.0 && r <= 1.0)) {
            return bad("delta_rate must be in (0, 1]");
        }
        if !(self.per_alpha >= 0.0) || !(self.per_epsilon >= 0.0) {
            return bad("per_alpha and per_epsilon must be non-negative");
        }
        if let Some(g) = self.discount {
            if !(g > 0.0 && g < 1.0) {
                return bad("discount must be in (0, 1)");
            }
        }
        Ok(())
    }
}

/// What an observer sees after each iteration.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub k: usize,
    pub q_prev: &'a QTable,
    pub q: &'a QTable,
    /// Online Δ_k over all pairs, clamped at zero.
    pub delta: &'a [f64],
    /// `D_k` in exact mode.
    pub distribution: Option<&'a DistSA>,
    pub record: &'a RunRecord,
}

pub type Observer<'a> = dyn FnMut(&Snapshot) -> ControlFlow<()> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub q: QTable,
    pub delta: Vec<f64>,
    pub oracle: Oracle,
    /// Evaluation horizon of the environment.
    pub horizon: usize,
    /// Discount the run used, after any override.
    pub discount: f64,
}

/// Build the environment named in `config` and run the configured mode.
pub fn run(config: &TrainConfig) -> Result<RunOutput> {
    let env = make_env(&config.env, config.seed)?;
    run_on(config, &env, &mut |_| ControlFlow::Continue(()))
}

pub fn run_on(config: &TrainConfig, env: &Environment, observer: &mut Observer) -> Result<RunOutput> {
    match config.mode {
        Mode::Exact => run_exact(config, env, observer),
        Mode::Sampled => run_sampled(config, env, observer),
        Mode::Bandit => run_bandit(config, env, observer),
    }
}

/// State shared by all modes.
pub(crate) struct Session {
    pub env: Environment,
    pub config: TrainConfig,
    pub oracle: Oracle,
    pub q: Approximator,
    pub delta: ErrorModel,
    pub scheme: SchemeState,
    thm3: Thm3Tracker,
    /// `d^{π_k}` of the latest Boltzmann policy, reused by the next iteration.
    pub marginal: Option<(usize, DistSA)>,
    pub records: Vec<RunRecord>,
}

impl Session {
    pub fn new(config: &TrainConfig, env: &Environment) -> Result<Self> {
        config.validate()?;
        let mut env = env.clone();
        if let Some(g) = config.discount {
            env = env.with_discount(g)?;
        }
        let (ns, na) = (env.mdp.num_states(), env.mdp.num_actions());
        let features = Arc::new(env.features.clone());
        let oracle = Oracle::new(&env.mdp, env.horizon)?;
        let q = Approximator::new(&config.approx, features.clone(), ns, na, &mut rng::stream(config.seed, Stream::QInit))?;
        let delta = ErrorModel::for_q(
            &config.approx,
            features,
            ns,
            na,
            config.delta_rate,
            &mut rng::stream(config.seed, Stream::DeltaInit),
        )?;
        let scheme = SchemeState::new(config.scheme, config.tau0, config.tau_rate)?;
        Ok(Session {
            thm3: Thm3Tracker::new(ns * na),
            env,
            config: config.clone(),
            oracle,
            q,
            delta,
            scheme,
            marginal: None,
            records: Vec::new(),
        })
    }

    /// Whether this run keeps its Δ model up to date.
    pub fn tracks_delta(&self) -> bool {
        self.config.scheme == SchemeKind::DisCor || self.delta.model().is_tabular()
    }

    /// `d^π` for the Boltzmann policy of `q` at iteration `k`, cached per iteration.
    pub fn behaviour_marginal(&mut self, k: usize, q: &QTable) -> Result<DistSA> {
        if let Some((cached_k, d)) = &self.marginal {
            if *cached_k == k {
                return Ok(d.clone());
            }
        }
        let pi = boltzmann_policy(q, self.config.exploration.at(k))?;
        let d = discounted_sa_marginal(&self.env.mdp, &pi)?;
        self.marginal = Some((k, d.clone()));
        Ok(d)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        k: usize,
        q_prev: &QTable,
        q: &QTable,
        data_marginal: &DistSA,
        weight_stats: (f64, f64, f64),
        bracket: (f64, f64),
        started: Instant,
    ) -> Result<RunRecord> {
        let d_next = self.behaviour_marginal(k, q)?;
        let mdp = &self.env.mdp;
        let q_star = &self.oracle.q_star;
        let thm3 = self.thm3.step(mdp, q_prev, q, q_star, &self.oracle.pi_star);
        let lemma = lemma_b1_slack(mdp, q_prev, q, q_star, &self.oracle.pi_star);
        let dtv = max_total_variation(&greedy_policy(q, TieBreak::LowestIndex), &self.oracle.pi_star);
        let cosine = corrective_feedback_cosine_with(q_prev, q, q_star, data_marginal, self.config.cosine_marginal);
        let ret = expected_return(&self.env.mdp, &greedy_policy(q, TieBreak::LowestIndex), self.env.horizon);
        let record = RunRecord {
            iter: k,
            value_error: value_error(q, q_star, &d_next),
            eval_return: ret,
            norm_return: self.oracle.normalize(ret),
            cosine_sim: cosine,
            w_mean: weight_stats.0,
            w_min: weight_stats.1,
            w_max: weight_stats.2,
            tau: self.scheme.tau,
            c1: bracket.0,
            c2: bracket.1,
            slack_thm3: thm3.value,
            slack_lemma: lemma.value,
            dtv,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        self.scheme.bracket = Some(bracket);
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            q: self.q.table(),
            delta: self.delta.values(),
            oracle: self.oracle,
            horizon: self.env.horizon,
            discount: self.env.mdp.discount(),
            records: self.records,
        }
    }
}
