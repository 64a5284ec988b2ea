//! Types shared by every planner.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::ops::AddAssign;

use crate::error::{Error, Result};
use crate::gumbel_mcts::{run_gumbel_mcts, GumbelMctsConfig};
use crate::mdp::{PolicyTable, TabularMdp, ValueTable};
use crate::smc::{run_rl_smc, SmcConfig};
use crate::smcts::run_smcts;
use crate::stream::StreamKey;
use crate::tsmcts::{run_tsmcts, ShSchedule, TsmctsConfig};

/// Value source used inside search.
///
/// `value(s)` bootstraps truncated returns. `q_row(s)` supplies the action
/// values from which the in-search improved policy is formed. In bootstrap
/// mode the row is the model lookahead `R(s,a) + γ E[v(s')]` and the sampled
/// action's entry is replaced by the particle's own one-sample estimate
/// `r + γ v(s')`; in exact mode the supplied `Q` is used as is.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchValues {
    num_actions: usize,
    v: Vec<f64>,
    q: Vec<f64>,
    one_sample: bool,
}

impl SearchValues {
    pub fn bootstrap(mdp: &TabularMdp, v: &[f64]) -> Result<Self> {
        if v.len() != mdp.num_states() {
            return Err(Error::invalid("value vector does not match the MDP"));
        }
        Ok(SearchValues {
            num_actions: mdp.num_actions(),
            v: v.to_vec(),
            q: mdp.lookahead(v),
            one_sample: true,
        })
    }

    pub fn exact(table: &ValueTable) -> Self {
        SearchValues {
            num_actions: table.num_actions(),
            v: table.v().to_vec(),
            q: table.q_table().to_vec(),
            one_sample: false,
        }
    }

    pub fn value(&self, s: usize) -> f64 {
        self.v[s]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn one_sample(&self) -> bool {
        self.one_sample
    }
}

/// Everything a planner call reads: model, prior policy, value source.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub mdp: &'a TabularMdp,
    pub prior: &'a PolicyTable,
    pub values: &'a SearchValues,
}

impl<'a> PlanContext<'a> {
    pub fn new(
        mdp: &'a TabularMdp,
        prior: &'a PolicyTable,
        values: &'a SearchValues,
    ) -> Result<Self> {
        if prior.num_states() != mdp.num_states() || prior.num_actions() != mdp.num_actions() {
            return Err(Error::invalid("prior policy does not match the MDP"));
        }
        if values.v.len() != mdp.num_states() || values.num_actions != mdp.num_actions() {
            return Err(Error::invalid("value source does not match the MDP"));
        }
        Ok(PlanContext { mdp, prior, values })
    }

    /// Bootstrap value with zero at terminal states.
    pub fn bootstrap(&self, s: usize) -> f64 {
        if self.mdp.is_terminal(s) {
            0.0
        } else {
            self.values.value(s)
        }
    }

    pub fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counters {
    pub model_expansions: u64,
    pub value_evaluations: u64,
    pub resampling_events: u64,
    pub resampling_fallbacks: u64,
}

impl AddAssign for Counters {
    fn add_assign(&mut self, rhs: Self) {
        self.model_expansions += rhs.model_expansions;
        self.value_evaluations += rhs.value_evaluations;
        self.resampling_events += rhs.resampling_events;
        self.resampling_fallbacks += rhs.resampling_fallbacks;
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlannerOutput {
    /// Improved policy over the full action set.
    pub policy: Vec<f64>,
    pub v_search: f64,
    pub counters: Counters,
    pub active_actions: usize,
    /// Root action-value estimates, where the planner has one.
    pub root_values: Vec<Option<f64>>,
    /// Sequential Halving plan, for planners that use one.
    #[cfg_attr(
        feature = "serde",
        serde(skip_serializing_if = "Option::is_none", default)
    )]
    pub schedule: Option<ShSchedule>,
}

impl PlannerOutput {
    pub(crate) fn new(
        policy: Vec<f64>,
        v_search: f64,
        counters: Counters,
        root_values: Vec<Option<f64>>,
    ) -> Self {
        let active_actions = policy.iter().filter(|p| **p > 0.0).count();
        PlannerOutput {
            policy,
            v_search,
            counters,
            active_actions,
            root_values,
            schedule: None,
        }
    }
}

/// A search procedure producing an improved root policy and value estimate.
pub trait Planner: Sync {
    fn name(&self) -> &str;

    fn plan(&self, ctx: &PlanContext<'_>, s0: usize, key: StreamKey) -> Result<PlannerOutput>;
}

impl<P: Planner + ?Sized> Planner for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn plan(&self, ctx: &PlanContext<'_>, s0: usize, key: StreamKey) -> Result<PlannerOutput> {
        (**self).plan(ctx, s0, key)
    }
}

impl<P: Planner + ?Sized + Send> Planner for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn plan(&self, ctx: &PlanContext<'_>, s0: usize, key: StreamKey) -> Result<PlannerOutput> {
        (**self).plan(ctx, s0, key)
    }
}

/// The four built-in planners behind one configuration type.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PlannerConfig {
    RlSmc(SmcConfig),
    Smcts(SmcConfig),
    Tsmcts(TsmctsConfig),
    GumbelMcts(GumbelMctsConfig),
}

pub const PLANNERS: [&str; 4] = ["rl-smc", "smcts", "tsmcts", "gumbel-mcts"];

impl Planner for PlannerConfig {
    fn name(&self) -> &str {
        match self {
            PlannerConfig::RlSmc(_) => "rl-smc",
            PlannerConfig::Smcts(_) => "smcts",
            PlannerConfig::Tsmcts(_) => "tsmcts",
            PlannerConfig::GumbelMcts(_) => "gumbel-mcts",
        }
    }

    fn plan(&self, ctx: &PlanContext<'_>, s0: usize, key: StreamKey) -> Result<PlannerOutput> {
        match self {
            PlannerConfig::RlSmc(cfg) => run_rl_smc(ctx, s0, cfg, key),
            PlannerConfig::Smcts(cfg) => run_smcts(ctx, s0, cfg, key),
            PlannerConfig::Tsmcts(cfg) => run_tsmcts(ctx, s0, cfg, key),
            PlannerConfig::GumbelMcts(cfg) => run_gumbel_mcts(ctx, s0, cfg, key),
        }
    }
}
