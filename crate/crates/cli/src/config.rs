//! Run configuration read from a TOML document.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsmcts::gumbel_mcts::GumbelMctsConfig;
use tsmcts::mdp::{
    exact_policy_evaluation, make_environment, value_iteration, EnvParams, PolicyTable, TabularMdp,
};
use tsmcts::operators::GmzConfig;
use tsmcts::planner::PlannerConfig;
use tsmcts::smc::{ResamplingScheme, RootStatistic, SmcConfig};
use tsmcts::training::TrainConfig;
use tsmcts::tsmcts::{SurvivorRule, TsmctsConfig};
use tsmcts::{SearchValues, StreamKey, ValueTable};

use crate::envfile;

/// Planner names accepted in configuration files.
pub const PLANNER_NAMES: [&str; 6] = [
    "rl-smc",
    "rl-smc-last-return",
    "rl-smc-mean-return",
    "smcts",
    "tsmcts",
    "gumbel-mcts",
];

/// A problem with the configuration itself, as opposed to a failure while
/// running it.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub env: EnvSection,
    pub planner: PlannerSection,
    pub values: ValuesSection,
    pub train: TrainConfig,
    pub diagnose: DiagnoseSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub name: String,
    /// MDP document to load instead of a built-in environment.
    pub file: Option<PathBuf>,
    pub seed: u64,
    pub discount: f64,
    pub length: usize,
    pub width: usize,
    pub height: usize,
    pub slip: f64,
    pub states: usize,
    pub actions: usize,
    pub branching: usize,
    pub arms: Vec<f64>,
}

impl Default for EnvSection {
    fn default() -> Self {
        let p = EnvParams::default();
        EnvSection {
            name: "chain".into(),
            file: None,
            seed: 0,
            discount: p.discount,
            length: p.length,
            width: p.width,
            height: p.height,
            slip: p.slip,
            states: p.states,
            actions: p.actions,
            branching: p.branching,
            arms: p.arms,
        }
    }
}

impl EnvSection {
    pub fn params(&self) -> EnvParams {
        EnvParams {
            discount: self.discount,
            length: self.length,
            width: self.width,
            height: self.height,
            slip: self.slip,
            states: self.states,
            actions: self.actions,
            branching: self.branching,
            arms: self.arms.clone(),
        }
    }

    /// The configured environment, or the named built-in with this
    /// section's parameters.
    pub fn build_named(&self, name: &str, base: &Path) -> anyhow::Result<TabularMdp> {
        if let Some(file) = &self.file {
            return envfile::load(&base.join(file));
        }
        Ok(make_environment(name, &self.params(), self.seed)?)
    }

    pub fn build(&self, base: &Path) -> anyhow::Result<TabularMdp> {
        self.build_named(&self.name, base)
    }

    pub fn label(&self) -> String {
        match &self.file {
            Some(f) => f.display().to_string(),
            None => self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub name: String,
    pub num_particles: usize,
    pub depth: usize,
    pub m1: usize,
    pub resampling_period: usize,
    pub resampling: ResamplingScheme,
    pub beta_search: f64,
    pub beta_root: f64,
    pub normalize_q: bool,
    pub root_statistic: RootStatistic,
    pub survivor_rule: SurvivorRule,
    /// Gumbel-MCTS simulations; defaults to `num_particles * depth`.
    pub budget: Option<usize>,
    /// Gumbel-MCTS in-tree inverse temperature per visit; defaults to
    /// `beta_search`.
    pub beta_slope: Option<f64>,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            name: "tsmcts".into(),
            num_particles: 4,
            depth: 6,
            m1: 4,
            resampling_period: 4,
            resampling: ResamplingScheme::Multinomial,
            beta_search: 10.0,
            beta_root: 100.0,
            normalize_q: false,
            root_statistic: RootStatistic::Occupancy,
            survivor_rule: SurvivorRule::Operator,
            budget: None,
            beta_slope: None,
        }
    }
}

pub fn check_planner_name(name: &str) -> anyhow::Result<()> {
    if PLANNER_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(config_err(format!(
            "unknown planner `{name}` (expected one of {})",
            PLANNER_NAMES.join(", ")
        )))
    }
}

impl PlannerSection {
    pub fn build(&self) -> anyhow::Result<PlannerConfig> {
        self.build_with(&self.name, self.num_particles, self.depth, self.m1)
    }

    /// The planner `name` with this section's settings and the given grid
    /// coordinates.
    pub fn build_with(
        &self,
        name: &str,
        n: usize,
        t: usize,
        m1: usize,
    ) -> anyhow::Result<PlannerConfig> {
        check_planner_name(name)?;
        let gmz = |beta| GmzConfig {
            beta,
            normalize_q: self.normalize_q,
        };
        let smc = |root_statistic| SmcConfig {
            num_particles: n,
            depth: t,
            resampling_period: self.resampling_period,
            resampling: self.resampling,
            search: gmz(self.beta_search),
            root: gmz(self.beta_root),
            root_statistic,
        };
        let planner = match name {
            "rl-smc" => PlannerConfig::RlSmc(smc(self.root_statistic)),
            "rl-smc-last-return" => PlannerConfig::RlSmc(smc(RootStatistic::LastReturn)),
            "rl-smc-mean-return" => PlannerConfig::RlSmc(smc(RootStatistic::MeanReturn)),
            "smcts" => PlannerConfig::Smcts(smc(RootStatistic::MeanReturn)),
            "tsmcts" => PlannerConfig::Tsmcts(TsmctsConfig {
                num_particles: n,
                depth: t,
                m1,
                resampling_period: self.resampling_period,
                resampling: self.resampling,
                search: gmz(self.beta_search),
                root: gmz(self.beta_root),
                survivor_rule: self.survivor_rule,
            }),
            _ => PlannerConfig::GumbelMcts(GumbelMctsConfig {
                budget: self.budget.unwrap_or(n * t),
                m1,
                root: gmz(self.beta_root),
                beta_slope: self.beta_slope.unwrap_or(self.beta_search),
            }),
        };
        Ok(planner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSource {
    /// All-zero bootstrap values.
    #[default]
    Zero,
    /// Exact values of the prior policy.
    Policy,
    /// Exact optimal values.
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    #[default]
    Uniform,
    /// Flat-Dirichlet rows drawn with `prior_seed`.
    Random,
}

/// Prior policy and value source used by `plan` and `diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ValuesSection {
    pub source: ValueSource,
    /// Hand the exact action values to the search instead of one-sample
    /// bootstrapped estimates.
    pub exact_q: bool,
    pub prior: PriorKind,
    pub prior_seed: u64,
}

impl ValuesSection {
    pub fn prior(&self, mdp: &TabularMdp) -> PolicyTable {
        match self.prior {
            PriorKind::Uniform => PolicyTable::uniform(mdp.num_states(), mdp.num_actions()),
            PriorKind::Random => PolicyTable::random(
                mdp.num_states(),
                mdp.num_actions(),
                &mut StreamKey::new(self.prior_seed).label("prior").rng(),
            ),
        }
    }

    pub fn search_values(
        &self,
        mdp: &TabularMdp,
        prior: &PolicyTable,
    ) -> anyhow::Result<SearchValues> {
        let table: ValueTable = match self.source {
            ValueSource::Zero => {
                if self.exact_q {
                    return Err(config_err(
                        "values.exact_q needs values.source = \"policy\" or \"optimal\"",
                    ));
                }
                return Ok(SearchValues::bootstrap(mdp, &vec![0.0; mdp.num_states()])?);
            }
            ValueSource::Policy => exact_policy_evaluation(mdp, prior)?,
            ValueSource::Optimal => value_iteration(mdp, 1e-10)?.0,
        };
        Ok(if self.exact_q {
            SearchValues::exact(&table)
        } else {
            SearchValues::bootstrap(mdp, table.v())?
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// Any of `variance`, `improvement`.
    pub metrics: Vec<String>,
    pub planners: Vec<String>,
    pub num_particles: Vec<usize>,
    pub depths: Vec<usize>,
    pub m1: Vec<usize>,
    pub seeds: Vec<u64>,
    pub state: usize,
    pub calls: usize,
    pub replicates: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection {
            metrics: vec!["variance".into()],
            planners: vec![
                "tsmcts".into(),
                "smcts".into(),
                "rl-smc-last-return".into(),
                "rl-smc".into(),
            ],
            num_particles: vec![8],
            depths: vec![16],
            m1: vec![4],
            seeds: vec![0, 1, 2, 3, 4],
            state: 0,
            calls: tsmcts::diagnostics::DEFAULT_CALLS,
            replicates: 16,
        }
    }
}

pub const METRICS: [&str; 2] = ["variance", "improvement"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Built-in environments trained on; each uses the `[env]` parameters.
    pub envs: Vec<String>,
    pub planners: Vec<String>,
    pub num_particles: Vec<usize>,
    pub depths: Vec<usize>,
    pub m1: Vec<usize>,
    pub seeds: Vec<u64>,
    pub bootstrap_resamples: usize,
    pub interval: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            envs: vec!["chain".into()],
            planners: vec!["tsmcts".into(), "rl-smc".into()],
            num_particles: vec![4],
            depths: vec![4, 8, 16],
            m1: vec![4],
            seeds: (0..10).collect(),
            bootstrap_resamples: 2000,
            interval: 0.9,
        }
    }
}

fn nonempty<T>(what: &str, v: &[T]) -> anyhow::Result<()> {
    if v.is_empty() {
        Err(config_err(format!("grid axis `{what}` is empty")))
    } else {
        Ok(())
    }
}

impl DiagnoseSection {
    pub fn validate(&self) -> anyhow::Result<()> {
        nonempty("diagnose.metrics", &self.metrics)?;
        nonempty("diagnose.planners", &self.planners)?;
        nonempty("diagnose.num_particles", &self.num_particles)?;
        nonempty("diagnose.depths", &self.depths)?;
        nonempty("diagnose.m1", &self.m1)?;
        nonempty("diagnose.seeds", &self.seeds)?;
        for m in &self.metrics {
            if !METRICS.contains(&m.as_str()) {
                return Err(config_err(format!(
                    "unknown metric `{m}` (expected one of {})",
                    METRICS.join(", ")
                )));
            }
        }
        self.planners.iter().try_for_each(|p| check_planner_name(p))
    }
}

impl SweepSection {
    pub fn validate(&self) -> anyhow::Result<()> {
        nonempty("sweep.envs", &self.envs)?;
        nonempty("sweep.planners", &self.planners)?;
        nonempty("sweep.num_particles", &self.num_particles)?;
        nonempty("sweep.depths", &self.depths)?;
        nonempty("sweep.m1", &self.m1)?;
        nonempty("sweep.seeds", &self.seeds)?;
        if !(self.interval > 0.0 && self.interval < 1.0) {
            return Err(config_err("sweep.interval must lie in (0, 1)"));
        }
        self.planners.iter().try_for_each(|p| check_planner_name(p))
    }
}

/// Read and validate a configuration file; `None` gives the defaults.
pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse(&text).map_err(|e| e.context(format!("in {}", path.display())))
}

pub fn parse(text: &str) -> anyhow::Result<Config> {
    let config: Config = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    check_planner_name(&config.planner.name)?;
    Ok(config)
}
