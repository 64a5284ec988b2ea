//! Approximate policy iteration with a planner in the loop.
//!
//! Each round collects episodes by sampling actions from the planner's
//! improved policy, stores `(s, a, r, π_improved, V_search)` items with their
//! TD-λ value targets in a sliding-window replay buffer, then runs SGD steps
//! on a cross-entropy-plus-entropy policy loss and a squared-error value
//! loss. Parameters are tabular: one logit per `(s, a)` and one value per
//! state.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::math::{argmax, exp, ln, log_sum_exp, powi};
use crate::mdp::{value_iteration, PolicyDistribution, PolicyTable, TabularMdp, ValueTable};
use crate::planner::{Counters, PlanContext, Planner, PlannerOutput, SearchValues};
use crate::stream::StreamKey;

/// Softmax policy with one free logit per state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularSoftmaxPolicy {
    num_actions: usize,
    logits: Vec<f64>,
}

impl TabularSoftmaxPolicy {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        TabularSoftmaxPolicy {
            num_actions,
            logits: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_logits(num_actions: usize, logits: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || logits.len() % num_actions != 0 {
            return Err(Error::invalid("logit table is not a whole number of rows"));
        }
        Ok(TabularSoftmaxPolicy {
            num_actions,
            logits,
        })
    }

    pub fn num_states(&self) -> usize {
        self.logits.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_row(&self, s: usize) -> &[f64] {
        &self.logits[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Action distribution at `s`; every entry is strictly positive.
    pub fn probs(&self, s: usize) -> Vec<f64> {
        let row = self.logits_row(s);
        let lse = log_sum_exp(row);
        let mut p: Vec<f64> = row
            .iter()
            .map(|l| exp(l - lse).max(f64::MIN_POSITIVE))
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    pub fn table(&self) -> PolicyTable {
        let probs = (0..self.num_states()).flat_map(|s| self.probs(s)).collect();
        PolicyTable::new(self.num_states(), self.num_actions, probs)
            .expect("softmax rows are distributions")
    }
}

/// One value per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularValue {
    pub v: Vec<f64>,
}

impl TabularValue {
    pub fn zeros(num_states: usize) -> Self {
        TabularValue {
            v: vec![0.0; num_states],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplayItem {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub target: PolicyDistribution,
    pub v_search: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// Episodes collected in total.
    pub episodes: usize,
    /// Episode horizon; longer episodes are truncated.
    pub unroll_length: usize,
    /// Episodes collected per round.
    pub batch_size: usize,
    /// SGD steps per round.
    pub sgd_steps: usize,
    /// Items per SGD step; 0 uses the whole buffer.
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub value_learning_rate: f64,
    pub entropy_coefficient: f64,
    pub lambda: f64,
    /// Rounds kept in the replay buffer.
    pub replay_max_age: usize,
    /// Evaluate after every this many rounds.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 200,
            unroll_length: 64,
            batch_size: 1,
            sgd_steps: 8,
            minibatch_size: 0,
            learning_rate: 0.5,
            value_learning_rate: 0.25,
            entropy_coefficient: 0.0,
            lambda: 0.95,
            replay_max_age: 64,
            eval_every: 1,
            eval_episodes: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("episodes", self.episodes),
            ("unroll_length", self.unroll_length),
            ("batch_size", self.batch_size),
            ("replay_max_age", self.replay_max_age),
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        let rates = [
            ("learning_rate", self.learning_rate),
            ("value_learning_rate", self.value_learning_rate),
            ("entropy_coefficient", self.entropy_coefficient),
        ];
        for (name, value) in rates {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::config(format!(
                    "{name} = {value} must be finite and >= 0"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!(
                "lambda = {} must lie in [0, 1]",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// λ-returns `G_t = r_t + γ[(1−λ) v_{t+1} + λ G_{t+1}]` where `v_t` is
/// `bootstraps[t]` and both `v_n` and `G_n` equal `final_bootstrap`.
pub fn td_lambda_targets(
    rewards: &[f64],
    bootstraps: &[f64],
    final_bootstrap: f64,
    discount: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    if rewards.len() != bootstraps.len() {
        return Err(Error::invalid(format!(
            "{} rewards but {} bootstrap values",
            rewards.len(),
            bootstraps.len()
        )));
    }
    let n = rewards.len();
    let mut out = vec![0.0; n];
    let mut g = final_bootstrap;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n {
            bootstraps[t + 1]
        } else {
            final_bootstrap
        };
        g = rewards[t] + discount * ((1.0 - lambda) * next_v + lambda * g);
        out[t] = g;
    }
    Ok(out)
}

/// Mean over items of `−Σ_a π_t(a) ln π_θ(a|s) − c_ent H(π_θ(·|s))`.
pub fn policy_loss(policy: &TabularSoftmaxPolicy, batch: &[ReplayItem], c_ent: f64) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|item| {
            let row = policy.logits_row(item.state);
            let lse = log_sum_exp(row);
            let ce: f64 = item
                .target
                .probs()
                .iter()
                .zip(row)
                .map(|(t, l)| -t * (l - lse))
                .sum();
            let entropy: f64 = row.iter().map(|l| -exp(l - lse) * (l - lse)).sum();
            ce - c_ent * entropy
        })
        .sum();
    total / batch.len() as f64
}

/// Gradient of [`policy_loss`] with respect to the logits.
pub fn policy_gradient(
    policy: &TabularSoftmaxPolicy,
    batch: &[ReplayItem],
    c_ent: f64,
) -> Vec<f64> {
    let na = policy.num_actions();
    let mut grad = vec![0.0; policy.logits.len()];
    let scale = 1.0 / batch.len() as f64;
    for item in batch {
        let row = policy.logits_row(item.state);
        let lse = log_sum_exp(row);
        let log_p: Vec<f64> = row.iter().map(|l| l - lse).collect();
        let p: Vec<f64> = log_p.iter().map(|&x| exp(x)).collect();
        let entropy: f64 = -p.iter().zip(&log_p).map(|(p, lp)| p * lp).sum::<f64>();
        for a in 0..na {
            let g = p[a] - item.target.probs()[a] + c_ent * p[a] * (log_p[a] + entropy);
            grad[item.state * na + a] += scale * g;
        }
    }
    grad
}

/// One SGD step on the policy loss.
pub fn update_policy(policy: &mut TabularSoftmaxPolicy, batch: &[ReplayItem], lr: f64, c_ent: f64) {
    if batch.is_empty() {
        return;
    }
    let grad = policy_gradient(policy, batch, c_ent);
    for (l, g) in policy.logits.iter_mut().zip(grad) {
        *l -= lr * g;
    }
}

/// Mean over items of `(target − v(s))²`.
pub fn value_loss(value: &TabularValue, batch: &[ReplayItem]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|i| {
            let e = i.value_target - value.v[i.state];
            e * e
        })
        .sum();
    total / batch.len() as f64
}

/// Gradient of [`value_loss`] with respect to the value table.
pub fn value_gradient(value: &TabularValue, batch: &[ReplayItem]) -> Vec<f64> {
    let mut grad = vec![0.0; value.v.len()];
    let scale = 2.0 / batch.len() as f64;
    for item in batch {
        grad[item.state] -= scale * (item.value_target - value.v[item.state]);
    }
    grad
}

/// One SGD step on the value loss.
pub fn update_value(value: &mut TabularValue, batch: &[ReplayItem], lr: f64) {
    if batch.is_empty() {
        return;
    }
    let grad = value_gradient(value, batch);
    for (v, g) in value.v.iter_mut().zip(grad) {
        *v -= lr * g;
    }
}

/// Greedy planner backed by value iteration; used to check the training loop.
#[derive(Debug, Clone)]
pub struct OraclePlanner {
    values: ValueTable,
    greedy: Vec<usize>,
}

impl OraclePlanner {
    pub fn new(mdp: &TabularMdp) -> Result<Self> {
        let (values, greedy) = value_iteration(mdp, 1e-10)?;
        Ok(OraclePlanner { values, greedy })
    }
}

impl Planner for OraclePlanner {
    fn name(&self) -> &str {
        "oracle"
    }

    fn plan(&self, ctx: &PlanContext<'_>, s0: usize, _key: StreamKey) -> Result<PlannerOutput> {
        ctx.mdp.check_state(s0)?;
        let na = ctx.num_actions();
        let mut policy = vec![0.0; na];
        policy[self.greedy[s0]] = 1.0;
        let root_values = self.values.q_row(s0).iter().map(|q| Some(*q)).collect();
        Ok(PlannerOutput::new(
            policy,
            self.values.value(s0),
            Counters::default(),
            root_values,
        ))
    }
}

/// Items of one episode plus what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub items: Vec<ReplayItem>,
    pub counters: Counters,
}

/// Play one episode, sampling actions from the planner's improved policy.
pub fn collect_episode<P: Planner + ?Sized>(
    ctx: &PlanContext<'_>,
    planner: &P,
    value: &TabularValue,
    cfg: &TrainConfig,
    key: StreamKey,
) -> Result<Episode> {
    let mdp = ctx.mdp;
    let mut env_rng = key.label("env").rng();
    let mut s = mdp.sample_initial(&mut env_rng);
    let mut items = Vec::new();
    let mut counters = Counters::default();
    for t in 0..cfg.unroll_length {
        if mdp.is_terminal(s) {
            break;
        }
        let out = planner.plan(ctx, s, key.label("plan").child(t as u64))?;
        counters += out.counters;
        let target = PolicyDistribution::new(out.policy)?;
        let action = crate::mdp::sample_categorical(target.probs(), &mut env_rng);
        let (next, reward) = mdp.sample_transition(s, action, &mut env_rng)?;
        items.push(ReplayItem {
            state: s,
            action,
            reward,
            target,
            v_search: out.v_search,
            value_target: 0.0,
        });
        s = next;
    }
    let final_bootstrap = if mdp.is_terminal(s) { 0.0 } else { value.v[s] };
    let rewards: Vec<f64> = items.iter().map(|i| i.reward).collect();
    let boots: Vec<f64> = items.iter().map(|i| i.v_search).collect();
    let targets = td_lambda_targets(
        &rewards,
        &boots,
        final_bootstrap,
        mdp.discount(),
        cfg.lambda,
    )?;
    for (item, g) in items.iter_mut().zip(targets) {
        item.value_target = g;
    }
    Ok(Episode { items, counters })
}

/// Discounted return of acting greedily on the planner output.
pub fn evaluate<P: Planner + ?Sized>(
    ctx: &PlanContext<'_>,
    planner: &P,
    horizon: usize,
    key: StreamKey,
) -> Result<f64> {
    let mdp = ctx.mdp;
    let mut rng = key.label("env").rng();
    let mut s = mdp.sample_initial(&mut rng);
    let mut ret = 0.0;
    for t in 0..horizon {
        if mdp.is_terminal(s) {
            break;
        }
        let out = planner.plan(ctx, s, key.label("plan").child(t as u64))?;
        let action = argmax(&out.policy).expect("nonempty policy");
        let (next, reward) = mdp.sample_transition(s, action, &mut rng)?;
        ret += powi(mdp.discount(), t) * reward;
        s = next;
    }
    Ok(ret)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainRow {
    /// Episodes collected so far.
    pub episode: usize,
    pub env_steps: u64,
    pub eval_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub model_expansions: u64,
    pub value_evaluations: u64,
    pub resampling_fallbacks: u64,
}

impl TrainRow {
    pub const HEADER: [&'static str; 8] = [
        "episode",
        "env_steps",
        "eval_return",
        "policy_loss",
        "value_loss",
        "model_expansions",
        "value_evaluations",
        "resampling_fallbacks",
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub rows: Vec<TrainRow>,
    pub policy: TabularSoftmaxPolicy,
    pub value: TabularValue,
}

fn collect_round<P: Planner + ?Sized>(
    ctx: &PlanContext<'_>,
    planner: &P,
    value: &TabularValue,
    cfg: &TrainConfig,
    first_episode: usize,
    count: usize,
    key: StreamKey,
) -> Result<Vec<Episode>> {
    let one = |e: usize| {
        collect_episode(
            ctx,
            planner,
            value,
            cfg,
            key.label("episode").child(e as u64),
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (first_episode..first_episode + count)
            .into_par_iter()
            .map(one)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (first_episode..first_episode + count).map(one).collect()
    }
}

/// Run the training loop, calling `on_row` after every evaluation.
pub fn train<P, F>(
    mdp: &TabularMdp,
    planner: &P,
    cfg: &TrainConfig,
    seed: u64,
    mut on_row: F,
) -> Result<TrainOutcome>
where
    P: Planner + ?Sized,
    F: FnMut(&TrainRow) -> Result<()>,
{
    cfg.validate()?;
    let key = StreamKey::new(seed).label("train");
    let mut policy = TabularSoftmaxPolicy::zeros(mdp.num_states(), mdp.num_actions());
    let mut value = TabularValue::zeros(mdp.num_states());
    let mut buffer: VecDeque<Vec<ReplayItem>> = VecDeque::new();
    let mut rows = Vec::new();
    let mut counters = Counters::default();
    let mut env_steps = 0u64;
    let mut episodes = 0usize;
    let mut round = 0usize;
    let (mut pl_sum, mut vl_sum, mut loss_count) = (0.0, 0.0, 0usize);

    while episodes < cfg.episodes {
        let count = cfg.batch_size.min(cfg.episodes - episodes);
        let prior = policy.table();
        let values = SearchValues::bootstrap(mdp, &value.v)?;
        let ctx = PlanContext::new(mdp, &prior, &values)?;
        let round_items: Vec<ReplayItem> =
            collect_round(&ctx, planner, &value, cfg, episodes, count, key)?
                .into_iter()
                .flat_map(|ep| {
                    counters += ep.counters;
                    ep.items
                })
                .collect();
        env_steps += round_items.len() as u64;
        episodes += count;
        buffer.push_back(round_items);
        while buffer.len() > cfg.replay_max_age {
            buffer.pop_front();
        }

        let pool: Vec<&ReplayItem> = buffer.iter().flatten().collect();
        if !pool.is_empty() {
            let mut rng = key.label("sgd").child(round as u64).rng();
            for _ in 0..cfg.sgd_steps {
                let batch: Vec<ReplayItem> =
                    if cfg.minibatch_size == 0 || cfg.minibatch_size >= pool.len() {
                        pool.iter().map(|i| (*i).clone()).collect()
                    } else {
                        index::sample(&mut rng, pool.len(), cfg.minibatch_size)
                            .into_iter()
                            .map(|i| pool[i].clone())
                            .collect()
                    };
                pl_sum += policy_loss(&policy, &batch, cfg.entropy_coefficient);
                vl_sum += value_loss(&value, &batch);
                loss_count += 1;
                update_policy(
                    &mut policy,
                    &batch,
                    cfg.learning_rate,
                    cfg.entropy_coefficient,
                );
                update_value(&mut value, &batch, cfg.value_learning_rate);
            }
        }

        round += 1;
        if round % cfg.eval_every == 0 || episodes >= cfg.episodes {
            let prior = policy.table();
            let values = SearchValues::bootstrap(mdp, &value.v)?;
            let ctx = PlanContext::new(mdp, &prior, &values)?;
            let mut total = 0.0;
            for e in 0..cfg.eval_episodes {
                total += evaluate(
                    &ctx,
                    planner,
                    cfg.unroll_length,
                    key.label("eval").child(round as u64).child(e as u64),
                )?;
            }
            let mean = |s: f64| {
                if loss_count > 0 {
                    s / loss_count as f64
                } else {
                    0.0
                }
            };
            let row = TrainRow {
                episode: episodes,
                env_steps,
                eval_return: total / cfg.eval_episodes as f64,
                policy_loss: mean(pl_sum),
                value_loss: mean(vl_sum),
                model_expansions: counters.model_expansions,
                value_evaluations: counters.value_evaluations,
                resampling_fallbacks: counters.resampling_fallbacks,
            };
            on_row(&row)?;
            rows.push(row);
            (pl_sum, vl_sum, loss_count) = (0.0, 0.0, 0);
        }
    }
    Ok(TrainOutcome {
        rows,
        policy,
        value,
    })
}

/// Area under an evaluation curve by the trapezoid rule over `x`.
pub fn trapezoid_auc(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Kullback-Leibler divergence `KL(p ‖ q)` over the support of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (ln(*p) - ln(*q)))
        .sum()
}
