//! TSMCTS: Sequential Halving at the root over SMCTS subsearches.
//!
//! The root candidates `A_1` are the Gumbel-top-`m1` actions of the prior.
//! Each iteration runs one independent SMCTS subsearch per surviving action
//! from a freshly sampled successor, with the particle budget split evenly
//! across survivors; the number of survivors halves and the per-action
//! budget doubles from one iteration to the next. Root values are averaged
//! across iterations weighted by particle counts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::operators::{gmz_logits, gumbel_topk, normalized, top_k, GmzConfig};
use crate::planner::{Counters, PlanContext, PlannerOutput};
use crate::smc::{ResamplingScheme, RootStatistic, SmcConfig};
use crate::smcts::run_smcts;
use crate::stream::StreamKey;

/// Halving plan for one planner call.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShSchedule {
    /// Survivor count per iteration: `m1, m1/2, ..., 2`.
    pub m: Vec<usize>,
    /// Particles per surviving action per iteration, highest ranked first.
    pub n_per_action: Vec<Vec<usize>>,
    pub t_sh: usize,
    pub num_iterations: usize,
}

impl ShSchedule {
    /// Model expansions of a call: one root transition per surviving action
    /// plus `N · t_sh` particle steps per iteration.
    pub fn expected_expansions(&self) -> u64 {
        self.n_per_action
            .iter()
            .map(|n| n.iter().map(|&k| 1 + (k * self.t_sh) as u64).sum::<u64>())
            .sum()
    }

    /// Particle steps spent in subsearches.
    pub fn particle_steps(&self) -> u64 {
        self.n_per_action
            .iter()
            .map(|n| n.iter().sum::<usize>() as u64 * self.t_sh as u64)
            .sum()
    }
}

pub fn compute_schedule(n: usize, t: usize, m1: usize) -> Result<ShSchedule> {
    if m1 < 2 || !m1.is_power_of_two() {
        return Err(Error::config(format!(
            "m1 = {m1} must be a power of two >= 2"
        )));
    }
    let iterations = m1.trailing_zeros() as usize;
    if n < m1 {
        return Err(Error::config(format!(
            "num_particles = {n} must be at least m1 = {m1}"
        )));
    }
    if t < iterations {
        return Err(Error::config(format!(
            "depth = {t} must be at least log2(m1) = {iterations}"
        )));
    }
    let t_sh = (t / iterations).max(1);
    let m: Vec<usize> = (0..iterations).map(|i| m1 >> i).collect();
    let n_per_action = m
        .iter()
        .map(|&mi| (0..mi).map(|j| n / mi + usize::from(j < n % mi)).collect())
        .collect();
    Ok(ShSchedule {
        m,
        n_per_action,
        t_sh,
        num_iterations: iterations,
    })
}

/// How survivors are chosen between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SurvivorRule {
    /// Top of `β_root · Q_SH + ln π_θ + g`.
    #[default]
    Operator,
    /// Top of `Q_SH` alone.
    QValue,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TsmctsConfig {
    pub num_particles: usize,
    pub depth: usize,
    pub m1: usize,
    pub resampling_period: usize,
    pub resampling: ResamplingScheme,
    pub search: GmzConfig,
    pub root: GmzConfig,
    pub survivor_rule: SurvivorRule,
}

impl Default for TsmctsConfig {
    fn default() -> Self {
        TsmctsConfig {
            num_particles: 4,
            depth: 6,
            m1: 4,
            resampling_period: 4,
            resampling: ResamplingScheme::Multinomial,
            search: GmzConfig::new(10.0),
            root: GmzConfig::new(100.0),
            survivor_rule: SurvivorRule::Operator,
        }
    }
}

impl TsmctsConfig {
    /// `m1` after clamping to the largest power of two not above `num_actions`.
    pub fn effective_m1(&self, num_actions: usize) -> Result<usize> {
        if num_actions < 2 {
            return Err(Error::config("tsmcts needs at least two actions"));
        }
        if self.m1 < 2 || !self.m1.is_power_of_two() {
            return Err(Error::config(format!(
                "m1 = {} must be a power of two >= 2",
                self.m1
            )));
        }
        let cap = 1usize << (usize::BITS - 1 - num_actions.leading_zeros());
        Ok(self.m1.min(cap))
    }

    pub fn schedule(&self, num_actions: usize) -> Result<ShSchedule> {
        compute_schedule(
            self.num_particles,
            self.depth,
            self.effective_m1(num_actions)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.resampling_period == 0 {
            return Err(Error::config("resampling_period must be at least 1"));
        }
        self.search.validate()?;
        self.root.validate()
    }

    fn subsearch(&self, particles: usize, depth: usize) -> SmcConfig {
        SmcConfig {
            num_particles: particles,
            depth,
            resampling_period: self.resampling_period,
            resampling: self.resampling,
            search: self.search,
            root: self.root,
            root_statistic: RootStatistic::MeanReturn,
        }
    }
}

/// Cross-iteration root statistics over the candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct RootAccumulators {
    pub n_total: Vec<u64>,
    pub q_sum: Vec<f64>,
    pub g: Vec<f64>,
}

impl RootAccumulators {
    pub fn new(g: Vec<f64>) -> Self {
        let n = g.len();
        RootAccumulators {
            n_total: vec![0; n],
            q_sum: vec![0.0; n],
            g,
        }
    }

    pub fn add(&mut self, a: usize, particles: usize, q: f64) {
        self.n_total[a] += particles as u64;
        self.q_sum[a] += particles as f64 * q;
    }

    /// Particle-weighted mean of the iteration estimates, 0 if never updated.
    pub fn q_sh(&self, a: usize) -> f64 {
        if self.n_total[a] > 0 {
            self.q_sum[a] / self.n_total[a] as f64
        } else {
            0.0
        }
    }

    pub fn q_sh_all(&self) -> Vec<f64> {
        (0..self.g.len()).map(|a| self.q_sh(a)).collect()
    }
}

fn root_estimate(
    ctx: &PlanContext<'_>,
    s0: usize,
    a: usize,
    cfg: &SmcConfig,
    iteration: usize,
    key: StreamKey,
) -> Result<(f64, Counters)> {
    let mut rng = key
        .label("root-step")
        .child(iteration as u64)
        .child(a as u64)
        .rng();
    let (s1, r) = ctx.mdp.sample_transition(s0, a, &mut rng)?;
    let sub = run_smcts(
        ctx,
        s1,
        cfg,
        key.label("sub").child(iteration as u64).child(a as u64),
    )?;
    let mut counters = sub.counters;
    counters.model_expansions += 1;
    counters.value_evaluations += 1;
    Ok((r + ctx.mdp.discount() * sub.v_search, counters))
}

/// TSMCTS planner call.
pub fn run_tsmcts(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &TsmctsConfig,
    key: StreamKey,
) -> Result<PlannerOutput> {
    ctx.mdp.check_state(s0)?;
    cfg.validate()?;
    let schedule = cfg.schedule(ctx.num_actions())?;
    let prior = ctx.prior.row(s0);
    let prior_logits: Vec<f64> = prior
        .iter()
        .map(|&p| {
            if p > 0.0 {
                crate::math::ln(p)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = gumbel_topk(&prior_logits, schedule.m[0], &mut key.label("gumbel").rng())?;
    let candidates = top.ranked.clone();
    let mut acc = RootAccumulators::new(top.noise);
    let mut survivors = top.ranked;
    let mut counters = Counters::default();
    let sub_cfgs: Vec<Vec<SmcConfig>> = schedule
        .n_per_action
        .iter()
        .map(|ns| {
            ns.iter()
                .map(|&k| cfg.subsearch(k, schedule.t_sh))
                .collect()
        })
        .collect();

    for i in 0..schedule.num_iterations {
        let run = |rank: usize| root_estimate(ctx, s0, survivors[rank], &sub_cfgs[i][rank], i, key);
        #[cfg(feature = "parallel")]
        let results: Vec<Result<(f64, Counters)>> = {
            use rayon::prelude::*;
            (0..survivors.len()).into_par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<(f64, Counters)>> = (0..survivors.len()).map(run).collect();
        for (rank, res) in results.into_iter().enumerate() {
            let (q, c) = res?;
            acc.add(survivors[rank], schedule.n_per_action[i][rank], q);
            counters += c;
        }
        if let Some(&next) = schedule.m.get(i + 1) {
            survivors = next_survivors(&survivors, &acc, prior, cfg, next);
        }
    }

    let q_sh = acc.q_sh_all();
    let logits = gmz_logits(prior, &q_sh, &cfg.root, &candidates, Some(&acc.g));
    let policy = normalized(&logits).into_inner();
    let v_search = candidates.iter().map(|&a| policy[a] * q_sh[a]).sum();
    let mut root_values = vec![None; ctx.num_actions()];
    for &a in &candidates {
        root_values[a] = Some(q_sh[a]);
    }
    let mut out = PlannerOutput::new(policy, v_search, counters, root_values);
    out.schedule = Some(schedule);
    Ok(out)
}

fn next_survivors(
    current: &[usize],
    acc: &RootAccumulators,
    prior: &[f64],
    cfg: &TsmctsConfig,
    keep: usize,
) -> Vec<usize> {
    let q_sh = acc.q_sh_all();
    let scores = match cfg.survivor_rule {
        SurvivorRule::Operator => gmz_logits(prior, &q_sh, &cfg.root, current, Some(&acc.g)),
        SurvivorRule::QValue => {
            let mut s = vec![f64::NEG_INFINITY; q_sh.len()];
            current.iter().for_each(|&a| s[a] = q_sh[a]);
            s
        }
    };
    top_k(&scores, keep)
}
