//! Measurements on planners: root-estimator variance, active actions in the
//! policy target, exact policy-improvement checks and depth sweeps.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{mean_var, sqrt};
use crate::mdp::{exact_policy_evaluation, PolicyTable, TabularMdp};
use crate::planner::{PlanContext, Planner, PlannerOutput};
use crate::stream::StreamKey;
use crate::training::{train, trapezoid_auc, TrainConfig};

/// Planner calls per measurement unless configured otherwise.
pub const DEFAULT_CALLS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceReport {
    pub mean: f64,
    /// Unbiased sample variance of `v_search`.
    pub variance: f64,
    pub mean_active_actions: f64,
    pub calls: usize,
}

/// Run `calls` independently keyed planner calls at `state`.
pub fn repeated_calls<P: Planner + ?Sized>(
    ctx: &PlanContext<'_>,
    planner: &P,
    state: usize,
    calls: usize,
    key: StreamKey,
) -> Result<Vec<PlannerOutput>> {
    let one = |i: usize| planner.plan(ctx, state, key.child(i as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..calls).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..calls).map(one).collect()
    }
}

pub fn root_variance<P: Planner + ?Sized>(
    ctx: &PlanContext<'_>,
    planner: &P,
    state: usize,
    calls: usize,
    seed: u64,
) -> Result<VarianceReport> {
    if calls < 2 {
        return Err(Error::config("variance needs at least two planner calls"));
    }
    let outputs = repeated_calls(
        ctx,
        planner,
        state,
        calls,
        StreamKey::new(seed).label("variance"),
    )?;
    let values: Vec<f64> = outputs.iter().map(|o| o.v_search).collect();
    let (mean, variance) = mean_var(&values);
    let active = outputs
        .iter()
        .map(|o| active_action_count(o) as f64)
        .sum::<f64>()
        / calls as f64;
    Ok(VarianceReport {
        mean,
        variance,
        mean_active_actions: active,
        calls,
    })
}

pub fn active_action_count(output: &PlannerOutput) -> usize {
    output.policy.iter().filter(|p| **p > 0.0).count()
}

/// Exact value at `s0` of acting with `root` at `s0` and `prior` elsewhere.
pub fn mixed_policy_value(
    mdp: &TabularMdp,
    prior: &PolicyTable,
    s0: usize,
    root: &[f64],
) -> Result<f64> {
    let mut mixed = prior.clone();
    mixed.set_row(s0, root)?;
    Ok(exact_policy_evaluation(mdp, &mixed)?.value(s0))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImprovementReport {
    /// `V^{π_θ}(s0)`.
    pub baseline: f64,
    /// Mean over replicates of the mixed-policy value minus the baseline.
    pub gap: f64,
    /// Standard error of `gap`.
    pub std_error: f64,
    pub replicates: usize,
}

impl ImprovementReport {
    /// `gap ≥ −3·std_error`, with a small absolute floor for exact ties.
    pub fn passes(&self) -> bool {
        self.gap >= -3.0 * self.std_error - 1e-12
    }
}

/// Exact improvement of the planner's root policy over the prior.
pub fn improvement_check<P: Planner + ?Sized>(
    ctx: &PlanContext<'_>,
    planner: &P,
    s0: usize,
    replicates: usize,
    seed: u64,
) -> Result<ImprovementReport> {
    if replicates == 0 {
        return Err(Error::config(
            "improvement check needs at least one replicate",
        ));
    }
    let baseline = exact_policy_evaluation(ctx.mdp, ctx.prior)?.value(s0);
    let outputs = repeated_calls(
        ctx,
        planner,
        s0,
        replicates,
        StreamKey::new(seed).label("improvement"),
    )?;
    let gaps = outputs
        .iter()
        .map(|o| Ok(mixed_policy_value(ctx.mdp, ctx.prior, s0, &o.policy)? - baseline))
        .collect::<Result<Vec<f64>>>()?;
    let (gap, var) = mean_var(&gaps);
    let std_error = if replicates > 1 {
        sqrt(var / replicates as f64)
    } else {
        0.0
    };
    Ok(ImprovementReport {
        baseline,
        gap,
        std_error,
        replicates,
    })
}

/// True when each row is at least the previous one within three combined
/// standard errors.
pub fn monotone_within_bounds(rows: &[ImprovementReport]) -> bool {
    rows.windows(2).all(|w| {
        let slack =
            3.0 * sqrt(w[0].std_error * w[0].std_error + w[1].std_error * w[1].std_error) + 1e-12;
        w[1].gap >= w[0].gap - slack
    })
}

/// Min-max normalize within each group; a degenerate group maps to 0.5.
pub fn min_max_normalize(values: &[f64], groups: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let max_group = groups.iter().copied().max().map_or(0, |g| g + 1);
    for g in 0..max_group {
        let members: Vec<usize> = (0..values.len()).filter(|&i| groups[i] == g).collect();
        let lo = members
            .iter()
            .map(|&i| values[i])
            .fold(f64::INFINITY, f64::min);
        let hi = members
            .iter()
            .map(|&i| values[i])
            .fold(f64::NEG_INFINITY, f64::max);
        for &i in &members {
            out[i] = if hi > lo {
                (values[i] - lo) / (hi - lo)
            } else {
                0.5
            };
        }
    }
    out
}

/// Percentile bootstrap interval for the mean of `samples`.
pub fn bootstrap_interval(
    samples: &[f64],
    resamples: usize,
    level: f64,
    key: StreamKey,
) -> (f64, f64) {
    if samples.is_empty() || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = key.rng();
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[(libm::round(q * (resamples - 1) as f64) as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}

/// One training run of a depth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell<P> {
    pub env: usize,
    pub label: String,
    pub depth: usize,
    pub seed: u64,
    pub planner: P,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AucRecord {
    pub env: usize,
    pub label: String,
    pub depth: usize,
    pub seed: u64,
    pub auc: f64,
    pub normalized: f64,
}

/// Evaluation-return AUC over episodes of one training run.
pub fn training_auc<P: Planner + ?Sized>(
    mdp: &TabularMdp,
    planner: &P,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64> {
    let out = train(mdp, planner, cfg, seed, |_| Ok(()))?;
    let x: Vec<f64> = core::iter::once(0.0)
        .chain(out.rows.iter().map(|r| r.episode as f64))
        .collect();
    let y: Vec<f64> = core::iter::once(0.0)
        .chain(out.rows.iter().map(|r| r.eval_return))
        .collect();
    Ok(trapezoid_auc(&x, &y))
}

/// Train every cell and normalize AUCs per environment.
pub fn depth_sweep<P: Planner>(
    envs: &[TabularMdp],
    cells: &[SweepCell<P>],
    cfg: &TrainConfig,
) -> Result<Vec<AucRecord>> {
    if envs.is_empty() || cells.is_empty() {
        return Err(Error::config(
            "depth sweep needs at least one environment and one cell",
        ));
    }
    let one = |c: &SweepCell<P>| training_auc(&envs[c.env], &c.planner, cfg, c.seed);
    #[cfg(feature = "parallel")]
    let aucs: Vec<f64> = {
        use rayon::prelude::*;
        cells.par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let aucs: Vec<f64> = cells.iter().map(one).collect::<Result<_>>()?;
    let groups: Vec<usize> = cells.iter().map(|c| c.env).collect();
    let normalized = min_max_normalize(&aucs, &groups);
    Ok(cells
        .iter()
        .zip(aucs.into_iter().zip(normalized))
        .map(|(c, (auc, normalized))| AucRecord {
            env: c.env,
            label: c.label.clone(),
            depth: c.depth,
            seed: c.seed,
            auc,
            normalized,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DepthSummary {
    pub label: String,
    pub depth: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Mean normalized AUC per `(label, depth)` with a bootstrap interval over
/// seeds; each seed's value is averaged across environments first.
pub fn summarize(
    records: &[AucRecord],
    resamples: usize,
    level: f64,
    key: StreamKey,
) -> Vec<DepthSummary> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(l, d)| *l == r.label && *d == r.depth) {
            keys.push((r.label.clone(), r.depth));
        }
    }
    keys.into_iter()
        .enumerate()
        .map(|(i, (label, depth))| {
            let mut seeds: Vec<u64> = Vec::new();
            for r in records
                .iter()
                .filter(|r| r.label == label && r.depth == depth)
            {
                if !seeds.contains(&r.seed) {
                    seeds.push(r.seed);
                }
            }
            let per_seed: Vec<f64> = seeds
                .iter()
                .map(|&s| {
                    let v: Vec<f64> = records
                        .iter()
                        .filter(|r| r.label == label && r.depth == depth && r.seed == s)
                        .map(|r| r.normalized)
                        .collect();
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            let (lo, hi) = bootstrap_interval(&per_seed, resamples, level, key.child(i as u64));
            DepthSummary {
                label,
                depth,
                mean,
                lo,
                hi,
            }
        })
        .collect()
}
