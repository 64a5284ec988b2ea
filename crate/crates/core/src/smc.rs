//! Particle SMC over trajectories (RL-SMC).
//!
//! Particles are proposed by the prior policy and reweighted towards the
//! trajectory distribution of the in-search improved policy: each step
//! multiplies a particle's weight by `π'(a|s) / π_θ(a|s)`. Selection resamples
//! every `resampling_period` steps. The root policy is the weighted fraction
//! of particles descending from each root action.
//!
//! Every particle-step draws from its own substream keyed by
//! `(call, particle, step)`, so the result does not depend on how particles
//! are scheduled across threads. Reductions run in particle-index order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{exp, powi};
use crate::operators::{gmz_improve, gmz_log_ratio, GmzConfig};
use crate::planner::{Counters, PlanContext, PlannerOutput};
use crate::smcts::{per_root_normalize, root_q_step, RootValueTable};
use crate::stream::{StreamKey, StreamRng};

/// Particle counts at or above this use the thread pool when the `parallel`
/// feature is on.
#[cfg(feature = "parallel")]
const PARALLEL_PARTICLES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ResamplingScheme {
    #[default]
    Multinomial,
    Systematic,
}

/// How RL-SMC turns its particles into a root value estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RootStatistic {
    /// Occupancy policy; values from the particles alive at the final depth.
    #[default]
    Occupancy,
    /// Keep the most recent per-root-action return estimate, even after the
    /// action has lost all its particles.
    LastReturn,
    /// Average every per-root-action return estimate.
    MeanReturn,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmcConfig {
    pub num_particles: usize,
    pub depth: usize,
    pub resampling_period: usize,
    pub resampling: ResamplingScheme,
    /// Operator reweighting particles inside the search.
    pub search: GmzConfig,
    /// Operator producing the root policy from value estimates.
    pub root: GmzConfig,
    pub root_statistic: RootStatistic,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            num_particles: 4,
            depth: 6,
            resampling_period: 4,
            resampling: ResamplingScheme::Multinomial,
            search: GmzConfig::new(10.0),
            root: GmzConfig::new(100.0),
            root_statistic: RootStatistic::Occupancy,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::config("num_particles must be at least 1"));
        }
        if self.depth == 0 {
            return Err(Error::config("depth must be at least 1"));
        }
        if self.resampling_period == 0 {
            return Err(Error::config("resampling_period must be at least 1"));
        }
        self.search.validate()?;
        self.root.validate()
    }
}

/// Live state of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: usize,
    pub root_action: usize,
    pub weight: f64,
    /// Discounted reward accumulated so far.
    pub ret: f64,
    /// Steps taken so far.
    pub depth: usize,
    /// False once a terminal state has been entered.
    pub alive: bool,
}

impl Particle {
    /// `ret + γ^depth · v(state)`, zero bootstrap at terminals.
    pub fn bootstrapped_return(&self, ctx: &PlanContext<'_>) -> f64 {
        self.ret + powi(ctx.mdp.discount(), self.depth) * ctx.bootstrap(self.state)
    }
}

/// What one mutation step did to a particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub action: usize,
    pub reward: f64,
    /// False for particles that were already absorbed and did not move.
    pub moved: bool,
}

/// `n` particles at `s0` with root actions drawn i.i.d. from the prior.
pub fn init_particles(ctx: &PlanContext<'_>, s0: usize, n: usize, key: StreamKey) -> Vec<Particle> {
    let alive = !ctx.mdp.is_terminal(s0);
    let key = key.label("root-action");
    (0..n)
        .map(|i| Particle {
            state: s0,
            root_action: ctx.prior.sample(s0, &mut key.child(i as u64).rng()),
            weight: 1.0,
            ret: 0.0,
            depth: 0,
            alive,
        })
        .collect()
}

fn advance(p: &mut Particle, ctx: &PlanContext<'_>, rng: &mut StreamRng) -> Result<Transition> {
    if !p.alive {
        return Ok(Transition {
            from: p.state,
            action: 0,
            reward: 0.0,
            moved: false,
        });
    }
    let from = p.state;
    let action = if p.depth == 0 {
        p.root_action
    } else {
        ctx.prior.sample(from, rng)
    };
    let (next, reward) = ctx.mdp.sample_transition(from, action, rng)?;
    p.ret += powi(ctx.mdp.discount(), p.depth) * reward;
    p.depth += 1;
    p.state = next;
    p.alive = !ctx.mdp.is_terminal(next);
    Ok(Transition {
        from,
        action,
        reward,
        moved: true,
    })
}

/// Advance every live particle one step: the root action at depth 0, a prior
/// sample afterwards. `step` keys the random substreams.
pub fn mutate(
    particles: &mut [Particle],
    ctx: &PlanContext<'_>,
    step: usize,
    key: StreamKey,
) -> Result<Vec<Transition>> {
    let key = key.label("mutate").child(step as u64);
    #[cfg(feature = "parallel")]
    if particles.len() >= PARALLEL_PARTICLES {
        use rayon::prelude::*;
        return particles
            .par_iter_mut()
            .enumerate()
            .map(|(i, p)| advance(p, ctx, &mut key.child(i as u64).rng()))
            .collect();
    }
    particles
        .iter_mut()
        .enumerate()
        .map(|(i, p)| advance(p, ctx, &mut key.child(i as u64).rng()))
        .collect()
}

fn zero_proposal(tr: &Transition) -> Error {
    Error::invariant(format!(
        "prior assigns zero probability to sampled action {} in state {}",
        tr.action, tr.from
    ))
}

/// Multiply each moved particle's weight by `target(tr) / π_θ(a|s)`, where
/// `target` returns the improved policy's probability of the sampled action.
pub fn correct<F>(
    particles: &mut [Particle],
    transitions: &[Transition],
    ctx: &PlanContext<'_>,
    target: F,
) -> Result<()>
where
    F: Fn(&Transition) -> f64,
{
    for (p, tr) in particles.iter_mut().zip(transitions) {
        if !tr.moved {
            continue;
        }
        let proposal = ctx.prior.row(tr.from)[tr.action];
        if !(proposal > 0.0) {
            return Err(zero_proposal(tr));
        }
        p.weight *= target(tr) / proposal;
    }
    Ok(())
}

fn gmz_weight(
    p: &mut Particle,
    tr: &Transition,
    ctx: &PlanContext<'_>,
    cfg: &GmzConfig,
) -> Result<()> {
    if !tr.moved {
        return Ok(());
    }
    let prior = ctx.prior.row(tr.from);
    if !(prior[tr.action] > 0.0) {
        return Err(zero_proposal(tr));
    }
    let log_ratio = if ctx.values.one_sample() {
        let mut q = ctx.values.q_row(tr.from).to_vec();
        q[tr.action] = tr.reward + ctx.mdp.discount() * ctx.bootstrap(p.state);
        gmz_log_ratio(prior, &q, cfg, tr.action)
    } else {
        gmz_log_ratio(prior, ctx.values.q_row(tr.from), cfg, tr.action)
    };
    p.weight *= exp(log_ratio);
    Ok(())
}

/// Correction with the in-search regularized operator.
pub fn correct_gmz(
    particles: &mut [Particle],
    transitions: &[Transition],
    ctx: &PlanContext<'_>,
    cfg: &GmzConfig,
) -> Result<()> {
    #[cfg(feature = "parallel")]
    if particles.len() >= PARALLEL_PARTICLES {
        use rayon::prelude::*;
        return particles
            .par_iter_mut()
            .zip(transitions.par_iter())
            .try_for_each(|(p, tr)| gmz_weight(p, tr, ctx, cfg));
    }
    for (p, tr) in particles.iter_mut().zip(transitions) {
        gmz_weight(p, tr, ctx, cfg)?;
    }
    Ok(())
}

/// Resample `particles.len()` particles proportionally to their weights and
/// reset all weights to 1. If every weight is zero (or the total is not
/// finite) resampling falls back to uniform; the return value reports that.
pub fn select<R: Rng + ?Sized>(
    particles: &mut Vec<Particle>,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> bool {
    let n = particles.len();
    if n == 0 {
        return false;
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0;
    for p in particles.iter() {
        total += p.weight;
        cumulative.push(total);
    }
    let fallback = !(total > 0.0 && total.is_finite());
    let pick = |u: f64| -> usize {
        if fallback {
            ((u * n as f64) as usize).min(n - 1)
        } else {
            cumulative.partition_point(|c| *c <= u * total).min(n - 1)
        }
    };
    let chosen: Vec<usize> = match scheme {
        ResamplingScheme::Multinomial => (0..n).map(|_| pick(rng.random::<f64>())).collect(),
        ResamplingScheme::Systematic => {
            let offset: f64 = rng.random();
            (0..n)
                .map(|i| pick((i as f64 + offset) / n as f64))
                .collect()
        }
    };
    let old = core::mem::take(particles);
    particles.extend(chosen.into_iter().map(|i| Particle {
        weight: 1.0,
        ..old[i]
    }));
    fallback
}

/// Weighted root occupancy `Σ_n w_n 1{a_0^n = a} / Σ_n w_n`.
pub fn occupancy(particles: &[Particle], num_actions: usize) -> Vec<f64> {
    let mut occ = vec![0.0; num_actions];
    let mut total = 0.0;
    for p in particles {
        occ[p.root_action] += p.weight;
        total += p.weight;
    }
    if total > 0.0 {
        occ.iter_mut().for_each(|x| *x /= total);
    } else {
        // all weights zero: count particles instead
        occ.iter_mut().for_each(|x| *x = 0.0);
        for p in particles {
            occ[p.root_action] += 1.0 / particles.len() as f64;
        }
    }
    occ
}

/// Run the mutate / correct / select loop for `cfg.depth` steps, calling
/// `observe` after every correction (before selection).
pub(crate) fn run_particles<F>(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &SmcConfig,
    key: StreamKey,
    counters: &mut Counters,
    mut observe: F,
) -> Result<Vec<Particle>>
where
    F: FnMut(&[Particle]),
{
    ctx.mdp.check_state(s0)?;
    cfg.validate()?;
    let n = cfg.num_particles;
    let mut particles = init_particles(ctx, s0, n, key);
    for step in 0..cfg.depth {
        let transitions = mutate(&mut particles, ctx, step, key)?;
        counters.model_expansions += n as u64;
        counters.value_evaluations += n as u64;
        correct_gmz(&mut particles, &transitions, ctx, &cfg.search)?;
        observe(&particles);
        if (step + 1) % cfg.resampling_period == 0 {
            let mut rng = key.label("select").child(step as u64).rng();
            counters.resampling_events += 1;
            if select(&mut particles, cfg.resampling, &mut rng) {
                counters.resampling_fallbacks += 1;
            }
        }
    }
    Ok(particles)
}

/// Root policy and value from a root value table via the root operator.
pub(crate) fn policy_from_values(
    ctx: &PlanContext<'_>,
    s0: usize,
    table: &RootValueTable,
    cfg: &GmzConfig,
    counters: Counters,
) -> Result<PlannerOutput> {
    let support = table.defined_actions();
    let policy = gmz_improve(ctx.prior.row(s0), table.q_bar(), cfg, &support)?.into_inner();
    let v_search = support.iter().map(|&a| policy[a] * table.q_bar()[a]).sum();
    Ok(PlannerOutput::new(
        policy,
        v_search,
        counters,
        table.values(),
    ))
}

/// RL-SMC planner call.
pub fn run_rl_smc(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &SmcConfig,
    key: StreamKey,
) -> Result<PlannerOutput> {
    let na = ctx.num_actions();
    let mut counters = Counters::default();
    let mut table = RootValueTable::new(na);
    let statistic = cfg.root_statistic;
    let particles = run_particles(ctx, s0, cfg, key, &mut counters, |particles| {
        if statistic == RootStatistic::Occupancy {
            return;
        }
        let y = per_root_normalize(particles, na);
        let q = root_q_step(particles, &y, ctx, na);
        match statistic {
            RootStatistic::LastReturn => table.record_last(&q),
            _ => table.backprop_mean(&q),
        }
    })?;
    match statistic {
        RootStatistic::Occupancy => {
            let policy = occupancy(&particles, na);
            let y = per_root_normalize(&particles, na);
            let q = root_q_step(&particles, &y, ctx, na);
            let v_search = q
                .iter()
                .zip(&policy)
                .filter_map(|(q, p)| q.map(|q| q * p))
                .sum();
            Ok(PlannerOutput::new(policy, v_search, counters, q))
        }
        _ => policy_from_values(ctx, s0, &table, &cfg.root, counters),
    }
}
