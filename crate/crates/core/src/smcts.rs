//! SMCTS: particle SMC with per-root-action value averaging.
//!
//! At every step the particles descending from each root action are
//! normalized within their group, their bootstrapped returns are averaged
//! into a step estimate `Q_t(s0, a)`, and the step estimates are folded into a
//! running mean. The root policy comes from the improvement operator applied
//! to the running means, over the root actions that ever had particles.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::planner::{Counters, PlanContext, PlannerOutput};
use crate::smc::{policy_from_values, run_particles, Particle, SmcConfig};
use crate::stream::StreamKey;

/// Per-root-action value estimates accumulated over the steps of one search.
#[derive(Debug, Clone, PartialEq)]
pub struct RootValueTable {
    q_bar: Vec<f64>,
    update_count: Vec<u64>,
}

impl RootValueTable {
    pub fn new(num_actions: usize) -> Self {
        RootValueTable {
            q_bar: vec![0.0; num_actions],
            update_count: vec![0; num_actions],
        }
    }

    /// Current estimates; entries of undefined actions are 0.
    pub fn q_bar(&self) -> &[f64] {
        &self.q_bar
    }

    pub fn update_count(&self) -> &[u64] {
        &self.update_count
    }

    pub fn defined(&self, a: usize) -> bool {
        self.update_count[a] > 0
    }

    pub fn defined_actions(&self) -> Vec<usize> {
        (0..self.q_bar.len()).filter(|&a| self.defined(a)).collect()
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        (0..self.q_bar.len())
            .map(|a| self.defined(a).then(|| self.q_bar[a]))
            .collect()
    }

    /// Incremental mean update on the defined entries of `q`.
    pub fn backprop_mean(&mut self, q: &[Option<f64>]) {
        for (a, q) in q.iter().enumerate() {
            if let Some(q) = *q {
                self.update_count[a] += 1;
                self.q_bar[a] += (q - self.q_bar[a]) / self.update_count[a] as f64;
            }
        }
    }

    /// Overwrite with the defined entries of `q`.
    pub fn record_last(&mut self, q: &[Option<f64>]) {
        for (a, q) in q.iter().enumerate() {
            if let Some(q) = *q {
                self.update_count[a] += 1;
                self.q_bar[a] = q;
            }
        }
    }
}

/// Weights normalized within each root-action group. Particles in a group
/// whose total weight is zero get `y = 0`.
pub fn per_root_normalize(particles: &[Particle], num_actions: usize) -> Vec<f64> {
    let mut totals = vec![0.0; num_actions];
    for p in particles {
        totals[p.root_action] += p.weight;
    }
    particles
        .iter()
        .map(|p| {
            let t = totals[p.root_action];
            if t > 0.0 {
                p.weight / t
            } else {
                0.0
            }
        })
        .collect()
}

/// `Q_t(a) = Σ_n y_n 1{a_0^n = a} (R_n + γ^{t+1} v(s_n))`, defined on the
/// root actions whose group has positive weight.
pub fn root_q_step(
    particles: &[Particle],
    y: &[f64],
    ctx: &PlanContext<'_>,
    num_actions: usize,
) -> Vec<Option<f64>> {
    let mut q: Vec<Option<f64>> = vec![None; num_actions];
    let mut mass = vec![0.0; num_actions];
    for (p, &y) in particles.iter().zip(y) {
        let a = p.root_action;
        mass[a] += y;
        if y > 0.0 {
            *q[a].get_or_insert(0.0) += y * p.bootstrapped_return(ctx);
        }
    }
    for (q, m) in q.iter_mut().zip(mass) {
        if !(m > 0.0) {
            *q = None;
        }
    }
    q
}

/// SMCTS planner call.
pub fn run_smcts(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &SmcConfig,
    key: StreamKey,
) -> Result<PlannerOutput> {
    let (table, counters) = smcts_table(ctx, s0, cfg, key)?;
    policy_from_values(ctx, s0, &table, &cfg.root, counters)
}

pub(crate) fn smcts_table(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &SmcConfig,
    key: StreamKey,
) -> Result<(RootValueTable, Counters)> {
    let na = ctx.num_actions();
    let mut counters = Counters::default();
    let mut table = RootValueTable::new(na);
    run_particles(ctx, s0, cfg, key, &mut counters, |particles| {
        let y = per_root_normalize(particles, na);
        table.backprop_mean(&root_q_step(particles, &y, ctx, na));
    })?;
    Ok((table, counters))
}
