//! Gumbel-MCTS baseline.
//!
//! Sequential Halving over Gumbel-top-`m1` root actions, deterministic
//! regularized selection below the root, one leaf evaluation per simulation,
//! and running-mean backpropagation of discounted returns. Stochastic
//! transitions branch into one child per sampled successor state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{argmax, ln};
use crate::operators::{gmz_improve, gmz_logits, gumbel_topk, top_k, GmzConfig};
use crate::planner::{Counters, PlanContext, PlannerOutput};
use crate::stream::StreamKey;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GumbelMctsConfig {
    /// Simulations per call.
    pub budget: usize,
    pub m1: usize,
    /// Root output and Sequential Halving operator.
    pub root: GmzConfig,
    /// In-tree inverse temperature per node visit.
    pub beta_slope: f64,
}

impl Default for GumbelMctsConfig {
    fn default() -> Self {
        GumbelMctsConfig {
            budget: 24,
            m1: 4,
            root: GmzConfig::new(100.0),
            beta_slope: 10.0,
        }
    }
}

impl GumbelMctsConfig {
    pub fn effective_m1(&self, num_actions: usize) -> Result<usize> {
        if self.m1 < 2 || !self.m1.is_power_of_two() {
            return Err(Error::config(format!(
                "m1 = {} must be a power of two >= 2",
                self.m1
            )));
        }
        if num_actions < 2 {
            return Err(Error::config("gumbel-mcts needs at least two actions"));
        }
        let cap = 1usize << (usize::BITS - 1 - num_actions.leading_zeros());
        Ok(self.m1.min(cap))
    }

    pub fn validate(&self, num_actions: usize) -> Result<usize> {
        self.root.validate()?;
        if !(self.beta_slope.is_finite() && self.beta_slope >= 0.0) {
            return Err(Error::config("beta_slope must be finite and >= 0"));
        }
        let m1 = self.effective_m1(num_actions)?;
        let phases = m1.trailing_zeros() as usize;
        if self.budget < m1 * phases {
            return Err(Error::config(format!(
                "budget = {} must be at least m1 * log2(m1) = {}",
                self.budget,
                m1 * phases
            )));
        }
        Ok(m1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Edge {
    pub visits: u64,
    pub return_sum: f64,
    pub reward_sum: f64,
    /// `(successor state, node index)` in order of first visit.
    pub children: Vec<(usize, usize)>,
}

impl Edge {
    pub fn q(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.return_sum / self.visits as f64)
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.reward_sum / self.visits as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub state: usize,
    pub terminal: bool,
    /// Number of returns averaged into `value_sum`, including the node's own
    /// evaluation when it was created.
    pub visits: u64,
    pub value_sum: f64,
    pub edges: Vec<Edge>,
}

impl TreeNode {
    pub fn value(&self) -> f64 {
        self.value_sum / self.visits as f64
    }
}

/// One simulation: the node path from the root to the evaluated leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub nodes: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub leaf_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    pub nodes: Vec<TreeNode>,
    pub log: Vec<Simulation>,
}

impl SearchTree {
    fn push(&mut self, state: usize, ctx: &PlanContext<'_>) -> usize {
        self.nodes.push(TreeNode {
            state,
            terminal: ctx.mdp.is_terminal(state),
            visits: 0,
            value_sum: 0.0,
            edges: vec![Edge::default(); ctx.num_actions()],
        });
        self.nodes.len() - 1
    }

    fn select_action(&self, node: usize, ctx: &PlanContext<'_>, slope: f64) -> Result<usize> {
        let n = &self.nodes[node];
        let prior = ctx.prior.row(n.state);
        let support: Vec<usize> = (0..prior.len()).filter(|&a| prior[a] > 0.0).collect();
        let q: Vec<f64> = n
            .edges
            .iter()
            .map(|e| e.q().unwrap_or_else(|| n.value()))
            .collect();
        let improved = gmz_improve(
            prior,
            &q,
            &GmzConfig::new(slope * n.visits as f64),
            &support,
        )?;
        let total: u64 = n.edges.iter().map(|e| e.visits).sum();
        let scores: Vec<f64> = improved
            .probs()
            .iter()
            .zip(&n.edges)
            .map(|(p, e)| {
                if *p > 0.0 {
                    p - e.visits as f64 / (1 + total) as f64
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Ok(argmax(&scores).expect("at least one action"))
    }

    fn simulate(
        &mut self,
        root_action: usize,
        ctx: &PlanContext<'_>,
        slope: f64,
        key: StreamKey,
    ) -> Result<()> {
        let mut rng = key.rng();
        let mut sim = Simulation {
            nodes: vec![0],
            actions: Vec::new(),
            rewards: Vec::new(),
            leaf_value: 0.0,
        };
        let mut node = 0;
        let mut action = root_action;
        loop {
            let (next, reward) =
                ctx.mdp
                    .sample_transition(self.nodes[node].state, action, &mut rng)?;
            sim.actions.push(action);
            sim.rewards.push(reward);
            let existing = self.nodes[node].edges[action]
                .children
                .iter()
                .find(|(s, _)| *s == next)
                .map(|c| c.1);
            match existing {
                Some(child) if !self.nodes[child].terminal => {
                    sim.nodes.push(child);
                    node = child;
                    action = self.select_action(node, ctx, slope)?;
                }
                Some(child) => {
                    sim.nodes.push(child);
                    break;
                }
                None => {
                    let child = self.push(next, ctx);
                    self.nodes[node].edges[action].children.push((next, child));
                    sim.nodes.push(child);
                    sim.leaf_value = ctx.bootstrap(next);
                    break;
                }
            }
        }
        self.backprop(&sim, ctx.mdp.discount());
        self.log.push(sim);
        Ok(())
    }

    fn backprop(&mut self, sim: &Simulation, discount: f64) {
        let leaf = *sim.nodes.last().expect("path includes the leaf");
        let mut g = sim.leaf_value;
        self.nodes[leaf].visits += 1;
        self.nodes[leaf].value_sum += g;
        for i in (0..sim.actions.len()).rev() {
            g = sim.rewards[i] + discount * g;
            let node = &mut self.nodes[sim.nodes[i]];
            let edge = &mut node.edges[sim.actions[i]];
            edge.visits += 1;
            edge.return_sum += g;
            edge.reward_sum += sim.rewards[i];
            node.visits += 1;
            node.value_sum += g;
        }
    }
}

/// Gumbel-MCTS planner call.
pub fn run_gumbel_mcts(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &GumbelMctsConfig,
    key: StreamKey,
) -> Result<PlannerOutput> {
    search(ctx, s0, cfg, key).map(|(out, _)| out)
}

/// Planner call that also returns the final tree and its simulation log.
pub fn search(
    ctx: &PlanContext<'_>,
    s0: usize,
    cfg: &GumbelMctsConfig,
    key: StreamKey,
) -> Result<(PlannerOutput, SearchTree)> {
    ctx.mdp.check_state(s0)?;
    let m1 = cfg.validate(ctx.num_actions())?;
    let prior = ctx.prior.row(s0);
    let logits: Vec<f64> = prior
        .iter()
        .map(|&p| if p > 0.0 { ln(p) } else { f64::NEG_INFINITY })
        .collect();
    let top = gumbel_topk(&logits, m1, &mut key.label("gumbel").rng())?;

    let mut tree = SearchTree {
        nodes: Vec::new(),
        log: Vec::new(),
    };
    let root = tree.push(s0, ctx);
    tree.nodes[root].visits = 1;
    tree.nodes[root].value_sum = ctx.bootstrap(s0);

    let phases = m1.trailing_zeros() as usize;
    let mut survivors = top.ranked;
    let mut sims = 0u64;
    for phase in 0..phases {
        let phase_budget = cfg.budget / phases + usize::from(phase < cfg.budget % phases);
        let k = survivors.len();
        for (rank, &a) in survivors.iter().enumerate() {
            let count = phase_budget / k + usize::from(rank < phase_budget % k);
            for _ in 0..count {
                tree.simulate(a, ctx, cfg.beta_slope, key.label("sim").child(sims))?;
                sims += 1;
            }
        }
        if phase + 1 < phases {
            let q: Vec<f64> = tree.nodes[root]
                .edges
                .iter()
                .map(|e| e.q().unwrap_or(0.0))
                .collect();
            let scores = gmz_logits(prior, &q, &cfg.root, &survivors, Some(&top.noise));
            survivors = top_k(&scores, k / 2);
        }
    }

    let root_node = &tree.nodes[root];
    let completed: Vec<f64> = root_node
        .edges
        .iter()
        .map(|e| e.q().unwrap_or_else(|| root_node.value()))
        .collect();
    let support: Vec<usize> = (0..prior.len()).filter(|&a| prior[a] > 0.0).collect();
    let policy = gmz_improve(prior, &completed, &cfg.root, &support)?.into_inner();
    let v_search = policy.iter().zip(&completed).map(|(p, q)| p * q).sum();
    let counters = Counters {
        model_expansions: sims,
        value_evaluations: sims + 1,
        ..Counters::default()
    };
    let root_values = root_node.edges.iter().map(Edge::q).collect();
    Ok((
        PlannerOutput::new(policy, v_search, counters, root_values),
        tree,
    ))
}
