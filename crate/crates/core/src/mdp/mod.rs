//! Tabular MDPs, policy/value tables, generative sampling and exact solvers.

mod envs;
mod solve;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

pub use envs::{bandit, chain, gridworld, make_environment, random_mdp, EnvParams, ENVIRONMENTS};
pub use solve::{evaluate_iterative, exact_policy_evaluation, value_iteration, DIRECT_SOLVE_LIMIT};

const ROW_SUM_TOL: f64 = 1e-12;
const POLICY_SUM_TOL: f64 = 1e-9;

/// Enumerable MDP with exact transition and reward tensors.
///
/// The transition tensor is stored flat in `(s, a, s')` order and rewards in
/// `(s, a)` order. Terminal states are absorbing: they self-loop with
/// probability one and earn zero reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    initial: Vec<f64>,
    terminal: Vec<bool>,
    // cumulative sparse rows, one per (s, a)
    outcomes: Vec<Vec<(usize, f64)>>,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid(
                "an MDP needs at least one state and one action",
            ));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::invalid(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if reward.len() != num_states * num_actions {
            return Err(Error::invalid("reward tensor has the wrong shape"));
        }
        if initial.len() != num_states || terminal.len() != num_states {
            return Err(Error::invalid(
                "initial distribution / terminal mask has the wrong length",
            ));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!("discount {discount} not in (0, 1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards must be finite"));
        }
        check_simplex(&initial, ROW_SUM_TOL, "initial distribution")?;
        for s in 0..num_states {
            for a in 0..num_actions {
                let base = (s * num_actions + a) * num_states;
                let row = &transition[base..base + num_states];
                check_simplex(row, ROW_SUM_TOL, "transition row")?;
                if terminal[s] && (row[s] != 1.0 || reward[s * num_actions + a] != 0.0) {
                    return Err(Error::invalid(format!(
                        "terminal state {s} must self-loop with reward 0"
                    )));
                }
            }
        }
        let outcomes = (0..num_states * num_actions)
            .map(|sa| {
                let row = &transition[sa * num_states..(sa + 1) * num_states];
                let mut cum = 0.0;
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(next, p)| {
                        cum += p;
                        (next, cum)
                    })
                    .collect()
            })
            .collect();
        Ok(TabularMdp {
            num_states,
            num_actions,
            transition,
            reward,
            discount,
            initial,
            terminal,
            outcomes,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Row `P(· | s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    pub fn transition_tensor(&self) -> &[f64] {
        &self.transition
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    pub fn reward_tensor(&self) -> &[f64] {
        &self.reward
    }

    /// Largest absolute reward.
    pub fn reward_bound(&self) -> f64 {
        self.reward.iter().fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.num_states {
            Ok(())
        } else {
            Err(Error::Index {
                what: "state",
                index: s,
                limit: self.num_states,
            })
        }
    }

    pub fn check_action(&self, a: usize) -> Result<()> {
        if a < self.num_actions {
            Ok(())
        } else {
            Err(Error::Index {
                what: "action",
                index: a,
                limit: self.num_actions,
            })
        }
    }

    /// Draw `(s', r)` from the generative model. Terminal states return
    /// `(s, 0)`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<(usize, f64)> {
        self.check_state(s)?;
        self.check_action(a)?;
        if self.terminal[s] {
            return Ok((s, 0.0));
        }
        let row = &self.outcomes[s * self.num_actions + a];
        Ok((sample_cumulative(row, rng), self.reward(s, a)))
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut last = 0;
        for (s, p) in self.initial.iter().enumerate() {
            if *p > 0.0 {
                cum += p;
                last = s;
                if u < cum {
                    return s;
                }
            }
        }
        last
    }

    /// `R(s, a) + γ Σ_{s'} P(s'|s, a) v(s')` for every `(s, a)`, with terminal
    /// successors contributing zero.
    pub fn lookahead(&self, v: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.num_states * self.num_actions];
        for s in 0..self.num_states {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.num_actions {
                let expected: f64 = self
                    .transition(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(next, p)| **p > 0.0 && !self.terminal[*next])
                    .map(|(next, p)| p * v[next])
                    .sum();
                q[s * self.num_actions + a] = self.reward(s, a) + self.discount * expected;
            }
        }
        q
    }
}

fn sample_cumulative<R: Rng + ?Sized>(row: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    for &(next, cum) in row {
        if u < cum {
            return next;
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    row.last().map(|(next, _)| *next).unwrap_or(0)
}

pub(crate) fn check_simplex(p: &[f64], tol: f64, what: &str) -> Result<()> {
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::invalid(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyDistribution {
    probs: Vec<f64>,
}

impl PolicyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, POLICY_SUM_TOL, "policy")?;
        Ok(PolicyDistribution { probs })
    }

    pub fn uniform(num_actions: usize) -> Self {
        PolicyDistribution {
            probs: vec![1.0 / num_actions as f64; num_actions],
        }
    }

    pub fn delta(num_actions: usize, action: usize) -> Self {
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        PolicyDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// One action distribution per state, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    num_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions || num_actions == 0 {
            return Err(Error::invalid("policy table has the wrong shape"));
        }
        for row in probs.chunks(num_actions) {
            check_simplex(row, POLICY_SUM_TOL, "policy row")?;
        }
        Ok(PolicyTable { num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        PolicyTable {
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Rows drawn independently from a flat Dirichlet distribution.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(num_states * num_actions);
        for _ in 0..num_states {
            let row: Vec<f64> = (0..num_actions)
                .map(|_| -crate::math::ln(rng.sample(rand::distr::Open01)))
                .collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|x| x / total));
        }
        PolicyTable { num_actions, probs }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        PolicyTable { num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn set_row(&mut self, s: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.num_actions {
            return Err(Error::invalid("policy row has the wrong length"));
        }
        check_simplex(row, POLICY_SUM_TOL, "policy row")?;
        self.probs[s * self.num_actions..(s + 1) * self.num_actions].copy_from_slice(row);
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_categorical(self.row(s), rng)
    }
}

/// Draw an index from unnormalised nonnegative weights, scanning in index
/// order.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            cum += w;
            last = i;
            if u < cum {
                return i;
            }
        }
    }
    last
}

/// State values with the matching action values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    num_actions: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    pub fn new(num_actions: usize, v: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if q.len() != v.len() * num_actions {
            return Err(Error::invalid("value table shapes disagree"));
        }
        if v.iter().chain(q.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("value table has non-finite entries"));
        }
        Ok(ValueTable { num_actions, v, q })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn value(&self, s: usize) -> f64 {
        self.v[s]
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.num_actions + a]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn q_table(&self) -> &[f64] {
        &self.q
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}
