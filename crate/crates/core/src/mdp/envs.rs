//! Built-in environment suite.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::TabularMdp;
use crate::error::{Error, Result};
use crate::stream::StreamKey;

pub const ENVIRONMENTS: [&str; 4] = ["chain", "gridworld", "random-mdp", "bandit"];

/// Parameters for [`make_environment`]. Fields irrelevant to the chosen
/// environment are ignored.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvParams {
    pub discount: f64,
    /// chain
    pub length: usize,
    /// gridworld
    pub width: usize,
    pub height: usize,
    pub slip: f64,
    /// random-mdp
    pub states: usize,
    pub actions: usize,
    pub branching: usize,
    /// bandit
    pub arms: Vec<f64>,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            discount: 0.997,
            length: 5,
            width: 4,
            height: 4,
            slip: 0.0,
            states: 20,
            actions: 4,
            branching: 3,
            arms: vec![0.1, 0.9],
        }
    }
}

/// Build one of the named environments. Deterministic for fixed arguments.
pub fn make_environment(name: &str, params: &EnvParams, seed: u64) -> Result<TabularMdp> {
    match name {
        "chain" => chain(params.length, params.discount),
        "gridworld" => gridworld(params.width, params.height, params.slip, params.discount),
        "random-mdp" => random_mdp(
            params.states,
            params.actions,
            params.branching,
            params.discount,
            seed,
        ),
        "bandit" => bandit(&params.arms, params.discount),
        other => Err(Error::config(format!(
            "unknown environment `{other}` (expected one of {})",
            ENVIRONMENTS.join(", ")
        ))),
    }
}

/// `length` states in a line plus a terminal state at index `length`.
///
/// Action 0 steps back (staying put at state 0), action 1 steps forward.
/// Stepping forward from the last state enters the terminal with reward 1.
pub fn chain(length: usize, discount: f64) -> Result<TabularMdp> {
    if length == 0 {
        return Err(Error::config("chain length must be at least 1"));
    }
    let ns = length + 1;
    let na = 2;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    let mut set = |s: usize, a: usize, next: usize| transition[(s * na + a) * ns + next] = 1.0;
    for s in 0..length {
        set(s, 0, s.saturating_sub(1));
        set(s, 1, s + 1);
    }
    set(length, 0, length);
    set(length, 1, length);
    reward[(length - 1) * na + 1] = 1.0;
    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    let mut terminal = vec![false; ns];
    terminal[length] = true;
    TabularMdp::new(ns, na, transition, reward, discount, initial, terminal)
}

/// `width × height` grid, start in the top-left corner, terminal goal in the
/// bottom-right corner. Actions are up, right, down, left; walls block.
///
/// With probability `slip` the move direction is replaced by a uniformly
/// random one. The reward of `(s, a)` is the probability of entering the goal.
pub fn gridworld(width: usize, height: usize, slip: f64, discount: f64) -> Result<TabularMdp> {
    if width * height < 2 {
        return Err(Error::config("gridworld needs at least two cells"));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(Error::config(format!(
            "gridworld slip {slip} not in [0, 1]"
        )));
    }
    let ns = width * height;
    let na = 4;
    let goal = ns - 1;
    let step = |s: usize, dir: usize| -> usize {
        let (x, y) = (s % width, s / width);
        let (nx, ny) = match dir {
            0 => (x, y.saturating_sub(1)),
            1 => ((x + 1).min(width - 1), y),
            2 => (x, (y + 1).min(height - 1)),
            _ => (x.saturating_sub(1), y),
        };
        ny * width + nx
    };
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            if s == goal {
                transition[base + s] = 1.0;
                continue;
            }
            for dir in 0..na {
                let p = if dir == a {
                    1.0 - slip + slip / 4.0
                } else {
                    slip / 4.0
                };
                if p > 0.0 {
                    transition[base + step(s, dir)] += p;
                }
            }
            reward[s * na + a] = transition[base + goal];
        }
    }
    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    let mut terminal = vec![false; ns];
    terminal[goal] = true;
    TabularMdp::new(ns, na, transition, reward, discount, initial, terminal)
}

/// Random dense-reward MDP without terminal states. Each `(s, a)` row has
/// `branching` distinct successors with flat-Dirichlet probabilities; rewards
/// are uniform in `[0, 1)`. The initial state is 0.
pub fn random_mdp(
    states: usize,
    actions: usize,
    branching: usize,
    discount: f64,
    seed: u64,
) -> Result<TabularMdp> {
    if states == 0 || actions == 0 {
        return Err(Error::config(
            "random-mdp needs at least one state and one action",
        ));
    }
    if branching == 0 || branching > states {
        return Err(Error::config(format!(
            "random-mdp branching {branching} not in 1..={states}"
        )));
    }
    let mut rng = StreamKey::new(seed).label("random-mdp").rng();
    let mut transition = vec![0.0; states * actions * states];
    let mut reward = vec![0.0; states * actions];
    let mut pool: Vec<usize> = (0..states).collect();
    for s in 0..states {
        for a in 0..actions {
            // partial Fisher-Yates for the successor set
            for i in 0..branching {
                let j = rng.random_range(i..states);
                pool.swap(i, j);
            }
            let mut raw: Vec<f64> = (0..branching)
                .map(|_| -crate::math::ln(1.0 - rng.random::<f64>()) + 1e-3)
                .collect();
            let total: f64 = raw.iter().sum();
            raw.iter_mut().for_each(|p| *p /= total);
            let base = (s * actions + a) * states;
            for (k, p) in raw.iter().enumerate() {
                transition[base + pool[k]] = *p;
            }
            reward[s * actions + a] = rng.random::<f64>();
        }
    }
    let mut initial = vec![0.0; states];
    initial[0] = 1.0;
    TabularMdp::new(
        states,
        actions,
        transition,
        reward,
        discount,
        initial,
        vec![false; states],
    )
}

/// One decision state followed by a terminal state; arm `i` pays `arms[i]`.
pub fn bandit(arms: &[f64], discount: f64) -> Result<TabularMdp> {
    if arms.is_empty() {
        return Err(Error::config("bandit needs at least one arm"));
    }
    let na = arms.len();
    let mut transition = vec![0.0; 2 * na * 2];
    for a in 0..na {
        transition[a * 2 + 1] = 1.0;
        transition[(na + a) * 2 + 1] = 1.0;
    }
    let mut reward = vec![0.0; 2 * na];
    reward[..na].copy_from_slice(arms);
    TabularMdp::new(
        2,
        na,
        transition,
        reward,
        discount,
        vec![1.0, 0.0],
        vec![false, true],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_shape() {
        let mdp = make_environment(
            "chain",
            &EnvParams {
                length: 5,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(mdp.num_states(), 6);
        assert_eq!(mdp.num_actions(), 2);
        assert!(mdp.is_terminal(5));
        assert_eq!(mdp.transition(2, 1)[3], 1.0);
        assert_eq!(mdp.transition(2, 0)[1], 1.0);
        assert_eq!(mdp.transition(0, 0)[0], 1.0);
        assert_eq!(mdp.reward(4, 1), 1.0);
    }

    #[test]
    fn random_mdp_is_deterministic_per_seed() {
        let p = EnvParams {
            states: 20,
            actions: 4,
            ..Default::default()
        };
        let a = make_environment("random-mdp", &p, 7).unwrap();
        let b = make_environment("random-mdp", &p, 7).unwrap();
        let c = make_environment("random-mdp", &p, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.transition_tensor(), c.transition_tensor());
    }

    #[test]
    fn unknown_environment_is_config_error() {
        let err = make_environment("snake", &EnvParams::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("snake")));
    }

    #[test]
    fn slippery_gridworld_rows_are_distributions() {
        let mdp = gridworld(3, 3, 0.2, 0.9).unwrap();
        assert!(mdp.reward(7, 1) > 0.0 && mdp.reward(7, 1) < 1.0);
    }
}
