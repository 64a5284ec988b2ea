use alloc::vec;
use alloc::vec::Vec;

use super::{PolicyTable, TabularMdp, ValueTable};
use crate::error::{Error, Result};
use crate::math::argmax;

/// Largest state count solved by direct elimination; larger MDPs are
/// evaluated by Bellman sweeps.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

const ITERATIVE_TOL: f64 = 1e-12;

fn check_policy(mdp: &TabularMdp, policy: &PolicyTable) -> Result<()> {
    if policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions() {
        return Err(Error::invalid("policy table does not match the MDP"));
    }
    Ok(())
}

// r_π and P_π as dense arrays; rows of terminal states stay zero
fn policy_system(mdp: &TabularMdp, policy: &PolicyTable) -> (Vec<f64>, Vec<f64>) {
    let ns = mdp.num_states();
    let mut r = vec![0.0; ns];
    let mut p = vec![0.0; ns * ns];
    for s in 0..ns {
        if mdp.is_terminal(s) {
            continue;
        }
        for (a, &pa) in policy.row(s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            r[s] += pa * mdp.reward(s, a);
            for (next, &pn) in mdp.transition(s, a).iter().enumerate() {
                p[s * ns + next] += pa * pn;
            }
        }
    }
    (r, p)
}

/// Solve `V = r_π + γ P_π V` and also return `Q^π`.
pub fn exact_policy_evaluation(mdp: &TabularMdp, policy: &PolicyTable) -> Result<ValueTable> {
    check_policy(mdp, policy)?;
    let ns = mdp.num_states();
    let v = if ns <= DIRECT_SOLVE_LIMIT {
        let (r, p) = policy_system(mdp, policy);
        let gamma = mdp.discount();
        let mut a = vec![0.0; ns * ns];
        for i in 0..ns {
            for j in 0..ns {
                a[i * ns + j] = -gamma * p[i * ns + j];
            }
            a[i * ns + i] += 1.0;
        }
        let mut v = solve_dense(&a, &r, ns)?;
        // one round of iterative refinement
        let residual: Vec<f64> = (0..ns)
            .map(|i| r[i] - (0..ns).map(|j| a[i * ns + j] * v[j]).sum::<f64>())
            .collect();
        let correction = solve_dense(&a, &residual, ns)?;
        v.iter_mut().zip(&correction).for_each(|(x, c)| *x += c);
        v
    } else {
        evaluate_iterative(mdp, policy, ITERATIVE_TOL, usize::MAX)?
    };
    let q = mdp.lookahead(&v);
    ValueTable::new(mdp.num_actions(), v, q)
}

/// Policy evaluation by Jacobi sweeps until successive iterates differ by at
/// most `tol` in sup norm, or `max_sweeps` is reached.
pub fn evaluate_iterative(
    mdp: &TabularMdp,
    policy: &PolicyTable,
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    check_policy(mdp, policy)?;
    let ns = mdp.num_states();
    let gamma = mdp.discount();
    let (r, p) = policy_system(mdp, policy);
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    for _ in 0..max_sweeps {
        let mut delta: f64 = 0.0;
        for i in 0..ns {
            let row = &p[i * ns..(i + 1) * ns];
            let x = r[i] + gamma * row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            delta = delta.max((x - v[i]).abs());
            next[i] = x;
        }
        core::mem::swap(&mut v, &mut next);
        if delta <= tol {
            break;
        }
    }
    Ok(v)
}

/// Value iteration to a Bellman residual of at most `tol`, returning `V*`,
/// `Q*` and the greedy policy (lowest action index on ties).
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<(ValueTable, Vec<usize>)> {
    if !(tol > 0.0) {
        return Err(Error::invalid("value iteration tolerance must be positive"));
    }
    let ns = mdp.num_states();
    let na = mdp.num_actions();
    // stop once the residual also bounds the distance to V* by tol
    let target = tol * (1.0 - mdp.discount());
    let mut v = vec![0.0; ns];
    loop {
        let q = mdp.lookahead(&v);
        let mut residual: f64 = 0.0;
        let updated: Vec<f64> = (0..ns)
            .map(|s| {
                let best = if mdp.is_terminal(s) {
                    0.0
                } else {
                    q[s * na..(s + 1) * na]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                residual = residual.max((best - v[s]).abs());
                best
            })
            .collect();
        v = updated;
        if residual <= target {
            break;
        }
    }
    let q = mdp.lookahead(&v);
    let greedy = (0..ns)
        .map(|s| argmax(&q[s * na..(s + 1) * na]).unwrap_or(0))
        .collect();
    Ok((ValueTable::new(na, v, q)?, greedy))
}

// Gaussian elimination with partial pivoting on a dense row-major matrix.
fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col].abs() < 1e-300 {
            return Err(Error::invariant("singular policy-evaluation system"));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let tail: f64 = (col + 1..n).map(|k| m[col * n + k] * x[k]).sum();
        x[col] = (x[col] - tail) / m[col * n + col];
    }
    Ok(x)
}
