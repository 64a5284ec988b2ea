//! Policy improvement operators and Gumbel-top-k sampling.
//!
//! The regularized operator maps a prior `π` and action values `q` to
//! `softmax(β·q(a) + ln π(a))` over a support set, which is greedier than `π`
//! with respect to `q` for every `β > 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{exp, ln, log_sum_exp};
use crate::mdp::PolicyDistribution;

/// Inverse temperature and value preprocessing for [`gmz_improve`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GmzConfig {
    pub beta: f64,
    /// Min-max normalize `q` over the support before scaling by `beta`.
    pub normalize_q: bool,
}

impl GmzConfig {
    pub fn new(beta: f64) -> Self {
        GmzConfig {
            beta,
            normalize_q: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_finite() && self.beta >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!(
                "inverse temperature {} must be finite and >= 0",
                self.beta
            )))
        }
    }
}

fn scaled_values(q: &[f64], support: &[usize], cfg: &GmzConfig) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    if cfg.normalize_q {
        let (lo, hi) = support
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
                (lo.min(q[a]), hi.max(q[a]))
            });
        let span = hi - lo;
        for &a in support {
            out[a] = if span > 0.0 {
                cfg.beta * (q[a] - lo) / span
            } else {
                0.0
            };
        }
    } else {
        for &a in support {
            out[a] = cfg.beta * q[a];
        }
    }
    out
}

/// Logits `β·q(a) + ln π(a) + extra(a)` on `support`, `-inf` elsewhere.
pub(crate) fn gmz_logits(
    prior: &[f64],
    q: &[f64],
    cfg: &GmzConfig,
    support: &[usize],
    extra: Option<&[f64]>,
) -> Vec<f64> {
    let scaled = scaled_values(q, support, cfg);
    let mut logits = vec![f64::NEG_INFINITY; prior.len()];
    for &a in support {
        logits[a] = scaled[a] + ln(prior[a]) + extra.map_or(0.0, |e| e[a]);
    }
    logits
}

fn check_inputs(prior: &[f64], q: &[f64], support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::invalid(
            "improvement operator called with an empty support",
        ));
    }
    if q.len() != prior.len() {
        return Err(Error::invalid("prior and q have different lengths"));
    }
    for &a in support {
        if a >= prior.len() {
            return Err(Error::Index {
                what: "action",
                index: a,
                limit: prior.len(),
            });
        }
        if !(prior[a] > 0.0) || !q[a].is_finite() {
            return Err(Error::invalid(format!(
                "prior must be positive and q finite on the support (action {a})"
            )));
        }
    }
    Ok(())
}

/// Regularized policy improvement restricted to `support`; zero off-support.
pub fn gmz_improve(
    prior: &[f64],
    q: &[f64],
    cfg: &GmzConfig,
    support: &[usize],
) -> Result<PolicyDistribution> {
    check_inputs(prior, q, support)?;
    let logits = gmz_logits(prior, q, cfg, support, None);
    Ok(normalized(&logits))
}

// Softmax over the finite logits. Entries on the support never underflow to
// zero, so the support of the output equals the support of the logits.
pub(crate) fn normalized(logits: &[f64]) -> PolicyDistribution {
    let lse = log_sum_exp(logits);
    let mut p: Vec<f64> = logits
        .iter()
        .map(|&l| {
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                exp(l - lse).max(f64::MIN_POSITIVE)
            }
        })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    PolicyDistribution::new(p).expect("softmax output is a distribution")
}

/// `ln π'(a) − ln π(a)` for the full-support operator, without allocating the
/// whole output distribution.
pub fn gmz_log_ratio(prior: &[f64], q: &[f64], cfg: &GmzConfig, action: usize) -> f64 {
    let (lo, span) = if cfg.normalize_q {
        let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi - lo)
    } else {
        (0.0, 1.0)
    };
    let scale = |x: f64| {
        if cfg.normalize_q {
            if span > 0.0 {
                cfg.beta * (x - lo) / span
            } else {
                0.0
            }
        } else {
            cfg.beta * x
        }
    };
    let max = prior
        .iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, x)| scale(*x) + ln(*p))
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = prior
        .iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, x)| exp(scale(*x) + ln(*p) - max))
        .sum();
    scale(q[action]) - (max + ln(sum))
}

/// `Σ π_new(a) q(a) − Σ π_old(a) q(a)`.
pub fn greedification_gap(new: &[f64], old: &[f64], q: &[f64]) -> f64 {
    let dot = |p: &[f64]| {
        p.iter()
            .zip(q)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, v)| p * v)
            .sum::<f64>()
    };
    dot(new) - dot(old)
}

/// Result of [`gumbel_topk`].
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelTopK {
    /// Selected actions, best perturbed logit first.
    pub ranked: Vec<usize>,
    /// Gumbel noise for every action, reused by the caller.
    pub noise: Vec<f64>,
}

impl GumbelTopK {
    /// Selected actions in index order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.ranked.clone();
        s.sort_unstable();
        s
    }
}

/// Standard Gumbel draw `−ln(−ln u)` with `u` uniform on the open interval.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -ln(-ln(u))
}

/// Sample `k` actions without replacement from `softmax(logits)` by taking
/// the top `k` of `logits + g`.
pub fn gumbel_topk<R: Rng + ?Sized>(logits: &[f64], k: usize, rng: &mut R) -> Result<GumbelTopK> {
    if k == 0 || k > logits.len() {
        return Err(Error::invalid(format!(
            "k = {k} not in 1..={}",
            logits.len()
        )));
    }
    if logits.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::invalid("logits must be finite or -inf"));
    }
    let noise: Vec<f64> = (0..logits.len()).map(|_| sample_gumbel(rng)).collect();
    let scores: Vec<f64> = logits.iter().zip(&noise).map(|(l, g)| l + g).collect();
    let ranked = top_k(&scores, k);
    Ok(GumbelTopK { ranked, noise })
}

/// Indices of the `k` largest scores, descending, lowest index first on ties.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
