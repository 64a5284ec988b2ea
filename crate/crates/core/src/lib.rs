//! Sequential Monte Carlo planning over tabular MDPs.
//!
//! The crate provides a ladder of particle-based planners, from plain
//! importance-weighted SMC with root occupancy counts ([`smc`]), through
//! per-root-action value averaging ([`smcts`]), to Sequential Halving over
//! independent value-averaging subsearches ([`tsmcts`]). A Gumbel-MCTS
//! baseline ([`gumbel_mcts`]) runs at matched budget. Exact solvers in
//! [`mdp`] act as oracles; [`training`] drives an approximate policy
//! iteration loop on tabular parameterizations and [`diagnostics`] holds the
//! variance, degeneracy and depth-scaling measurements.
//!
//! The crate is `no_std` (with `alloc`). All randomness is drawn from keyed
//! substreams ([`stream::StreamKey`]) so results are bitwise reproducible for
//! a fixed seed, independent of the `parallel` feature.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![warn(rust_2018_idioms, unused_qualifications)]

extern crate alloc;

pub mod diagnostics;
mod error;
pub mod gumbel_mcts;
pub mod math;
pub mod mdp;
pub mod operators;
pub mod planner;
pub mod smc;
pub mod smcts;
pub mod stream;
pub mod training;
pub mod tsmcts;

pub use error::{Error, Result};
pub use mdp::{PolicyDistribution, PolicyTable, TabularMdp, ValueTable};
pub use planner::{Counters, PlanContext, Planner, PlannerOutput, SearchValues};
pub use stream::StreamKey;
