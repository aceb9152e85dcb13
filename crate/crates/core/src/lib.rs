//! Rare-event chance-constrained linear programs.
//!
//! The crate solves `max c^T x` over a box subject to `P(phi(x, L) > 1) <= delta`
//! with `phi(x, L) = max_i x^T A_i L`, for small `delta`, in four ways:
//!
//! * [`methods::ccp_oracle`]: brute-force Monte Carlo reference,
//! * [`methods::cvar_solve`]: the sample CVaR relaxation,
//! * [`methods::scenario_solve`]: the scenario program,
//! * [`limits`]: the limit programs describing the `delta -> 0` behaviour
//!   under light-tailed ([`limits::solve_lt_limit`]) and heavy-tailed
//!   ([`limits::solve_ht_limit`]) risk.
//!
//! The [`harness`] module runs the asymptotic experiments and backs the `rarecc` CLI.

pub mod error;
pub mod harness;
pub mod limits;
pub mod lpsolve;
pub mod methods;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod search;

pub use error::{Error, Result};
pub use limits::{LimitSolution, Rate, RateFunction};
pub use lpsolve::{solve_lp, LinearProgram, LpStatus, SolveResult};
pub use methods::MethodResult;
pub use model::{Matrix, ProblemInstance};
pub use sampler::{Atom, HeavyTailModel, LightTailModel, SampleBatch, TailModel};
