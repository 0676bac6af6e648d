//! Decision-focused learning on a virtual-machine packing problem.
//!
//! The crate packs `N` virtual machines onto hosts of capacity `C` over a
//! receding horizon. Demand forecasts parameterize a mixed-integer linear
//! program whose first-step decision is executed in a simulator with
//! disturbances (migration delays, workload churn) the program does not
//! model. Forecasters can be trained three ways:
//!
//! * two-stage: fit a quantile forecaster, then optimize treating the
//!   forecast as truth;
//! * predict-and-optimize: backpropagate the realized decision cost
//!   (regret) through the optimization problem, either by a mirrored-oracle
//!   subgradient or by differentiating the KKT system of a quadratic
//!   relaxation — with variants that push gradients through
//!   forecast-dependent constraints;
//! * predict-and-critic: a two-step-horizon optimization combined with a
//!   learned terminal Q-function supplying cost-to-go gradients.
//!
//! Everything needed is in-crate: a bounded-variable simplex, a
//! branch-and-bound MILP solver, an active-set QP solver, the KKT
//! differentiation solves, a small reverse-mode autodiff engine, and the
//! recurrent forecaster and critic built on it.
//!
//! The mdbook under `book/` walks through the concepts chapter by chapter;
//! its code snippets are compiled as doc-tests by the `cloudpack-book`
//! crate.

pub mod error;
pub mod experiment;
pub mod heur;
pub mod milp;
pub mod nn;
pub mod pnc;
pub mod pno;
pub mod sim;
pub mod solve;
pub mod trace;

pub use error::Error;
