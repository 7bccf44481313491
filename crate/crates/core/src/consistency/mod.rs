//! Numerical verification of the pricing theory: the martingale property of
//! the posterior-mixture pricing measures, the convergence of subjective
//! prices to the true-parameter prices as observations accumulate, and a
//! reusable saddle-point ratio evaluator for `∫e^{-n·h_n}gπ / ∫e^{-n·h_n}π`.
//!
//! Almost-sure limit statements are not desk-checkable; they are verified
//! here as statistical acceptance tests with explicit three-sigma gates and
//! seeded median trend statistics.

mod experiments;
mod martingale;
mod saddle;

pub use experiments::{
    bs_convergence_experiment, merton_convergence_experiment, merton_convergence_trace,
    BsExperiment, ConvergenceRow, ConvergenceTable, MertonConvergence, MertonExperiment,
};
pub use martingale::{martingale_check_bs, martingale_check_merton};
pub use saddle::{saddle_convergence_check, saddle_ratio, SaddleProblem};
