//! Bayesian arbitrage-free option pricing in Black-Scholes and Merton
//! markets whose parameters are unknown.
//!
//! A market participant observes the asset over a window `[-τ, 0]` — a
//! discrete series of quotes for the Black-Scholes market, the exact jump
//! record for the Merton market — and prices European options under the
//! mixture of parametric pricing measures weighted by the Bayesian
//! posterior over the unknown parameters. The crate provides:
//!
//! - [`sim`]: seeded path simulation for both markets, including the
//!   ground-truth jump record the Merton posterior conditions on;
//! - [`pricing`]: closed-form Black-Scholes prices, the mean-correction
//!   drift, the mean-corrected Merton series price, and an independent
//!   Monte-Carlo pricing oracle;
//! - [`bayes`]: posterior construction, posterior sampling and the
//!   posterior-mixture ("subjective") option prices;
//! - [`quad`]: adaptive Gauss-Kronrod quadrature and the stabilized
//!   expectation evaluator shared by the modules above;
//! - [`consistency`]: numerical verification of the martingale property of
//!   the mixture pricing measures, the convergence of subjective prices to
//!   the true-parameter prices, and a saddle-point ratio evaluator.
//!
//! See the `book/` guide at the repository root for a narrative tour; its
//! code snippets compile and run as doc-tests of this crate.

pub mod bayes;
pub mod consistency;
pub mod error;
pub mod pricing;
pub mod quad;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use pricing::{OptionKind, OptionSpec, PriceMethod, PriceResult};
pub use sim::{BsParams, JumpRecord, MertonTheta, ObservationSeries};

#[cfg(doctest)]
mod book_doctests {
    //! Every fenced Rust block in the mdbook guide runs as a doc-test here,
    //! keeping the book in sync with the crate.

    #[doc = include_str!("../../../book/src/quickstart.md")]
    pub struct Quickstart;

    #[doc = include_str!("../../../book/src/markets.md")]
    pub struct Markets;

    #[doc = include_str!("../../../book/src/pricing.md")]
    pub struct Pricing;

    #[doc = include_str!("../../../book/src/posteriors.md")]
    pub struct Posteriors;

    #[doc = include_str!("../../../book/src/subjective-prices.md")]
    pub struct SubjectivePrices;

    #[doc = include_str!("../../../book/src/quadrature.md")]
    pub struct Quadrature;

    #[doc = include_str!("../../../book/src/consistency.md")]
    pub struct Consistency;
}
