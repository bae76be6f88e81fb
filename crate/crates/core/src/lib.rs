//! Mixture forward/incubation-time model for duration data.
//!
//! A duration is either an incubation period, density `f(t; λ, α)`, or a
//! forward recurrence time, density `g(t) = (1 - F(t)) / μ`. The observed
//! density is `h = p f + (1 - p) g`. The crate fits `(λ, α, p)` by maximum
//! likelihood. It tests exponential homogeneity with a likelihood-ratio
//! statistic calibrated by its non-regular limit law. It also computes
//! local power, runs chi-square goodness of fit and reproduces size and
//! power studies.
//!
//! ```
//! use fimix::families::{FamilyKind, MixtureModel};
//! use fimix::lrt::{lrt_test, TestOptions};
//! use fimix::simulate::sample_mixture;
//!
//! let truth = MixtureModel::from_params(FamilyKind::Weibull, 1.0, 1.65, 0.65)?;
//! let sample = sample_mixture(&truth, 500, 1)?;
//! let opts = TestOptions { mc_draws: 100_000, ..TestOptions::default() };
//! let report = lrt_test(&sample, FamilyKind::Weibull, &opts)?;
//! assert!(report.p_value < 0.01);
//! # Ok::<(), fimix::Error>(())
//! ```

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod families;
pub mod gof;
pub mod likelihood;
pub mod lrt;
pub mod optim;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};

// Runs the guide's code blocks as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/power.md")]
    mod power {}
    #[doc = include_str!("../../../book/src/gof.md")]
    mod gof {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
