//! Gibbs, Griddy Gibbs and Metropolized Griddy Gibbs samplers, with a
//! finite-state laboratory for the invariant measures of their kernels.
//!
//! The pieces fit together as follows:
//!
//! * [`target`] defines unnormalized densities on boxes.
//! * [`conditional`] builds clamped, normalized 1D conditionals from grid
//!   evaluations and inverts their CDFs.
//! * [`sampler`] runs the three chains.
//! * [`kernel`] discretizes their transition kernels and checks the
//!   invariant measure, Doeblin, regularity and perturbation bounds.
//! * [`diagnostics`] scores chains with ECDF distances and autocorrelation.
//! * [`cli`] drives experiments from TOML configs.

pub mod cli;
pub mod conditional;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod norm;
pub mod rng;
pub mod sampler;
pub mod target;

pub use conditional::{
    build_conditional, ApproxConditional, ClampBounds, ClampSpec, Conditional1d, Grid1D, InterpScheme,
};
pub use error::Error;
pub use norm::Norm;
pub use sampler::{
    estimate_expectation, gibbs_chain, griddy_chain, metropolized_griddy_chain, ChainConfig, ChainOutput,
};
pub use target::{beta_mixture_2d, BoxDomain, TargetDensity};
