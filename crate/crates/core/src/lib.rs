//! Bayesian inference for nonlinear state space models whose scalar state
//! follows a stationary Gaussian AR(1) process.
//!
//! The sampler alternates between the sufficient parameterization (latent
//! path `s_{0:T}`) and the ancillary one (standardized innovations), updates
//! the path in contiguous blocks with elliptical slice sampling, and plugs in
//! arbitrary per-observation log-likelihoods through [`ObservationModel`].
//!
//! Two observation families ship with the crate: dynamic bivariate copulas
//! (Gaussian, extended Clayton/Gumbel, Student-t and a Student-t/Gumbel
//! mixture with asymmetric tail dependence) and stochastic volatility with
//! standardized skew Student-t errors.

pub mod ar1;
pub mod copulas;
pub mod diagnostics;
pub mod dists;
pub mod draws;
pub mod engine;
mod error;
pub mod obsmodels;
pub mod pipeline;
pub mod quad;
pub mod rng;
pub mod simstudy;
pub mod slice;

pub use ar1::{Ar1Params, Block, GaussianMoments};
pub use copulas::{CopulaFamily, CopulaParams, MixtureParams};
pub use draws::DrawsStore;
pub use engine::{run_chain, BlockSize, ChainConfig, ChainState, ObservationModel, PriorHyper, SamplerSpec};
pub use error::{Error, Result};
pub use obsmodels::{ConstCopulaModel, DynCopulaModel, SkewTSvModel};
