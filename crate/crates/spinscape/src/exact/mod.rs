//! Dense exact analysis of the continuous-time chain
//!
//! ```text
//! L^f(η,σ) = (1/N) exp(-(H^f(σ) - H^f(η))_+)   for neighbours η ~ σ,
//! ```
//!
//! with stationary law `π^f ∝ exp(-H^f)`.
//!
//! Spectral quantities come from the symmetrised matrix `D^{1/2}(-L)D^{-1/2}`.
//! Linear solves (capacities, hitting times, and the refinement of small
//! spectral gaps) use [`reduction::Reduction`], which keeps relative
//! precision when rates span hundreds of orders of magnitude.

mod chain;
pub mod reduction;

pub use chain::{tv_distance, Capacity, ExactChain, HittingTime, MixingTime, DENSE_LIMIT};
