//! Landscape-modified Metropolis dynamics on `{-1,+1}^N`.
//!
//! The crate covers energy models (table, Ising on a graph, random energy
//! model), the modified Hamiltonian `H^f`, classical and modified critical
//! heights, dense exact analysis of the continuous-time chain, trajectory
//! simulation, and power-law simulated annealing.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod annealing;
pub mod bounds;
pub mod critical;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod graph;
pub mod landscape;
pub mod model;
pub mod rem;
pub mod rng;
pub mod spin;
pub mod stats;

pub use error::{Error, Result};
pub use graph::GraphSpec;
pub use landscape::{FKind, ModificationParams};
pub use model::{EnergyModel, Landscape, LandscapeStats};
pub use rem::RemDisorder;
pub use spin::SpinConfig;
