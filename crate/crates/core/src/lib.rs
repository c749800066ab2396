//! Transforming reinforcement-learning tasks over finite labeled MDPs.
//!
//! Numerical types are generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar: unsuffixed names use `f64`, the `32` variants `f32`.
//! File formats, experiments and learners work in `f64`.

pub mod error;
pub mod graph;
pub mod io;
pub mod learn;
pub mod linalg;
pub mod mdp;
pub mod random;
pub mod reduce;
pub mod refute;
pub mod rng;
pub mod scalar;
pub mod spec;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mdp = mdp::Mdp<f64>;
pub type Mdp32 = mdp::Mdp<f32>;
pub type PositionalPolicy = mdp::PositionalPolicy<f64>;
pub type PositionalPolicy32 = mdp::PositionalPolicy<f32>;
pub type FiniteMemoryPolicy = mdp::FiniteMemoryPolicy<f64>;
pub type FiniteMemoryPolicy32 = mdp::FiniteMemoryPolicy<f32>;
pub type RewardMachine = spec::RewardMachine<f64>;
pub type RewardMachine32 = spec::RewardMachine<f32>;
pub type AbstractRewardMachine = spec::AbstractRewardMachine<f64>;
pub type AbstractRewardMachine32 = spec::AbstractRewardMachine<f32>;
pub type Specification = spec::Specification<f64>;
pub type Specification32 = spec::Specification<f32>;
pub type ReductionDescriptor = reduce::ReductionDescriptor<f64>;
pub type ReductionDescriptor32 = reduce::ReductionDescriptor<f32>;
