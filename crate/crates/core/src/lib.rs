//! Learning-augmented online bipartite matching in the random arrival order
//! model.
//!
//! The core algorithm, [`online::TamState`], samples a prefix of the arrival
//! sequence with replacement, estimates the L1 distance between the observed
//! and predicted type distributions, and then either keeps following a
//! maximum matching of the predicted graph (Mimic) or switches to Ranking.
//! [`harness`] runs seeded Monte-Carlo batches over instance families and
//! checks the deterministic match-count bounds on every trial.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod online;
pub mod predictions;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use graph::{Instance, MatchingPlan, TypeProfile, VertexType};
pub use online::{Branch, OnlineAlgorithm, TamParams, TamState};
pub use scalar::Scalar;

/// Default real type.
pub type Real = f64;

pub type EstimatorConfig = estimator::EstimatorConfig<Real>;
pub type EstimatorConfigF32 = estimator::EstimatorConfig<f32>;
pub type PaddedDomain = estimator::PaddedDomain<Real>;
pub type PaddedDomainF32 = estimator::PaddedDomain<f32>;
pub type SampleOutcome = estimator::SampleOutcome<Real>;
