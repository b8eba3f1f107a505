//! Two-sample hypothesis tests for graphs on a common vertex set.
//!
//! Implements asymptotic tests (normal dominance of a split-sample Frobenius
//! statistic, a Tracy-Widom test on a normalized difference matrix, a
//! chi-squared large-sample test) and their bootstrap baselines, together
//! with the random-graph models, spectral kernels and Monte-Carlo harness
//! needed to study their calibration and power.

#![forbid(unsafe_code)]

pub mod clustering;
pub mod dist;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod multi;
pub mod single;

pub use error::{Error, Result};
pub use graph::{
    CommunityPartition, Graph, GraphPopulation, PopulationAdjacency, TestOutcome,
};
pub use models::Seed;
