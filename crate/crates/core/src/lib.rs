//! Task-aware visual feature selection for visual-inertial navigation.
//!
//! A forward-simulated horizon (bicycle model plus frustum visibility)
//! produces a base information matrix and one PSD increment per landmark.
//! Selectors then maximize the reduction in `tr(Omega^{-1})` under a
//! cardinality budget, and [`analysis`] evaluates the approximation
//! guarantees that apply to them.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod infomat;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod selectors;
pub mod serde_mat;
pub mod synthetic;

pub use error::{Error, Result};
pub use infomat::{objective_value, ProblemInstance};
pub use selectors::{FeatureSet, Method, SelectionResult};
