//! Transient simulation of gas pipe networks and structured model order reduction
//! with empirical Gramians.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the double-precision instantiation used by the CLI.

pub mod bench;
pub mod config;
pub mod error;
pub mod gasmodel;
pub mod gramians;
pub mod linalg;
pub mod netgraph;
pub mod reductors;
pub mod rom;
pub mod scalar;
pub mod steady;
pub mod store;
pub mod timestep;

pub use error::{Error, Result};
pub use nalgebra;
pub use scalar::Scalar;

pub type DiscreteModel = gasmodel::DiscreteModel<f64>;
pub type GasState = gasmodel::GasState<f64>;
pub type Params = gasmodel::Params<f64>;
pub type SteadyState = steady::SteadyState<f64>;
pub type Scenario = timestep::Scenario<f64>;
pub type Solution = timestep::Solution<f64>;
pub type GramianPair = gramians::GramianPair<f64>;
pub type ProjectorSeries = reductors::ProjectorSeries<f64>;
pub type ReducedModel = rom::ReducedModel<f64>;
