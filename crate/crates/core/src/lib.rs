//! Online exponential barrier voltage control for radial distribution feeders.

pub mod baselines;
pub mod controller;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod netmodel;
pub mod output;
pub mod plant;
pub mod scenario;
pub mod trajectory;

pub use error::{Error, Result};
