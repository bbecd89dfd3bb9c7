//! Modeling, simulation and identification toolkit for a two-tube,
//! thread-constrained pneumatic trunk actuator.

pub mod error;
pub mod fitting;
pub mod measurement;
pub mod model;
pub mod params;
pub mod rod;
pub mod units;
pub mod cli;
pub mod config;
pub mod scenario;
pub mod service;
