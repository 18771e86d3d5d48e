//! Polynomial lower approximations of recourse functions and two-stage
//! stochastic programming with Moment-SOS relaxations.

pub mod cli;
pub mod conic;
pub mod error;
pub mod fixtures;
pub mod measures;
pub mod momentsolve;
pub mod polyalg;
pub mod sosrelax;
pub mod twostage;

pub use error::{Error, Result};
