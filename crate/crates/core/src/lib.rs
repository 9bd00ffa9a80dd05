#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Reserve capacity from thermostatically controlled loads and its effect on
//! power system reliability.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod multistate;
pub mod oracle;
pub mod population;
pub mod reliability;
pub mod stochastic;
pub mod thermal;

pub use error::{Error, Result};
