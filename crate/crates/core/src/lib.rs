//! Simulation library for team-triggered, self-triggered and robust
//! team-triggered coordination of networked unicycle agents.

pub mod config;
pub mod controllers;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod formation;
pub mod model;
pub mod network;
pub mod output;
pub mod promises;
pub mod triggers;

pub use error::{Error, Result};
