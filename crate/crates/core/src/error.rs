use thiserror::Error;

use crate::model::SimTime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "control ({speed}, {turn_rate}) violates bounds speed ∈ [0, {u_max}], |turn| ≤ {v_max}"
    )]
    ControlOutOfBounds {
        speed: f64,
        turn_rate: f64,
        u_max: f64,
        v_max: f64,
    },

    #[error("invalid communication graph: {0}")]
    InvalidGraph(String),

    #[error("invalid formation spec: {0}")]
    InvalidFormation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "promise from agent {issuer} queried at t={at} before it becomes valid at t={valid_from}"
    )]
    PromiseNotYetValid {
        issuer: usize,
        at: SimTime,
        valid_from: SimTime,
    },

    #[error("promise from agent {issuer} to agent {recipient} has expired")]
    PromiseExpired { issuer: usize, recipient: usize },

    #[error("invariant violated at t={at}: {what}")]
    Invariant { at: SimTime, what: String },

    #[error("failed to parse scenario: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
