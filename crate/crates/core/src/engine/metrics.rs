use serde::{Deserialize, Serialize};

use crate::model::SimTime;

/// Run counters. `n_comm = Σ_i |N(i)| · n_s[i] + n_e[i]`; WARN, REQ and ACK
/// signals are counted separately and are not part of `n_comm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub law: String,
    pub seed: u64,
    pub duration: f64,
    /// Self-triggered request rounds per agent.
    pub n_s: Vec<u64>,
    /// Promises sent because of a broken (or expiring) promise, per agent.
    pub n_e: Vec<u64>,
    pub n_comm: u64,
    pub warn_count: u64,
    pub req_count: u64,
    pub ack_count: u64,
    /// Every promise put on the channel, including retry responses.
    pub promise_messages: u64,
    pub dropped_promises: u64,
    /// Promise messages per ordered pair `(sender, receiver)`.
    pub pair_promises: Vec<(usize, usize, u64)>,
    /// Ticks at which some recipient's disk missed the issuer's true position.
    pub containment_violations: u64,
    /// Consecutive tick pairs where V rose by more than `1e-9 · max(1, V)`.
    pub monotonicity_violations: u64,
    /// Largest `V(t_{k+1}) − V(t_k)` over the run.
    pub max_v_increase: f64,
    pub v_initial: f64,
    pub v_final: f64,
    pub final_edge_ratios: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventMessageKind {
    Warn,
    Promise,
}

/// One event-triggered message (WARN or breach-driven promise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMessage {
    pub tick: u64,
    pub sender: usize,
    pub receiver: usize,
    pub kind: EventMessageKind,
}

/// One self-triggered request round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestEvent {
    pub tick: u64,
    pub agent: usize,
}

/// Per-agent mode in the state trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentMode {
    Normal,
    Safe,
}

impl AgentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentMode::Normal => "normal",
            AgentMode::Safe => "safe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: SimTime,
    /// `(x, y, heading, mode)` per agent.
    pub agents: Vec<(f64, f64, f64, AgentMode)>,
}
