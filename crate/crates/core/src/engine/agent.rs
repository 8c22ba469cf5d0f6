//! Per-agent protocol state owned by the event loop.

use crate::model::{ControlInput, UnicycleState};
use crate::promises::Promise;
use crate::triggers::ControlPlan;

/// A promise held by a recipient, with the issuer's sequence number.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Held {
    pub promise: Promise,
    pub seq: u64,
}

/// Issuer-side bookkeeping for promises made to one neighbor.
#[derive(Debug, Clone, Default)]
pub(crate) struct Outgoing {
    pub last_sent_tick: Option<u64>,
    pub next_seq: u64,
    /// Promises the recipient may still be relying on, oldest first.
    pub monitored: Vec<(u64, Promise)>,
    /// A WARN went out and the replacement promise is scheduled.
    pub warned: bool,
    pub scheduled_gen: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct AgentRuntime {
    pub neighbors: Vec<usize>,
    pub plan: ControlPlan<Promise>,
    /// Control reported in promises before the first plan exists.
    pub provisional: Option<ControlInput>,
    pub held: Vec<Option<Held>>,
    /// Highest sequence number a WARN invalidated, per neighbor.
    pub warned_seq: Vec<Option<u64>>,
    pub out: Vec<Outgoing>,
    /// Tick of the last promise receipt; requests wait a dwell time from here.
    pub anchor_tick: u64,
    pub dwell_ticks: u64,
    /// Set after a replan until the next request has been scheduled.
    pub request_armed: bool,
    pub request_gen: u64,
    pub replan_pending: bool,
    pub replan_has_receipt: bool,
    /// Tick at which each neighbor's latest promise arrived.
    pub received_tick: Vec<Option<u64>>,
    pub pending_responses: Vec<usize>,
    pub respond_pending: bool,
    pub awaiting: Vec<bool>,
    pub retry_gen: Vec<u64>,
    pub neighbor_gaps: Vec<Option<f64>>,
}

impl AgentRuntime {
    pub fn new(
        id: usize,
        neighbors: Vec<usize>,
        initial: UnicycleState,
        provisional: ControlInput,
        dwell_ticks: u64,
    ) -> Self {
        let n = neighbors.len();
        Self {
            neighbors,
            plan: ControlPlan::idle(id, initial, crate::model::SimTime::ZERO),
            provisional: Some(provisional),
            held: vec![None; n],
            warned_seq: vec![None; n],
            out: vec![Outgoing::default(); n],
            anchor_tick: 0,
            dwell_ticks,
            request_armed: false,
            request_gen: 0,
            replan_pending: false,
            replan_has_receipt: false,
            received_tick: vec![None; n],
            pending_responses: Vec::new(),
            respond_pending: false,
            awaiting: vec![false; n],
            retry_gen: vec![0; n],
            neighbor_gaps: vec![None; n],
        }
    }

    pub fn slot(&self, neighbor: usize) -> Option<usize> {
        self.neighbors.binary_search(&neighbor).ok()
    }
}
