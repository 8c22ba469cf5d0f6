//! Simulated channel: PROMISE payloads may be dropped, delayed and
//! corrupted by bounded noise; WARN, REQ and ACK signals are delivered
//! reliably and instantly.
//!
//! Randomness is reproducible per message: each ordered agent pair owns a
//! ChaCha8 stream (`stream = sender << 32 | receiver`) keyed by the run
//! seed, and the n-th message on that pair reads from word offset `n << 20`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall, UnitDisc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_angle, ControlBounds, SimTime};
use crate::promises::PromiseWire;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Probability `p` that a promise packet is lost.
    pub drop_prob: f64,
    /// Upper bound `Δ̄` on the promise delivery delay (s).
    pub max_delay: f64,
    /// Bound `ω̄` on state and control noise.
    pub noise_bound: f64,
    /// Bound `δ̄` on radius noise.
    pub radius_noise_bound: f64,
}

impl NetworkParams {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn is_ideal(&self) -> bool {
        self.drop_prob == 0.0
            && self.max_delay == 0.0
            && self.noise_bound == 0.0
            && self.radius_noise_bound == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::InvalidConfig(format!(
                "drop_prob must lie in [0, 1), got {}",
                self.drop_prob
            )));
        }
        for (name, v) in [
            ("max_delay", self.max_delay),
            ("noise_bound", self.noise_bound),
            ("radius_noise_bound", self.radius_noise_bound),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a nonnegative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MessageKind {
    Promise(PromiseWire),
    /// Breach warning; carries the sequence number of the newest broken promise.
    Warn {
        seq: u64,
    },
    Req,
    /// Receipt of the promise with this sequence number.
    Ack {
        seq: u64,
    },
}

impl MessageKind {
    pub fn label(&self) -> &'static str {
        match self {
            MessageKind::Promise(_) => "PROMISE",
            MessageKind::Warn { .. } => "WARN",
            MessageKind::Req => "REQ",
            MessageKind::Ack { .. } => "ACK",
        }
    }

    pub fn size_class(&self) -> &'static str {
        match self {
            MessageKind::Promise(_) => "payload",
            MessageKind::Warn { .. } | MessageKind::Ack { .. } => "signal+seq",
            MessageKind::Req => "1bit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: usize,
    pub receiver: usize,
    pub sent_at: SimTime,
    /// Per-ordered-pair promise sequence number (promises only, else 0).
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    Dropped,
    Delivered { delay: f64, message: Message },
}

/// Per-message generator for the ordered pair and its message index.
pub fn message_rng(seed: u64, sender: usize, receiver: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sender as u64) << 32) | receiver as u64);
    rng.set_word_pos(u128::from(index) << 20);
    rng
}

/// Sends one message. `rng` must be the message's own generator (see
/// [`message_rng`]); it is only consumed for promise payloads.
pub fn transmit(
    msg: Message,
    params: &NetworkParams,
    bounds: &ControlBounds,
    rng: &mut impl Rng,
) -> Delivery {
    let MessageKind::Promise(wire) = msg.kind else {
        return Delivery::Delivered {
            delay: 0.0,
            message: msg,
        };
    };
    if params.is_ideal() {
        return Delivery::Delivered {
            delay: 0.0,
            message: msg,
        };
    }
    if rng.random::<f64>() < params.drop_prob {
        return Delivery::Dropped;
    }
    let delay = rng.random::<f64>() * params.max_delay;
    let mut wire = wire;
    let w = params.noise_bound;
    if w > 0.0 {
        let [dx, dy, dh]: [f64; 3] = UnitBall.sample(rng);
        wire.position[0] += w * dx;
        wire.position[1] += w * dy;
        wire.heading = normalize_angle(wire.heading + w * dh);
        let [du, dv]: [f64; 2] = UnitDisc.sample(rng);
        let noisy = bounds.clamp(wire.control[0] + w * du, wire.control[1] + w * dv);
        wire.control = [noisy.speed(), noisy.turn_rate()];
    }
    if params.radius_noise_bound > 0.0 {
        let e = rng.random_range(-params.radius_noise_bound..=params.radius_noise_bound);
        wire.radius = (wire.radius + e).max(0.0);
    }
    Delivery::Delivered {
        delay,
        message: Message {
            kind: MessageKind::Promise(wire),
            ..msg
        },
    }
}

/// One line of the message log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessageRecord {
    pub sent_at: SimTime,
    /// `None` when the packet was dropped.
    pub deliver_at: Option<SimTime>,
    pub kind: &'static str,
    pub sender: usize,
    pub receiver: usize,
    pub size_class: &'static str,
}
