//! Promises: parametric set-valued commitments an agent makes to a neighbor
//! about its future position, plus the rules that generate them, breach
//! detection, the reachability fallback used after a warning, expiration
//! and noise validation.
//!
//! A ball-radius control promise `(y, v, δ)` commits the issuer to controls
//! within `δ` of `v` (Euclidean norm in (speed, turn) space). Its position
//! set at `τ = t − issued_at` is the disk around the zero-order-hold
//! prediction with radius
//!
//! ```text
//! ρ(τ) = ω + δτ + (v_speed + ω) · (ωτ + δτ²/2)
//! ```
//!
//! intersected with the reachability disk `B(y, ω + u_max τ)`. Recipients
//! hold the ball while it fits inside the reachability disk and the
//! reachability disk afterwards, so the held disk grows with `δ`. The `δτ` term
//! bounds the speed deviation, the quadratic term the heading drift, and `ω`
//! is the anchor uncertainty added when a noisy promise is validated (the
//! anchor speed itself is then only known to within `ω`).
//!
//! Breach detection tests the ball and the reachability disk separately, so
//! the issuer breaks its promise as soon as it leaves their intersection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    reachable_disk, step_unicycle, AgentId, ControlBounds, ControlInput, DiskSet, SimTime,
    UnicycleState, Vec2,
};

/// Absolute slack (m) when testing an issuer's position against its promise.
pub const BREACH_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromiseRule {
    /// Constant control radius `δ = 2 · u_max · λ`.
    StaticBall { lambda: f64 },
    /// `δ(t) = scale · ‖u(t) − u_sf‖ + floor`.
    DynamicBall { scale: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromiseRuleConfig {
    pub rule: PromiseRule,
    /// Validity window `T_exp` of each promise, if any.
    pub expiration: Option<f64>,
}

impl PromiseRuleConfig {
    pub fn static_ball(lambda: f64) -> Self {
        Self {
            rule: PromiseRule::StaticBall { lambda },
            expiration: None,
        }
    }

    pub fn dynamic_ball(scale: f64, floor: f64) -> Self {
        Self {
            rule: PromiseRule::DynamicBall { scale, floor },
            expiration: None,
        }
    }

    /// Checks parameter ranges; an expiration must exceed the event dwell time.
    pub fn validate(&self, t_d_event: f64) -> Result<()> {
        match self.rule {
            PromiseRule::StaticBall { lambda } if !(0.0..=1.0).contains(&lambda) => {
                return Err(Error::InvalidConfig(format!(
                    "lambda must lie in [0, 1], got {lambda}"
                )));
            }
            PromiseRule::DynamicBall { scale, floor }
                if !(scale >= 0.0 && floor > 0.0 && scale.is_finite()) =>
            {
                return Err(Error::InvalidConfig(format!(
                    "dynamic ball needs scale ≥ 0 and floor > 0, got scale={scale}, floor={floor}"
                )));
            }
            _ => {}
        }
        if let Some(t_exp) = self.expiration {
            if t_exp.is_nan() || t_exp <= t_d_event {
                return Err(Error::InvalidConfig(format!(
                    "promise expiration {t_exp} must exceed the event dwell time {t_d_event}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PromiseMode {
    BallRadius,
    /// After a warning: the promise disk at `since`, grown at `u_max`.
    ReachabilityFallback {
        since: SimTime,
        base: DiskSet,
    },
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Promise {
    pub issuer: AgentId,
    pub recipient: AgentId,
    pub issued_at: SimTime,
    pub anchor_state: UnicycleState,
    pub anchor_control: ControlInput,
    /// Control-space ball radius δ.
    pub radius: f64,
    pub mode: PromiseMode,
    pub expires_at: Option<SimTime>,
    /// Bound on the anchor state error (position and heading) of a validated
    /// noisy promise; zero for promises received exactly.
    pub anchor_uncertainty: f64,
    /// Issuer's speed limit, known to every agent.
    pub speed_limit: f64,
}

/// Issues a promise from `issuer`'s exact state and the control it applies at `now`.
pub fn make_promise(
    rule: &PromiseRuleConfig,
    issuer: AgentId,
    recipient: AgentId,
    state: &UnicycleState,
    current_control: &ControlInput,
    now: SimTime,
    bounds: &ControlBounds,
) -> Promise {
    let radius = match rule.rule {
        PromiseRule::StaticBall { lambda } => 2.0 * bounds.u_max * lambda,
        PromiseRule::DynamicBall { scale, floor } => {
            scale * current_control.as_vector().norm() + floor
        }
    };
    Promise {
        issuer,
        recipient,
        issued_at: now,
        anchor_state: *state,
        anchor_control: *current_control,
        radius,
        mode: PromiseMode::BallRadius,
        expires_at: rule.expiration.map(|e| now + e),
        anchor_uncertainty: 0.0,
        speed_limit: bounds.u_max,
    }
}

impl Promise {
    /// Earliest time the promise can be evaluated at.
    pub fn valid_from(&self) -> SimTime {
        match self.mode {
            PromiseMode::ReachabilityFallback { since, .. } => since,
            _ => self.issued_at,
        }
    }

    /// Position-deviation radius around the zero-order-hold prediction after `tau` seconds.
    pub fn ball_radius_at(&self, tau: f64) -> f64 {
        let w = self.anchor_uncertainty;
        let d = self.radius;
        let u0 = self.anchor_control.speed() + w;
        w + d * tau + u0 * (w * tau + 0.5 * d * tau * tau)
    }

    /// Zero-order-hold prediction of the issuer's position: the anchor state
    /// integrated under the anchor control.
    pub fn zoh_position(&self, t: SimTime) -> Vec2 {
        let tau = t.since(self.issued_at).max(0.0);
        step_unicycle(&self.anchor_state, &self.anchor_control, tau).position
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.mode, PromiseMode::ReachabilityFallback { .. })
    }

    pub fn expire(&self) -> Promise {
        Promise {
            mode: PromiseMode::Expired,
            ..*self
        }
    }
}

/// The position set the promise commits to at time `t`.
pub fn promise_set_at(p: &Promise, t: SimTime) -> Result<DiskSet> {
    if t < p.valid_from() {
        return Err(Error::PromiseNotYetValid {
            issuer: p.issuer.index(),
            at: t,
            valid_from: p.valid_from(),
        });
    }
    match p.mode {
        PromiseMode::BallRadius => {
            let tau = t.since(p.issued_at);
            let zoh = step_unicycle(&p.anchor_state, &p.anchor_control, tau).position;
            let ball = DiskSet::from_parts(zoh, p.ball_radius_at(tau));
            let reach =
                reachable_disk(&p.anchor_state, tau, p.speed_limit).inflate(p.anchor_uncertainty);
            Ok(ball.clip_to(&reach))
        }
        PromiseMode::ReachabilityFallback { since, base } => {
            Ok(base.inflate(p.speed_limit * t.since(since)))
        }
        PromiseMode::Expired => Err(Error::PromiseExpired {
            issuer: p.issuer.index(),
            recipient: p.recipient.index(),
        }),
    }
}

/// True when the issuer's actual position lies outside the promised set.
pub fn check_breach(p: &Promise, actual: &UnicycleState, t: SimTime) -> Result<bool> {
    let outside = |disk: &DiskSet| !disk.contains(&actual.position, BREACH_EPSILON);
    match p.mode {
        PromiseMode::BallRadius => {
            if t < p.issued_at {
                return Err(Error::PromiseNotYetValid {
                    issuer: p.issuer.index(),
                    at: t,
                    valid_from: p.issued_at,
                });
            }
            let tau = t.since(p.issued_at);
            let zoh = step_unicycle(&p.anchor_state, &p.anchor_control, tau).position;
            let ball = DiskSet::from_parts(zoh, p.ball_radius_at(tau));
            let reach =
                reachable_disk(&p.anchor_state, tau, p.speed_limit).inflate(p.anchor_uncertainty);
            Ok(outside(&ball) || outside(&reach))
        }
        _ => Ok(outside(&promise_set_at(p, t)?)),
    }
}

/// Replaces the promise after a warning at `t_star` by the union of reachable
/// sets from its disk at `t_star`.
pub fn fallback_to_reachability(p: &Promise, t_star: SimTime) -> Result<Promise> {
    let base = promise_set_at(p, t_star)?;
    Ok(Promise {
        mode: PromiseMode::ReachabilityFallback {
            since: t_star,
            base,
        },
        ..*p
    })
}

/// Turns a promise received over a noisy link into one that contains the
/// issuer's true promise: the control radius grows by `ω̄ + δ̄` and the anchor
/// becomes uncertain by `ω̄`.
pub fn validate_noisy_promise(
    received: &Promise,
    noise_bound: f64,
    radius_noise_bound: f64,
) -> Promise {
    Promise {
        radius: received.radius + noise_bound + radius_noise_bound,
        anchor_uncertainty: received.anchor_uncertainty + noise_bound,
        ..*received
    }
}

pub fn is_expired(p: &Promise, t: SimTime) -> bool {
    matches!(p.mode, PromiseMode::Expired) || p.expires_at.is_some_and(|e| t > e)
}

/// Wire form of a ball-radius promise:
/// ⟨issuer, recipient, issued_at, position, heading, control, radius, expires_at⟩.
/// `control_gap` is piggybacked for the adaptive dwell time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromiseWire {
    pub issuer: usize,
    pub recipient: usize,
    pub issued_at: f64,
    pub position: [f64; 2],
    pub heading: f64,
    pub control: [f64; 2],
    pub radius: f64,
    pub expires_at: Option<f64>,
    pub control_gap: f64,
}

impl PromiseWire {
    pub fn encode(p: &Promise, control_gap: f64) -> Self {
        Self {
            issuer: p.issuer.index(),
            recipient: p.recipient.index(),
            issued_at: p.issued_at.secs(),
            position: [p.anchor_state.position.x, p.anchor_state.position.y],
            heading: p.anchor_state.heading,
            control: [p.anchor_control.speed(), p.anchor_control.turn_rate()],
            radius: p.radius,
            expires_at: p.expires_at.map(SimTime::secs),
            control_gap,
        }
    }

    pub fn decode(&self, bounds: &ControlBounds) -> Result<Promise> {
        Ok(Promise {
            issuer: AgentId(self.issuer),
            recipient: AgentId(self.recipient),
            issued_at: SimTime::new(self.issued_at)?,
            anchor_state: UnicycleState::new(self.position[0], self.position[1], self.heading),
            anchor_control: bounds.control(self.control[0], self.control[1])?,
            radius: self.radius,
            mode: PromiseMode::BallRadius,
            expires_at: self.expires_at.map(SimTime::new).transpose()?,
            anchor_uncertainty: 0.0,
            speed_limit: bounds.u_max,
        })
    }
}
