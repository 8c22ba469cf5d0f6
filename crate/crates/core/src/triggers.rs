//! Worst-case Lyapunov rate over neighbor disks, the self-trigger critical
//! time, dwell-time policies and the issuer-side breach reaction.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::controllers::{control_from_estimates, NeighborSet};
use crate::error::{Error, Result};
use crate::formation::FormationSpec;
use crate::model::{
    step_unicycle, ControlBounds, ControlInput, DiskSet, SimTime, UnicycleState, Vec2,
};

/// Cap returned by the adaptive dwell time, as a multiple of its floor.
pub const ADAPTIVE_DWELL_CAP_FACTOR: f64 = 10.0;
/// Own control gaps at or below this are treated as zero by the adaptive dwell.
pub const ADAPTIVE_GAP_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellConfig {
    pub t_d_self: f64,
    pub t_d_event: f64,
    pub adaptive: bool,
    /// Scale `δ_d` of the adaptive rule.
    pub adaptive_scale: f64,
    /// Floor `Δ_d` of the adaptive rule.
    pub adaptive_floor: f64,
}

impl DwellConfig {
    pub fn fixed(t_d_self: f64, t_d_event: f64) -> Self {
        Self {
            t_d_self,
            t_d_event,
            adaptive: false,
            adaptive_scale: 0.15,
            adaptive_floor: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.t_d_self) || !positive(self.t_d_event) {
            return Err(Error::InvalidConfig(format!(
                "dwell times must be positive, got t_d_self={}, t_d_event={}",
                self.t_d_self, self.t_d_event
            )));
        }
        if self.adaptive && !(positive(self.adaptive_scale) && positive(self.adaptive_floor)) {
            return Err(Error::InvalidConfig(format!(
                "adaptive dwell needs positive scale and floor, got {} and {}",
                self.adaptive_scale, self.adaptive_floor
            )));
        }
        Ok(())
    }
}

/// Numerical knobs of the trigger computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    /// Boundary samples per disk in the sup approximation.
    pub boundary_samples: usize,
    /// Scan step along the predicted trajectory (s).
    pub scan_step: f64,
    /// Bisection width at which the critical time is accepted (s).
    pub bisection_tol: f64,
    /// Search horizon as a multiple of the self-triggered dwell time.
    pub horizon_factor: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            boundary_samples: 32,
            scan_step: 1e-3,
            bisection_tol: 1e-6,
            horizon_factor: 10.0,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.boundary_samples < 4 {
            return Err(Error::InvalidConfig(
                "boundary_samples must be at least 4".into(),
            ));
        }
        if !(self.scan_step > 0.0
            && self.bisection_tol > 0.0
            && self.bisection_tol < self.scan_step)
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 < bisection_tol < scan_step, got {} and {}",
                self.bisection_tol, self.scan_step
            )));
        }
        if !(self.horizon_factor >= 1.0 && self.horizon_factor.is_finite()) {
            return Err(Error::InvalidConfig(
                "horizon_factor must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a critical-time computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerVerdict {
    pub t_star: SimTime,
    pub t_next: SimTime,
    /// `(t_star, t_next]` when the agent must idle before its next request.
    pub safe_mode_window: Option<(SimTime, SimTime)>,
}

impl TriggerVerdict {
    pub fn new(t_star: SimTime, t_last: SimTime, dwell: f64) -> Self {
        let t_next = t_star.max(t_last + dwell);
        Self {
            t_star,
            t_next,
            safe_mode_window: (t_star < t_next).then_some((t_star, t_next)),
        }
    }
}

/// Edge term of `∇_i V · w` as a function of the neighbor position `y`.
#[inline]
fn edge_rate(own: &Vec2, y: &Vec2, desired: f64, w: &Vec2) -> f64 {
    let z = own - y;
    4.0 * (z.norm_squared() - desired * desired) * z.dot(w)
}

/// Upper bound on `sup_{y ∈ disk} 4(‖x−y‖² − d²)(x−y)·w`.
///
/// The interior critical points of this cubic are known in closed form
/// (`x − y = ±(d/√3) ŵ`, or `‖x − y‖ = d` with `(x − y) ⊥ w`). On the
/// boundary circle `y = c + r(cos φ, sin φ)` the integrand is a degree-2
/// trigonometric polynomial in `φ`, whose critical points are the real roots
/// of a quartic in `tan(φ/2)`. The maximum over those roots, `φ = π`, the
/// interior candidates and `samples` equispaced boundary points is padded by
/// a relative rounding margin.
pub fn disk_sup(own: &Vec2, w: &Vec2, disk: &DiskSet, desired: f64, samples: usize) -> f64 {
    let center_value = edge_rate(own, &disk.center, desired, w);
    let r = disk.radius();
    if r == 0.0 || (w.x == 0.0 && w.y == 0.0) {
        return center_value;
    }
    let mut best = center_value;
    let inside = |y: &Vec2| (y - disk.center).norm() <= r;
    let w_hat = w / w.norm();
    let s = desired / 3f64.sqrt();
    for y in [own + s * w_hat, own - s * w_hat] {
        if inside(&y) {
            best = best.max(edge_rate(own, &y, desired, w));
        }
    }
    let perp = Vec2::new(-w_hat.y, w_hat.x) * desired;
    if inside(&(own + perp)) || inside(&(own - perp)) {
        best = best.max(0.0);
    }

    let circle = BoundaryPoly::new(own, w, disk, desired);
    let value = |phi: f64| {
        edge_rate(
            own,
            &(disk.center + r * Vec2::new(phi.cos(), phi.sin())),
            desired,
            w,
        )
    };
    let step = TAU / samples as f64;
    for k in 0..samples {
        best = best.max(value(k as f64 * step));
    }
    best = best.max(value(PI));
    for phi in circle.critical_angles() {
        best = best.max(value(phi)).max(value(circle.polish(phi)));
    }
    best + SUP_REL_MARGIN * circle.scale().max(center_value.abs())
}

/// Relative margin covering rounding in the boundary root finding.
const SUP_REL_MARGIN: f64 = 1e-9;

/// `f(φ) = 4[a0 + a1 cos φ + b1 sin φ + a2 cos 2φ + b2 sin 2φ]`, the edge
/// rate on the boundary circle of a disk.
struct BoundaryPoly {
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    a0: f64,
}

impl BoundaryPoly {
    fn new(own: &Vec2, w: &Vec2, disk: &DiskSet, desired: f64) -> Self {
        let q = own - disk.center;
        let r = disk.radius();
        let alpha = q.norm_squared() + r * r - desired * desired;
        let qw = q.dot(w);
        Self {
            a0: (alpha + r * r) * qw,
            a1: -alpha * r * w.x - 2.0 * r * qw * q.x,
            b1: -alpha * r * w.y - 2.0 * r * qw * q.y,
            a2: r * r * (q.x * w.x - q.y * w.y),
            b2: r * r * (q.x * w.y + q.y * w.x),
        }
    }

    fn scale(&self) -> f64 {
        4.0 * (self.a0.abs() + self.a1.abs() + self.b1.abs() + self.a2.abs() + self.b2.abs())
    }

    fn derivative(&self, phi: f64) -> (f64, f64) {
        let (s1, c1) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        let d1 = -self.a1 * s1 + self.b1 * c1 - 2.0 * self.a2 * s2 + 2.0 * self.b2 * c2;
        let d2 = -self.a1 * c1 - self.b1 * s1 - 4.0 * self.a2 * c2 - 4.0 * self.b2 * s2;
        (d1, d2)
    }

    /// Angles where `f' = 0`, from the real roots of the quartic obtained by
    /// substituting `t = tan(φ/2)` (the root `φ = π` is handled separately).
    fn critical_angles(&self) -> Vec<f64> {
        // Highest degree first.
        let coeffs = [
            2.0 * self.b2 - self.b1,
            8.0 * self.a2 - 2.0 * self.a1,
            -12.0 * self.b2,
            -2.0 * self.a1 - 8.0 * self.a2,
            self.b1 + 2.0 * self.b2,
        ];
        real_roots(&coeffs)
            .into_iter()
            .map(|t| 2.0 * t.atan())
            .collect()
    }

    /// Two Newton steps on `f'` from `phi`.
    fn polish(&self, mut phi: f64) -> f64 {
        for _ in 0..2 {
            let (d1, d2) = self.derivative(phi);
            if d2 == 0.0 {
                break;
            }
            let next = phi - d1 / d2;
            if !next.is_finite() {
                break;
            }
            phi = next;
        }
        phi
    }
}

/// Real parts of the roots of a polynomial (highest degree first) whose
/// imaginary part is negligible, via companion-matrix eigenvalues.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let size = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if size == 0.0 {
        return Vec::new();
    }
    let first = coeffs
        .iter()
        .position(|c| c.abs() > 1e-13 * size)
        .unwrap_or(coeffs.len() - 1);
    let c = &coeffs[first..];
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -c[j + 1] / c[0]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Worst-case rate `sup_{y_N} ∇_i V(x_i, y_N) · ẋ_i` over the product of
/// neighbor disks, where `ẋ_i` is agent i's velocity under `control`.
///
/// `∇_i V` is a sum of per-edge terms, each depending on one neighbor only,
/// so the sup over the product equals the sum of per-disk sups.
/// `neighbors` pairs each disk with its desired distance.
pub fn li_v_sup(
    own: &UnicycleState,
    control: &ControlInput,
    neighbors: &[(DiskSet, f64)],
    samples: usize,
) -> f64 {
    if control.speed() == 0.0 {
        return 0.0;
    }
    let w = control.speed() * own.direction();
    neighbors
        .iter()
        .map(|(disk, d)| disk_sup(&own.position, &w, disk, *d, samples))
        .sum()
}

/// Everything a plan needs besides the agent's information.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub spec: &'a FormationSpec,
    pub bounds: &'a ControlBounds,
    pub trigger: &'a TriggerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub state0: UnicycleState,
    pub control: ControlInput,
}

/// The control an agent applies from `t_last` onward, computed from the
/// information held at `t_last`.
///
/// On a grid of `scan_step` the plan re-evaluates `u**` from the E-map
/// estimates and holds it constant over the step. The critical time is the
/// first time the worst-case rate turns positive (checked at the start,
/// middle and end of each step and bisected), capped at
/// `t_last + horizon_factor · t_d_self`. Past it the agent holds position.
///
/// The plan is extended lazily: it depends only on information fixed at
/// `t_last`, so extending on demand gives the same result as solving it
/// eagerly.
#[derive(Debug, Clone)]
pub struct ControlPlan<S> {
    agent: usize,
    sets: Vec<S>,
    t_last: f64,
    segments: Vec<Segment>,
    steps_done: u64,
    cap_steps: u64,
    computed_to: f64,
    t_star: Option<f64>,
}

impl<S: NeighborSet> ControlPlan<S> {
    /// `horizon` is the critical-time search cap measured from `t_last`.
    pub fn new(
        agent: usize,
        own: UnicycleState,
        sets: Vec<S>,
        t_last: SimTime,
        horizon: f64,
        trigger: &TriggerConfig,
    ) -> Self {
        let cap_steps = ((horizon / trigger.scan_step) - 1e-9).ceil().max(1.0) as u64;
        Self {
            agent,
            sets,
            t_last: t_last.secs(),
            segments: vec![Segment {
                t0: t_last.secs(),
                state0: own,
                control: ControlInput::ZERO,
            }],
            steps_done: 0,
            cap_steps,
            computed_to: t_last.secs(),
            t_star: None,
        }
    }

    /// A plan that holds position from `t_last` on (no usable information).
    pub fn idle(agent: usize, own: UnicycleState, t_last: SimTime) -> Self {
        Self {
            agent,
            sets: Vec::new(),
            t_last: t_last.secs(),
            segments: vec![Segment {
                t0: t_last.secs(),
                state0: own,
                control: ControlInput::ZERO,
            }],
            steps_done: 0,
            cap_steps: 0,
            computed_to: f64::INFINITY,
            t_star: Some(t_last.secs()),
        }
    }

    pub fn t_last(&self) -> SimTime {
        SimTime::from_secs(self.t_last)
    }

    pub fn sets(&self) -> &[S] {
        &self.sets
    }

    /// Critical time, once the scan has reached it.
    pub fn t_star(&self) -> Option<SimTime> {
        self.t_star.map(SimTime::from_secs)
    }

    pub fn computed_to(&self) -> f64 {
        self.computed_to
    }

    /// Extends the plan until it covers `t`.
    pub fn extend_to(&mut self, t: f64, ctx: &PlanContext<'_>) -> Result<()> {
        while self.computed_to < t {
            self.step_once(ctx)?;
        }
        Ok(())
    }

    /// Extends the plan until the critical time is known.
    pub fn resolve(&mut self, ctx: &PlanContext<'_>) -> Result<SimTime> {
        while self.t_star.is_none() {
            self.step_once(ctx)?;
        }
        Ok(SimTime::from_secs(self.t_star.unwrap_or(self.t_last)))
    }

    fn disks_at(&self, t: f64, ctx: &PlanContext<'_>) -> Result<Vec<(DiskSet, f64)>> {
        let at = SimTime::from_secs(t);
        self.sets
            .iter()
            .zip(ctx.spec.neighbor_distances(self.agent))
            .map(|(s, &(_, d))| Ok((s.disk_at(at)?, d)))
            .collect()
    }

    fn control_at_grid(
        &self,
        state: &UnicycleState,
        t: f64,
        ctx: &PlanContext<'_>,
    ) -> Result<ControlInput> {
        let at = SimTime::from_secs(t);
        let estimates = self
            .sets
            .iter()
            .map(|s| s.estimate_at(at))
            .collect::<Result<Vec<_>>>()?;
        Ok(control_from_estimates(
            self.agent, state, &estimates, ctx.spec, ctx.bounds,
        ))
    }

    fn rate(
        &self,
        state: &UnicycleState,
        control: &ControlInput,
        t: f64,
        ctx: &PlanContext<'_>,
    ) -> Result<f64> {
        if control.speed() == 0.0 {
            return Ok(0.0);
        }
        let disks = self.disks_at(t, ctx)?;
        Ok(li_v_sup(
            state,
            control,
            &disks,
            ctx.trigger.boundary_samples,
        ))
    }

    fn step_once(&mut self, ctx: &PlanContext<'_>) -> Result<()> {
        let h = ctx.trigger.scan_step;
        let k = self.steps_done;
        let t_a = self.t_last + k as f64 * h;
        let t_b = self.t_last + (k + 1) as f64 * h;
        let last = *self.segments.last().expect("plan has a segment");
        let state_a = step_unicycle(&last.state0, &last.control, t_a - last.t0);
        let u = self.control_at_grid(&state_a, t_a, ctx)?;

        if self.t_star.is_some() {
            self.push(t_a, state_a, u.hold_position());
        } else if self.rate(&state_a, &u, t_a, ctx)? > 0.0 {
            self.t_star = Some(t_a);
            self.push(t_a, state_a, u.hold_position());
        } else {
            let t_m = 0.5 * (t_a + t_b);
            let mut lo = t_a;
            let mut hi = None;
            for t in [t_m, t_b] {
                let s = step_unicycle(&state_a, &u, t - t_a);
                if self.rate(&s, &u, t, ctx)? > 0.0 {
                    hi = Some(t);
                    break;
                }
                lo = t;
            }
            self.push(t_a, state_a, u);
            if let Some(mut hi) = hi {
                while hi - lo > ctx.trigger.bisection_tol {
                    let mid = 0.5 * (lo + hi);
                    let s = step_unicycle(&state_a, &u, mid - t_a);
                    if self.rate(&s, &u, mid, ctx)? > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.t_star = Some(lo);
                self.push(lo, step_unicycle(&state_a, &u, lo - t_a), u.hold_position());
            } else if k + 1 >= self.cap_steps {
                self.t_star = Some(t_b);
            }
        }
        self.steps_done += 1;
        self.computed_to = t_b;
        Ok(())
    }

    fn push(&mut self, t0: f64, state0: UnicycleState, control: ControlInput) {
        let last = self.segments.last_mut().expect("plan has a segment");
        if last.t0 == t0 {
            *last = Segment {
                t0,
                state0,
                control,
            };
        } else {
            self.segments.push(Segment {
                t0,
                state0,
                control,
            });
        }
    }

    fn segment_at(&self, t: f64) -> &Segment {
        debug_assert!(
            t <= self.computed_to + 1e-12,
            "plan queried past its computed range"
        );
        let idx = self.segments.partition_point(|s| s.t0 <= t);
        &self.segments[idx.saturating_sub(1)]
    }

    /// Own state at `t` (which must lie within the computed range).
    pub fn state_at(&self, t: f64) -> UnicycleState {
        let s = self.segment_at(t);
        step_unicycle(&s.state0, &s.control, (t - s.t0).max(0.0))
    }

    /// True once `t` has reached the critical time.
    pub fn in_safe_mode(&self, t: f64) -> bool {
        self.t_star.is_some_and(|ts| t >= ts)
    }

    /// Control applied at `t`.
    pub fn control_at(&self, t: f64) -> ControlInput {
        self.segment_at(t).control
    }

    /// Drops segments that end before `t` to bound memory on long plans.
    pub fn forget_before(&mut self, t: f64) {
        let idx = self.segments.partition_point(|s| s.t0 <= t);
        if idx > 1 {
            self.segments.drain(..idx - 1);
        }
    }
}

/// Solves the critical time from `t_last` with information `sets` and
/// returns it with the request schedule implied by `dwell`.
#[allow(clippy::too_many_arguments)]
pub fn critical_time<S: NeighborSet>(
    agent: usize,
    own: UnicycleState,
    sets: Vec<S>,
    t_last: SimTime,
    dwell: f64,
    horizon: f64,
    ctx: &PlanContext<'_>,
) -> Result<TriggerVerdict> {
    let mut plan = ControlPlan::new(agent, own, sets, t_last, horizon, ctx.trigger);
    let t_star = plan.resolve(ctx)?;
    Ok(TriggerVerdict::new(t_star, t_last, dwell))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BreachAction {
    SendPromiseNow,
    /// Warn now; the replacement promise goes out at the given time.
    WarnThenPromiseAt(SimTime),
}

/// Issuer reaction to a broken promise last sent at `t_sent`. A replacement
/// goes out one event dwell after the warning, so warnings to the same
/// neighbor are themselves spaced by the dwell.
pub fn event_breach_action(t: SimTime, t_sent: SimTime, t_d_event: f64) -> BreachAction {
    // tolerance absorbs rounding in grid times like k·Δt
    if t.since(t_sent) >= t_d_event - 1e-12 {
        BreachAction::SendPromiseNow
    } else {
        BreachAction::WarnThenPromiseAt(t + t_d_event)
    }
}

/// Adaptive dwell time `max{δ_d · Σ_j gap_j / (|N(i)| gap_i), Δ_d}`, capped
/// at `10 Δ_d`; the cap is also returned when the own gap vanishes.
pub fn adaptive_dwell(own_gap: f64, neighbor_gaps: &[f64], scale: f64, floor: f64) -> f64 {
    let cap = ADAPTIVE_DWELL_CAP_FACTOR * floor;
    if own_gap <= ADAPTIVE_GAP_EPSILON || neighbor_gaps.is_empty() {
        return cap;
    }
    let mean_ratio = neighbor_gaps.iter().sum::<f64>() / (neighbor_gaps.len() as f64 * own_gap);
    (scale * mean_ratio).max(floor).min(cap)
}
