//! Physical agent model: time, identities, unicycle dynamics, control
//! bounds, the communication graph and the disk sets used for every
//! reachability over-approximation.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Below this turn rate (rad/s) the unicycle is integrated as a straight line.
pub const ARC_EPSILON: f64 = 1e-9;

/// Simulation time in seconds. Totally ordered through `f64::total_cmp`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(SimTime(seconds))
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid simulation time {seconds}"
            )))
        }
    }

    /// Caller guarantees `seconds` is finite and nonnegative.
    pub(crate) const fn from_secs(seconds: f64) -> Self {
        SimTime(seconds)
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    /// Seconds elapsed since `earlier` (negative if `earlier` is later).
    pub fn since(self, earlier: SimTime) -> f64 {
        self.0 - earlier.0
    }

    pub fn max(self, other: SimTime) -> SimTime {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: SimTime) -> SimTime {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: f64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;
    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wraps an angle into (−π, π]; an input of ±π maps to +π.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnicycleState {
    pub position: Vec2,
    /// Radians in (−π, π].
    pub heading: f64,
}

impl UnicycleState {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.heading.cos(), self.heading.sin())
    }
}

/// Actuation limits: `0 ≤ speed ≤ u_max`, `|turn_rate| ≤ v_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub u_max: f64,
    pub v_max: f64,
}

impl ControlBounds {
    pub fn new(u_max: f64, v_max: f64) -> Result<Self> {
        if !(u_max.is_finite() && u_max > 0.0 && v_max.is_finite() && v_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "control bounds must be positive and finite, got u_max={u_max}, v_max={v_max}"
            )));
        }
        Ok(Self { u_max, v_max })
    }

    pub fn control(&self, speed: f64, turn_rate: f64) -> Result<ControlInput> {
        ControlInput::new(speed, turn_rate, self)
    }

    /// Projects an arbitrary (speed, turn) pair onto the admissible box.
    pub fn clamp(&self, speed: f64, turn_rate: f64) -> ControlInput {
        ControlInput {
            speed: speed.clamp(0.0, self.u_max),
            turn_rate: turn_rate.clamp(-self.v_max, self.v_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    speed: f64,
    turn_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        speed: 0.0,
        turn_rate: 0.0,
    };

    pub fn new(speed: f64, turn_rate: f64, bounds: &ControlBounds) -> Result<Self> {
        let ok = speed.is_finite()
            && turn_rate.is_finite()
            && (0.0..=bounds.u_max).contains(&speed)
            && turn_rate.abs() <= bounds.v_max;
        if !ok {
            return Err(Error::ControlOutOfBounds {
                speed,
                turn_rate,
                u_max: bounds.u_max,
                v_max: bounds.v_max,
            });
        }
        Ok(Self { speed, turn_rate })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn turn_rate(&self) -> f64 {
        self.turn_rate
    }

    /// The control as the 2-vector (speed, turn_rate).
    pub fn as_vector(&self) -> Vec2 {
        Vec2::new(self.speed, self.turn_rate)
    }

    /// Same turn rate, zero forward speed: the position stays fixed while
    /// the heading keeps rotating.
    pub fn hold_position(&self) -> ControlInput {
        ControlInput {
            speed: 0.0,
            turn_rate: self.turn_rate,
        }
    }
}

/// Exact integration of the unicycle under a constant control for `dt` seconds.
pub fn step_unicycle(state: &UnicycleState, control: &ControlInput, dt: f64) -> UnicycleState {
    debug_assert!(dt >= 0.0);
    let u = control.speed;
    let v = control.turn_rate;
    let theta = state.heading;
    let position = if u == 0.0 {
        state.position
    } else if v.abs() > ARC_EPSILON {
        // chord of the circular arc, written to avoid cancellation in sin(θ+vt) − sin(θ)
        let half = 0.5 * v * dt;
        let chord = 2.0 * u / v * half.sin();
        let mid = theta + half;
        state.position + chord * Vec2::new(mid.cos(), mid.sin())
    } else {
        state.position + u * dt * Vec2::new(theta.cos(), theta.sin())
    };
    UnicycleState {
        position,
        heading: normalize_angle(theta + v * dt),
    }
}

/// The control that keeps an agent's state fixed.
pub fn safe_mode(_state: &UnicycleState) -> ControlInput {
    ControlInput::ZERO
}

/// Disk centered at the current position with radius `u_max · horizon`:
/// every position reachable under admissible controls lies inside.
pub fn reachable_disk(state: &UnicycleState, horizon: f64, u_max: f64) -> DiskSet {
    DiskSet::from_parts(state.position, u_max * horizon.max(0.0))
}

/// Minimal dynamics contract shared by the agent models.
pub trait AgentDynamics {
    type State;
    type Control;

    fn step(&self, state: &Self::State, control: &Self::Control, dt: f64) -> Self::State;
    fn safe_mode(&self, state: &Self::State) -> Self::Control;
    fn position(&self, state: &Self::State) -> Vec2;
    /// Radius of a disk around the current position containing the reachable set.
    fn reach_radius(&self, horizon: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Unicycle {
    pub bounds: ControlBounds,
}

impl AgentDynamics for Unicycle {
    type State = UnicycleState;
    type Control = ControlInput;

    fn step(&self, state: &UnicycleState, control: &ControlInput, dt: f64) -> UnicycleState {
        step_unicycle(state, control, dt)
    }

    fn safe_mode(&self, state: &UnicycleState) -> ControlInput {
        safe_mode(state)
    }

    fn position(&self, state: &UnicycleState) -> Vec2 {
        state.position
    }

    fn reach_radius(&self, horizon: f64) -> f64 {
        self.bounds.u_max * horizon
    }
}

/// `ẋ = u` with `‖u‖ ≤ u_max`; the linear instance of the dynamics contract.
#[derive(Debug, Clone, Copy)]
pub struct SingleIntegrator {
    pub u_max: f64,
}

impl AgentDynamics for SingleIntegrator {
    type State = Vec2;
    type Control = Vec2;

    fn step(&self, state: &Vec2, control: &Vec2, dt: f64) -> Vec2 {
        state + control * dt
    }

    fn safe_mode(&self, _state: &Vec2) -> Vec2 {
        Vec2::zeros()
    }

    fn position(&self, state: &Vec2) -> Vec2 {
        *state
    }

    fn reach_radius(&self, horizon: f64) -> f64 {
        self.u_max * horizon
    }
}

/// Undirected graph without self-loops; neighbor lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    neighbors: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn new(agent_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if agent_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one agent".into()));
        }
        let mut sets = vec![BTreeSet::new(); agent_count];
        for &(i, j) in edges {
            if i >= agent_count || j >= agent_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references an agent outside 0..{agent_count}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at agent {i}")));
            }
            if !sets[i].insert(j) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
            sets[j].insert(i);
        }
        Ok(Self {
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Complete graph on `n` vertices minus the listed unordered pairs.
    pub fn complete_minus(n: usize, missing: &[(usize, usize)]) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if !missing
                    .iter()
                    .any(|&(a, b)| (a, b) == (i, j) || (b, a) == (i, j))
                {
                    edges.push((i, j));
                }
            }
        }
        Self::new(n, &edges)
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors
            .get(i)
            .is_some_and(|n| n.binary_search(&j).is_ok())
    }

    /// Position of `j` within `neighbors(i)`.
    pub fn neighbor_slot(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors[i].binary_search(&j).ok()
    }

    /// Unordered edges `(i, j)` with `i < j`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}

/// Closed disk; radius 0 is a singleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskSet {
    pub center: Vec2,
    radius: f64,
}

impl DiskSet {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid disk radius {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub(crate) fn from_parts(center: Vec2, radius: f64) -> Self {
        debug_assert!(radius >= 0.0);
        Self { center, radius }
    }

    pub fn singleton(point: Vec2) -> Self {
        Self {
            center: point,
            radius: 0.0,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_singleton(&self) -> bool {
        self.radius == 0.0
    }

    pub fn contains(&self, point: &Vec2, slack: f64) -> bool {
        (point - self.center).norm() <= self.radius + slack
    }

    /// `self ⊆ other` up to `slack`.
    pub fn is_subset_of(&self, other: &DiskSet, slack: f64) -> bool {
        (self.center - other.center).norm() + self.radius <= other.radius + slack
    }

    pub fn inflate(&self, by: f64) -> DiskSet {
        DiskSet::from_parts(self.center, (self.radius + by).max(0.0))
    }

    /// A disk containing `self ∩ bound` that is itself inside `bound`:
    /// `self` when it fits, otherwise `bound`. Monotone in `self`.
    pub fn clip_to(&self, bound: &DiskSet) -> DiskSet {
        if self.is_subset_of(bound, 0.0) {
            *self
        } else {
            *bound
        }
    }
}
