//! Formation controller `u*`, the estimate-based controller `u**` built on
//! the E map, and the switched team controller.

use crate::error::{Error, Result};
use crate::formation::FormationSpec;
use crate::model::{
    normalize_angle, reachable_disk, step_unicycle, ControlBounds, ControlInput, DiskSet, SimTime,
    UnicycleState, Vec2,
};
use crate::promises::{promise_set_at, Promise, PromiseMode};

/// Set-valued information an agent holds about one neighbor.
pub trait NeighborSet {
    /// A disk guaranteed to contain the neighbor's position at `t`.
    fn disk_at(&self, t: SimTime) -> Result<DiskSet>;
    /// The E-map selection: a single point of `disk_at(t)`.
    fn estimate_at(&self, t: SimTime) -> Result<Vec2>;
}

impl NeighborSet for Promise {
    /// Past its expiration a ball-radius promise degrades to the reachability
    /// union of its last valid disk, exactly like a warning fallback.
    fn disk_at(&self, t: SimTime) -> Result<DiskSet> {
        match (self.mode, self.expires_at) {
            (PromiseMode::BallRadius, Some(e)) if t > e => {
                Ok(promise_set_at(self, e)?.inflate(self.speed_limit * t.since(e)))
            }
            _ => promise_set_at(self, t),
        }
    }

    fn estimate_at(&self, t: SimTime) -> Result<Vec2> {
        match self.mode {
            PromiseMode::BallRadius if !self.expires_at.is_some_and(|e| t > e) => {
                if t < self.issued_at {
                    return Err(Error::PromiseNotYetValid {
                        issuer: self.issuer.index(),
                        at: t,
                        valid_from: self.issued_at,
                    });
                }
                Ok(self.zoh_position(t))
            }
            PromiseMode::Expired => Err(Error::PromiseExpired {
                issuer: self.issuer.index(),
                recipient: self.recipient.index(),
            }),
            // fallback or lapsed promise: the disk center
            _ => Ok(self.disk_at(t)?.center),
        }
    }
}

/// Guaranteed set from a state sample: reachability from the sampled state,
/// with the sampled control held for the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteedSet {
    pub state: UnicycleState,
    pub control: ControlInput,
    pub sampled_at: SimTime,
    pub u_max: f64,
}

impl NeighborSet for GuaranteedSet {
    fn disk_at(&self, t: SimTime) -> Result<DiskSet> {
        if t < self.sampled_at {
            return Err(Error::PromiseNotYetValid {
                issuer: usize::MAX,
                at: t,
                valid_from: self.sampled_at,
            });
        }
        Ok(reachable_disk(
            &self.state,
            t.since(self.sampled_at),
            self.u_max,
        ))
    }

    fn estimate_at(&self, t: SimTime) -> Result<Vec2> {
        let tau = t.since(self.sampled_at);
        if tau < 0.0 {
            return self.disk_at(t).map(|d| d.center);
        }
        Ok(step_unicycle(&self.state, &self.control, tau).position)
    }
}

/// Agent `i`'s information: its exact state plus one set per neighbor, in
/// `CommGraph::neighbors(i)` order.
#[derive(Debug, Clone)]
pub struct NeighborView<S> {
    pub agent: usize,
    pub own: UnicycleState,
    pub neighbors: Vec<S>,
}

/// Goal point `p_i = x_i + Σ_j (‖x_j − x_i‖ − d_ij) · unit(x_j − x_i)`.
/// Returns the point and whether some neighbor coincided with `own` (that
/// edge then contributes nothing).
pub fn goal_from(own: &Vec2, neighbors: impl IntoIterator<Item = (Vec2, f64)>) -> (Vec2, bool) {
    let mut goal = *own;
    let mut degenerate = false;
    for (y, d) in neighbors {
        let diff = y - own;
        let dist = diff.norm();
        if dist == 0.0 {
            degenerate = true;
            continue;
        }
        goal += (dist - d) * (diff / dist);
    }
    (goal, degenerate)
}

pub fn goal_point(i: usize, positions: &[Vec2], spec: &FormationSpec) -> (Vec2, bool) {
    goal_from(
        &positions[i],
        spec.neighbor_distances(i)
            .iter()
            .map(|&(j, d)| (positions[j], d)),
    )
}

/// Unicycle tracking law toward `goal`: speed from the heading projection,
/// turn rate from the wrapped bearing error, both scaled by `gain` and clamped.
pub fn control_toward(
    own: &UnicycleState,
    goal: &Vec2,
    gain: f64,
    bounds: &ControlBounds,
) -> ControlInput {
    let offset = goal - own.position;
    if offset.x == 0.0 && offset.y == 0.0 {
        return ControlInput::ZERO;
    }
    let speed = gain * own.direction().dot(&offset);
    let bearing = normalize_angle(offset.y.atan2(offset.x) - own.heading);
    bounds.clamp(speed, gain * bearing)
}

/// `u*` on exact positions.
pub fn u_star(
    i: usize,
    positions: &[Vec2],
    heading: f64,
    spec: &FormationSpec,
    bounds: &ControlBounds,
) -> ControlInput {
    let (goal, degenerate) = goal_point(i, positions, spec);
    if degenerate {
        log::warn!("agent {i}: neighbor coincides with own position; edge ignored in goal point");
    }
    let own = UnicycleState {
        position: positions[i],
        heading,
    };
    control_toward(&own, &goal, spec.gain(), bounds)
}

/// E map: one representative point per neighbor at `t`.
pub fn e_map<S: NeighborSet>(view: &NeighborView<S>, t: SimTime) -> Result<Vec<Vec2>> {
    view.neighbors.iter().map(|s| s.estimate_at(t)).collect()
}

/// `u**`: `u*` evaluated at the own exact state and the E-map estimates.
pub fn u_double_star<S: NeighborSet>(
    view: &NeighborView<S>,
    t: SimTime,
    spec: &FormationSpec,
    bounds: &ControlBounds,
) -> Result<ControlInput> {
    let estimates = e_map(view, t)?;
    Ok(control_from_estimates(
        view.agent, &view.own, &estimates, spec, bounds,
    ))
}

/// `u*` from the own state and neighbor estimates aligned with the neighbor list.
pub fn control_from_estimates(
    i: usize,
    own: &UnicycleState,
    estimates: &[Vec2],
    spec: &FormationSpec,
    bounds: &ControlBounds,
) -> ControlInput {
    let table = spec.neighbor_distances(i);
    debug_assert_eq!(table.len(), estimates.len());
    let (goal, degenerate) = goal_from(
        &own.position,
        estimates.iter().zip(table).map(|(y, &(_, d))| (*y, d)),
    );
    if degenerate {
        log::warn!(
            "agent {i}: neighbor estimate coincides with own position; edge ignored in goal point"
        );
    }
    control_toward(own, &goal, spec.gain(), bounds)
}

/// Switched controller: `u**` up to and including the critical time, then
/// zero forward speed. The turn rate of `u**` is kept so the agent keeps
/// rotating in place toward its goal while it holds position.
pub fn team_control(u_double_star: &ControlInput, t: SimTime, t_star: SimTime) -> ControlInput {
    if t <= t_star {
        *u_double_star
    } else {
        u_double_star.hold_position()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentId, CommGraph};
    use crate::promises::{make_promise, PromiseRuleConfig};
    use std::f64::consts::PI;

    fn bounds() -> ControlBounds {
        ControlBounds::new(5.0, 3.0).unwrap()
    }

    #[test]
    fn goal_point_single_neighbor() {
        let (g, deg) = goal_from(&Vec2::new(0.0, 0.0), [(Vec2::new(2.0, 0.0), 1.0)]);
        assert_eq!(g, Vec2::new(1.0, 0.0));
        assert!(!deg);
        let (g, deg) = goal_from(&Vec2::new(1.0, 1.0), [(Vec2::new(1.0, 1.0), 1.0)]);
        assert_eq!(g, Vec2::new(1.0, 1.0));
        assert!(deg);
    }

    #[test]
    fn goal_at_formation_is_own_position() {
        let g = CommGraph::complete_minus(4, &[(0, 2)]).unwrap();
        let spec = FormationSpec::rectangle(&g, 150.0).unwrap();
        let rect = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        for i in 0..4 {
            let (p, _) = goal_point(i, &rect, &spec);
            assert!((p - rect[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn tracking_law_clamps() {
        let b = bounds();
        let own = UnicycleState::new(0.0, 0.0, 0.0);
        assert_eq!(
            control_toward(&own, &Vec2::new(0.0, 0.0), 150.0, &b),
            ControlInput::ZERO
        );
        let ahead = control_toward(&own, &Vec2::new(1.0, 0.0), 150.0, &b);
        assert_eq!((ahead.speed(), ahead.turn_rate()), (5.0, 0.0));
        // straight behind: bearing error wraps to +π, so the turn saturates positive
        let behind = control_toward(&own, &Vec2::new(-1.0, 0.0), 150.0, &b);
        assert_eq!((behind.speed(), behind.turn_rate()), (0.0, 3.0));
        let left = control_toward(
            &UnicycleState::new(0.0, 0.0, PI / 2.0),
            &Vec2::new(0.0, -1.0),
            150.0,
            &b,
        );
        assert_eq!(left.turn_rate(), 3.0);
    }

    #[test]
    fn team_control_branches() {
        let u = bounds().control(4.0, -1.5).unwrap();
        let t_star = SimTime::new(1.0).unwrap();
        assert_eq!(team_control(&u, SimTime::new(0.5).unwrap(), t_star), u);
        assert_eq!(team_control(&u, t_star, t_star), u);
        let after = team_control(&u, SimTime::new(1.0 + 1e-9).unwrap(), t_star);
        assert_eq!(after.speed(), 0.0);
        assert_eq!(after.turn_rate(), -1.5);
    }

    #[test]
    fn e_map_at_issue_and_on_fallback() {
        let b = bounds();
        let t0 = SimTime::new(2.0).unwrap();
        let p = make_promise(
            &PromiseRuleConfig::static_ball(0.3),
            AgentId(1),
            AgentId(0),
            &UnicycleState::new(3.0, 4.0, 0.2),
            &b.control(2.0, 1.0).unwrap(),
            t0,
            &b,
        );
        assert_eq!(p.estimate_at(t0).unwrap(), Vec2::new(3.0, 4.0));
        let t1 = SimTime::new(2.4).unwrap();
        let f = crate::promises::fallback_to_reachability(&p, SimTime::new(2.1).unwrap()).unwrap();
        assert_eq!(f.estimate_at(t1).unwrap(), f.disk_at(t1).unwrap().center);
        assert!(p.expire().estimate_at(t1).is_err());
    }

    #[test]
    fn lapsed_promise_degrades_to_reachability() {
        let b = bounds();
        let mut cfg = PromiseRuleConfig::static_ball(0.1);
        cfg.expiration = Some(0.5);
        let t0 = SimTime::new(1.0).unwrap();
        let p = make_promise(
            &cfg,
            AgentId(0),
            AgentId(1),
            &UnicycleState::new(0.0, 0.0, 0.0),
            &b.control(3.0, 0.0).unwrap(),
            t0,
            &b,
        );
        let e = SimTime::new(1.5).unwrap();
        let at_e = p.disk_at(e).unwrap();
        let later = p.disk_at(SimTime::new(1.7).unwrap()).unwrap();
        assert_eq!(later.center, at_e.center);
        assert!((later.radius() - at_e.radius() - 1.0).abs() < 1e-12);
    }
}
