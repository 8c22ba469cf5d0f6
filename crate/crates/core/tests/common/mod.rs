//! Independent reference computations used by the integration tests.
//! Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ttlab::model::{
    step_unicycle, ControlBounds, ControlInput, DiskSet, SimTime, UnicycleState, Vec2,
};

/// Classical RK4 on the unicycle ODE under a constant control.
pub fn rk4_unicycle(
    state: &UnicycleState,
    control: &ControlInput,
    horizon: f64,
    steps: usize,
) -> (f64, f64, f64) {
    let f = |s: [f64; 3]| {
        [
            control.speed() * s[2].cos(),
            control.speed() * s[2].sin(),
            control.turn_rate(),
        ]
    };
    let mut s = [state.position.x, state.position.y, state.heading];
    let h = horizon / steps as f64;
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f(add(s, k1, h / 2.0));
        let k3 = f(add(s, k2, h / 2.0));
        let k4 = f(add(s, k3, h));
        for c in 0..3 {
            s[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    (s[0], s[1], s[2])
}

fn add(s: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// `Σ_{edges} (‖x_i − x_j‖² − d²)²` straight from the definition.
pub fn v_reference(positions: &[(f64, f64)], edges: &[(usize, usize, f64)]) -> f64 {
    edges
        .iter()
        .map(|&(i, j, d)| {
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            let e = dx * dx + dy * dy - d * d;
            e * e
        })
        .sum()
}

/// Central finite difference of `v_reference` with respect to agent `i`.
pub fn fd_gradient(
    positions: &[(f64, f64)],
    edges: &[(usize, usize, f64)],
    i: usize,
    h: f64,
) -> (f64, f64) {
    let shifted = |dx: f64, dy: f64| {
        let mut p = positions.to_vec();
        p[i].0 += dx;
        p[i].1 += dy;
        v_reference(&p, edges)
    };
    (
        (shifted(h, 0.0) - shifted(-h, 0.0)) / (2.0 * h),
        (shifted(0.0, h) - shifted(0.0, -h)) / (2.0 * h),
    )
}

/// Rate contribution `4(‖x−y‖² − d²)(x−y)·w` of one neighbor.
pub fn edge_rate_reference(x: (f64, f64), y: (f64, f64), d: f64, w: (f64, f64)) -> f64 {
    let (dx, dy) = (x.0 - y.0, x.1 - y.1);
    4.0 * (dx * dx + dy * dy - d * d) * (dx * w.0 + dy * w.1)
}

/// Maximum of the edge rate over a dense polar grid covering the disk
/// (including its boundary).
pub fn dense_grid_sup(
    x: (f64, f64),
    w: (f64, f64),
    disk: &DiskSet,
    d: f64,
    rings: usize,
    spokes: usize,
) -> f64 {
    let c = (disk.center.x, disk.center.y);
    let mut best = edge_rate_reference(x, c, d, w);
    for k in 1..=rings {
        let r = disk.radius() * k as f64 / rings as f64;
        for m in 0..spokes {
            let phi = std::f64::consts::TAU * m as f64 / spokes as f64;
            let y = (c.0 + r * phi.cos(), c.1 + r * phi.sin());
            best = best.max(edge_rate_reference(x, y, d, w));
        }
    }
    best
}

/// Uniform point in the disk of radius `r` around `c` from two uniforms.
pub fn point_in_disk(c: Vec2, r: f64, a: f64, b: f64) -> Vec2 {
    let rho = r * a.sqrt();
    let phi = std::f64::consts::TAU * b;
    c + Vec2::new(rho * phi.cos(), rho * phi.sin())
}

/// Smallest gap (in ticks) between consecutive self-triggered requests of one agent.
pub fn min_request_gap(run: &ttlab::engine::RunOutput) -> Option<u64> {
    let n = run.config.agent_count();
    let mut last: Vec<Option<u64>> = vec![None; n];
    let mut best: Option<u64> = None;
    for r in &run.requests {
        if let Some(prev) = last[r.agent] {
            let gap = r.tick - prev;
            best = Some(best.map_or(gap, |b| b.min(gap)));
        }
        last[r.agent] = Some(r.tick);
    }
    best
}

/// Largest number of event messages on one ordered pair within any window
/// of `window` ticks (half-open).
pub fn max_events_per_window(run: &ttlab::engine::RunOutput, window: u64) -> usize {
    use std::collections::BTreeMap;
    let mut per_pair: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
    for m in &run.event_messages {
        per_pair
            .entry((m.sender, m.receiver))
            .or_default()
            .push(m.tick);
    }
    let mut worst = 0;
    for ticks in per_pair.values_mut() {
        ticks.sort_unstable();
        let mut lo = 0;
        for hi in 0..ticks.len() {
            while ticks[hi] - ticks[lo] >= window {
                lo += 1;
            }
            worst = worst.max(hi - lo + 1);
        }
    }
    worst
}

/// Positions of the 2 × 1 rectangle the four-agent scenario converges to.
pub fn rectangle_positions() -> [(f64, f64); 4] {
    [(0.0, 0.0), (0.0, 2.0), (1.0, 2.0), (1.0, 0.0)]
}

pub fn bounds() -> ControlBounds {
    ControlBounds::new(5.0, 3.0).unwrap()
}

pub fn t(s: f64) -> SimTime {
    SimTime::new(s).unwrap()
}

pub fn random_state(rng: &mut impl Rng) -> UnicycleState {
    UnicycleState::new(
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-3.1..3.1),
    )
}

pub fn random_control(rng: &mut impl Rng, b: &ControlBounds) -> ControlInput {
    b.control(
        rng.random_range(0.0..=b.u_max),
        rng.random_range(-b.v_max..=b.v_max),
    )
    .unwrap()
}

/// A control within `radius` of `anchor` (Euclidean in (speed, turn)), clamped to the bounds.
pub fn control_near(
    rng: &mut impl Rng,
    anchor: &ControlInput,
    radius: f64,
    b: &ControlBounds,
) -> ControlInput {
    let p = point_in_disk(anchor.as_vector(), radius, rng.random(), rng.random());
    b.clamp(p.x, p.y)
}

/// Piecewise-constant trajectory with random switching, returning the state at `horizon`.
pub fn drive(
    rng: &mut impl Rng,
    start: &UnicycleState,
    horizon: f64,
    mut pick: impl FnMut(&mut ChaCha8Rng) -> ControlInput,
    inner: &mut ChaCha8Rng,
) -> UnicycleState {
    let mut s = *start;
    let mut elapsed = 0.0;
    while elapsed < horizon {
        let dt = rng.random_range(0.0..0.2f64).min(horizon - elapsed);
        s = step_unicycle(&s, &pick(inner), dt);
        elapsed += dt;
    }
    s
}
