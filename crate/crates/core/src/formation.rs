//! Formation objective: desired inter-agent distances, the rigidity
//! potential `V` and its per-agent gradient.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{CommGraph, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    gain: f64,
    distances: BTreeMap<(usize, usize), f64>,
    /// `(neighbor, d_ij)` aligned with `CommGraph::neighbors(i)`.
    table: Vec<Vec<(usize, f64)>>,
}

impl FormationSpec {
    /// `distances` must cover every edge of `graph` exactly once (either orientation).
    pub fn new(graph: &CommGraph, gain: f64, distances: &[((usize, usize), f64)]) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidFormation(format!(
                "gain must be positive, got {gain}"
            )));
        }
        let mut map = BTreeMap::new();
        for &((i, j), d) in distances {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidFormation(format!(
                    "distance for ({i}, {j}) must be positive, got {d}"
                )));
            }
            if !graph.has_edge(i, j) {
                return Err(Error::InvalidFormation(format!(
                    "({i}, {j}) is not an edge"
                )));
            }
            if map.insert((i.min(j), i.max(j)), d).is_some() {
                return Err(Error::InvalidFormation(format!(
                    "distance for ({i}, {j}) given twice"
                )));
            }
        }
        for (i, j) in graph.edges() {
            if !map.contains_key(&(i, j)) {
                return Err(Error::InvalidFormation(format!(
                    "missing distance for edge ({i}, {j})"
                )));
            }
        }
        let table = (0..graph.agent_count())
            .map(|i| {
                graph
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, map[&(i.min(j), i.max(j))]))
                    .collect()
            })
            .collect();
        Ok(Self {
            gain,
            distances: map,
            table,
        })
    }

    /// Rectangle with sides 2 (0–1, 2–3) and 1 (1–2, 0–3) and the 1–3
    /// diagonal √5, on the complete graph missing 0–2.
    pub fn rectangle(graph: &CommGraph, gain: f64) -> Result<Self> {
        Self::new(
            graph,
            gain,
            &[
                ((0, 1), 2.0),
                ((2, 3), 2.0),
                ((1, 2), 1.0),
                ((0, 3), 1.0),
                ((1, 3), 5f64.sqrt()),
            ],
        )
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        self.distances.get(&(i.min(j), i.max(j))).copied()
    }

    /// Unordered edges with their desired distances.
    pub fn edge_distances(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.distances.iter().map(|(&e, &d)| (e, d))
    }

    /// `(neighbor, d_ij)` pairs for agent `i`, in neighbor order.
    pub fn neighbor_distances(&self, i: usize) -> &[(usize, f64)] {
        &self.table[i]
    }
}

/// `V(x) = Σ_{unordered (i,j) ∈ E} (‖x_j − x_i‖² − d_ij²)²`, i.e. one half of
/// the sum over ordered pairs.
pub fn lyapunov(positions: &[Vec2], spec: &FormationSpec) -> f64 {
    spec.edge_distances()
        .map(|((i, j), d)| {
            let e = (positions[j] - positions[i]).norm_squared() - d * d;
            e * e
        })
        .sum()
}

/// Contribution of edge (i, j) to `∇_i V`: `4 (‖x_i − y‖² − d²)(x_i − y)`.
#[inline]
pub fn edge_gradient(own: &Vec2, neighbor: &Vec2, desired: f64) -> Vec2 {
    let diff = own - neighbor;
    4.0 * (diff.norm_squared() - desired * desired) * diff
}

/// `∇_i V`, which only involves `x_i` and the positions of i's neighbors.
pub fn lyapunov_gradient(i: usize, positions: &[Vec2], spec: &FormationSpec) -> Vec2 {
    spec.neighbor_distances(i)
        .iter()
        .fold(Vec2::zeros(), |acc, &(j, d)| {
            acc + edge_gradient(&positions[i], &positions[j], d)
        })
}

/// Edge distance divided by its desired value, per unordered edge.
pub fn edge_ratios(positions: &[Vec2], spec: &FormationSpec) -> Vec<((usize, usize), f64)> {
    spec.edge_distances()
        .map(|((i, j), d)| ((i, j), (positions[j] - positions[i]).norm() / d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rectangle_graph() -> CommGraph {
        CommGraph::complete_minus(4, &[(0, 2)]).unwrap()
    }

    #[test]
    fn zero_on_desired_rectangle() {
        let g = rectangle_graph();
        let spec = FormationSpec::rectangle(&g, 150.0).unwrap();
        let rect = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(lyapunov(&rect, &spec).abs() < 1e-24);
        for i in 0..4 {
            assert!(lyapunov_gradient(i, &rect, &spec).norm() < 1e-12);
        }
    }

    #[test]
    fn two_agent_value_and_sign() {
        let g = CommGraph::new(2, &[(0, 1)]).unwrap();
        let spec = FormationSpec::new(&g, 1.0, &[((0, 1), 1.0)]).unwrap();
        let x = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0)];
        assert_eq!(lyapunov(&x, &spec), 9.0);
        // spreading apart increases V, so the gradient at agent 0 points away from agent 1
        let grad = lyapunov_gradient(0, &x, &spec);
        assert!(grad.x < 0.0 && grad.y == 0.0);
        assert_eq!(grad, Vec2::new(-24.0, 0.0));
    }

    #[test]
    fn spec_validation() {
        let g = rectangle_graph();
        assert!(FormationSpec::new(&g, 1.0, &[((0, 1), 1.0)]).is_err());
        assert!(FormationSpec::new(&g, 0.0, &[]).is_err());
        let mut d: Vec<_> = FormationSpec::rectangle(&g, 1.0)
            .unwrap()
            .edge_distances()
            .collect();
        d.push(((0, 2), 1.0));
        assert!(FormationSpec::new(&g, 1.0, &d).is_err());
        let spec = FormationSpec::rectangle(&g, 1.0).unwrap();
        assert_eq!(spec.distance(1, 0), spec.distance(0, 1));
        assert_eq!(spec.distance(0, 2), None);
    }
}
