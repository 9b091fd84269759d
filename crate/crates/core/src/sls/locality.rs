use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::SupportMask;

/// Per-component support constraints on `Phi_x` (n x n) and `Phi_u`
/// (n_u x n).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityConstraint {
    x_masks: Vec<SupportMask>,
    u_masks: Vec<SupportMask>,
    /// Radius in hops the masks were built from, if any.
    pub d: Option<usize>,
}

impl LocalityConstraint {
    pub fn new(x_masks: Vec<SupportMask>, u_masks: Vec<SupportMask>) -> Result<Self> {
        if x_masks.is_empty() || x_masks.len() != u_masks.len() {
            return Err(Error::dims(format!(
                "{} state masks and {} input masks",
                x_masks.len(),
                u_masks.len()
            )));
        }
        let (n, n2) = x_masks[0].shape();
        if n != n2 {
            return Err(Error::dims("state masks must be square".to_string()));
        }
        let nu = u_masks[0].rows();
        if x_masks.iter().any(|m| m.shape() != (n, n))
            || u_masks.iter().any(|m| m.shape() != (nu, n))
        {
            return Err(Error::dims("masks change shape across components".to_string()));
        }
        Ok(Self {
            x_masks,
            u_masks,
            d: None,
        })
    }

    /// No spatial constraint, only the FIR horizon.
    pub fn full(n: usize, nu: usize, horizon: usize) -> Self {
        Self {
            x_masks: vec![SupportMask::full(n, n); horizon],
            u_masks: vec![SupportMask::full(nu, n); horizon],
            d: None,
        }
    }

    /// Time-uniform masks from hop distances: `Phi_x(i, j)` is allowed when
    /// `state_dist[i][j] <= d`, `Phi_u(a, j)` when `actuator_dist[a][j] <= d`.
    pub fn from_distances(
        state_dist: &[Vec<Option<usize>>],
        actuator_dist: &[Vec<Option<usize>>],
        d: usize,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("FIR horizon must be positive"));
        }
        let n = state_dist.len();
        if state_dist.iter().any(|r| r.len() != n) || actuator_dist.iter().any(|r| r.len() != n) {
            return Err(Error::dims("distance tables are ragged".to_string()));
        }
        let within = |v: Option<usize>| v.is_some_and(|h| h <= d);
        let x = SupportMask::from_fn(n, n, |i, j| within(state_dist[i][j]));
        let u = SupportMask::from_fn(actuator_dist.len(), n, |a, j| within(actuator_dist[a][j]));
        Ok(Self {
            x_masks: vec![x; horizon],
            u_masks: vec![u; horizon],
            d: Some(d),
        })
    }

    pub fn horizon(&self) -> usize {
        self.x_masks.len()
    }

    pub fn states(&self) -> usize {
        self.x_masks[0].rows()
    }

    pub fn inputs(&self) -> usize {
        self.u_masks[0].rows()
    }

    /// Mask on `Phi_x[k]`, one-based.
    pub fn x_mask(&self, k: usize) -> &SupportMask {
        &self.x_masks[k - 1]
    }

    /// Mask on `Phi_u[k]`, one-based.
    pub fn u_mask(&self, k: usize) -> &SupportMask {
        &self.u_masks[k - 1]
    }
}

/// Breadth-first hop distances; `None` marks unreachable pairs.
pub fn hop_distances(adjacency: &SupportMask) -> Result<Vec<Vec<Option<usize>>>> {
    let (n, m) = adjacency.shape();
    if n != m {
        return Err(Error::dims(format!("adjacency is {n}x{m}")));
    }
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && adjacency.get(i, j)).collect())
        .collect();
    Ok((0..n)
        .map(|src| {
            let mut dist = vec![None; n];
            dist[src] = Some(0);
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                let du = dist[u].unwrap();
                for &v in &neighbors[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(du + 1);
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
        .collect())
}

/// Locality masks of radius `d` on a symmetric state graph.
///
/// Actuator `a` acts at the states set in row `a` of `actuator_map`; its
/// distance to state `j` is the smallest hop count from any of those states.
pub fn locality_mask(
    adjacency: &SupportMask,
    actuator_map: &SupportMask,
    d: usize,
    horizon: usize,
) -> Result<LocalityConstraint> {
    let n = adjacency.rows();
    if !adjacency.is_symmetric() {
        return Err(Error::param("adjacency must be symmetric"));
    }
    if (0..n).any(|i| !adjacency.get(i, i)) {
        return Err(Error::param("adjacency must contain every self-loop"));
    }
    if actuator_map.cols() != n {
        return Err(Error::dims(format!(
            "actuator map has {} columns for {n} states",
            actuator_map.cols()
        )));
    }
    let dist = hop_distances(adjacency)?;
    let actuator_dist: Vec<Vec<Option<usize>>> = (0..actuator_map.rows())
        .map(|a| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .filter(|&i| actuator_map.get(a, i))
                        .filter_map(|i| dist[i][j])
                        .min()
                })
                .collect()
        })
        .collect();
    LocalityConstraint::from_distances(&dist, &actuator_dist, d, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SupportMask {
        SupportMask::from_fn(n, n, |i, j| i.abs_diff(j) <= 1)
    }

    #[test]
    fn radius_zero_is_diagonal() {
        let loc = locality_mask(&path(4), &SupportMask::identity(4), 0, 3).unwrap();
        assert_eq!(loc.x_mask(2), &SupportMask::identity(4));
        assert_eq!(loc.u_mask(3), &SupportMask::identity(4));
    }

    #[test]
    fn radius_past_diameter_is_full() {
        let loc = locality_mask(&path(5), &SupportMask::identity(5), 4, 2).unwrap();
        assert_eq!(loc.x_mask(1), &SupportMask::full(5, 5));
    }

    #[test]
    fn path_radius_one_is_tridiagonal_bfs_oracle() {
        let n = 5;
        let loc = locality_mask(&path(n), &SupportMask::identity(n), 1, 1).unwrap();
        // Brute-force distance oracle: on a path, hops equal |i - j|.
        for i in 0..n {
            for j in 0..n {
                assert_eq!(loc.x_mask(1).get(i, j), i.abs_diff(j) <= 1);
            }
        }
    }

    #[test]
    fn disconnected_nodes_are_masked_out() {
        let adj = SupportMask::identity(3);
        let loc = locality_mask(&adj, &SupportMask::identity(3), 10, 1).unwrap();
        assert_eq!(loc.x_mask(1), &SupportMask::identity(3));
    }

    #[test]
    fn actuator_distance_uses_nearest_site() {
        // One actuator acting at both ends of a 5-path.
        let mut act = SupportMask::empty(1, 5);
        act.set(0, 0, true);
        act.set(0, 4, true);
        let loc = locality_mask(&path(5), &act, 1, 1).unwrap();
        let got: Vec<bool> = (0..5).map(|j| loc.u_mask(1).get(0, j)).collect();
        assert_eq!(got, vec![true, true, false, true, true]);
    }

    #[test]
    fn rejects_bad_adjacency() {
        let mut asym = path(3);
        asym.set(0, 2, true);
        assert!(locality_mask(&asym, &SupportMask::identity(3), 1, 1).is_err());
        let no_loops = SupportMask::from_fn(3, 3, |i, j| i.abs_diff(j) == 1);
        assert!(locality_mask(&no_loops, &SupportMask::identity(3), 1, 1).is_err());
    }
}
