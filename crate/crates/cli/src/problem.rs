//! The plant a synthesis or simulation run works on: the sparse design
//! model, the dense model used for verification and the graphs behind the
//! locality masks.

use std::path::Path;

use nalgebra::DMatrix;
use sparsedisc::sls::{hop_distances, locality_mask};
use sparsedisc::{
    case57_topology, discretize_all, parse_topology, unit_weights, ContinuousPlant, DenseMatrix,
    DiscretePlant, GridModels, LocalityConstraint, Method, SupportMask, CASE57_DISTURBED_BUS,
};

use crate::io::read_matrix;
use crate::{CliError, RunConfig};

pub struct Problem {
    pub nominal: DiscretePlant,
    /// Ground-truth model; absent for already-sampled inputs.
    pub dense: Option<DiscretePlant>,
    pub state_adjacency: SupportMask,
    pub actuator_map: SupportMask,
    /// Node graph (buses, or states for matrix input).
    pub node_adjacency: SupportMask,
    /// `(node, name)` per state.
    pub labels: Vec<(usize, &'static str)>,
    /// State hit by a disturbance at each node.
    pub entry_state: Vec<usize>,
    /// Default disturbed node, zero-based.
    pub default_node: usize,
}

impl Problem {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        match &cfg.input {
            Some(path) => Self::from_matrices(cfg, path),
            None => Self::from_grid(cfg),
        }
    }

    fn from_grid(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut spec = match &cfg.topology {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                parse_topology(&text, cfg.inertia, cfg.damping)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            }
            None => {
                let mut spec = case57_topology()?;
                spec.inertia = vec![cfg.inertia; spec.n_bus];
                spec.damping = vec![cfg.damping; spec.n_bus];
                spec
            }
        };
        spec = spec.with_edge_scale(cfg.edge_scale);
        let models = GridModels::new(&spec, cfg.tau)?;
        let map = &models.map;
        let labels = (0..map.states)
            .map(|s| {
                let bus = map.bus_of_state(s);
                (bus, if map.omega(bus) == Some(s) { "omega" } else { "theta" })
            })
            .collect();
        let entry_state = (0..map.buses()).map(|b| map.input_row(b)).collect();
        let default_node = if cfg.topology.is_none() {
            CASE57_DISTURBED_BUS - 1
        } else {
            0
        };
        Ok(Self {
            state_adjacency: map.state_adjacency(&models.bus_adjacency),
            actuator_map: map.actuator_map(),
            node_adjacency: models.bus_adjacency.clone(),
            labels,
            entry_state,
            default_node,
            nominal: models.nominal,
            dense: Some(models.dense),
        })
    }

    fn from_matrices(cfg: &RunConfig, a_path: &Path) -> Result<Self, CliError> {
        let a = clean(read_matrix(a_path)?, cfg.zero_tol);
        if !a.is_square() {
            return Err(CliError::Input(format!(
                "{}: drift matrix is {}x{}, expected square",
                a_path.display(),
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let b2 = match &cfg.b {
            Some(path) => clean(read_matrix(path)?, cfg.zero_tol),
            None => DMatrix::identity(n, n),
        };
        if b2.nrows() != n {
            return Err(CliError::Input(format!(
                "input matrix has {} rows, drift has {n}",
                b2.nrows()
            )));
        }
        let b1 = DMatrix::identity(n, n);
        let nu = b2.ncols();
        let (nominal, dense) = if cfg.discrete {
            (DiscretePlant::with_unit_weights(a.clone(), b1, b2.clone(), cfg.tau)?, None)
        } else {
            let plant = ContinuousPlant::new(a.clone(), b1, b2.clone())?;
            let sample = |method| {
                let (c1, d12) = unit_weights(n, nu);
                discretize_all(&plant, c1, DenseMatrix::zeros(n + nu, n), d12, cfg.tau, method)
            };
            (sample(Method::Projected)?, Some(sample(Method::ZohExact)?))
        };
        let graph = SupportMask::from_fn(n, n, |i, j| i == j || a[(i, j)] != 0.0 || a[(j, i)] != 0.0);
        Ok(Self {
            actuator_map: SupportMask::from_fn(nu, n, |k, i| b2[(i, k)] != 0.0),
            state_adjacency: graph.clone(),
            node_adjacency: graph,
            labels: (0..n).map(|i| (i, "x")).collect(),
            entry_state: (0..n).collect(),
            default_node: 0,
            nominal,
            dense,
        })
    }

    pub fn locality(&self, d: usize, horizon: usize) -> Result<LocalityConstraint, CliError> {
        Ok(locality_mask(&self.state_adjacency, &self.actuator_map, d, horizon)?)
    }

    pub fn nodes(&self) -> usize {
        self.node_adjacency.rows()
    }

    /// Hop distances from `node` in the node graph.
    pub fn distances_from(&self, node: usize) -> Result<Vec<Option<usize>>, CliError> {
        Ok(hop_distances(&self.node_adjacency)?.swap_remove(node))
    }
}

fn clean(mut m: DenseMatrix, zero_tol: f64) -> DenseMatrix {
    if zero_tol > 0.0 {
        m.iter_mut().filter(|v| v.abs() <= zero_tol).for_each(|v| *v = 0.0);
    }
    m
}
