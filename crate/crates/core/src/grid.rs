//! Linearized swing-equation model of a power network.
//!
//! Generator buses carry phase angle and frequency, load buses only the
//! phase angle (first-order reading of the load balance equation).

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::discretize::{discretize_all, unit_weights, ContinuousPlant, DiscretePlant, Method};
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SupportMask};
use crate::sls::locality::{hop_distances, locality_mask, LocalityConstraint};

const CASE57: &str = include_str!("../data/case57.topo");

/// Network description. Buses are zero-based here; topology files use
/// one-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_bus: usize,
    pub generators: Vec<usize>,
    pub loads: Vec<usize>,
    /// Inertia per bus; only read for generators.
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    /// Undirected edges `(i, j, H_ij)` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl GridSpec {
    /// Build from a topology with uniform inertia, damping and edge-weight
    /// scale.
    pub fn uniform(
        n_bus: usize,
        generators: Vec<usize>,
        edges: Vec<(usize, usize, f64)>,
        inertia: f64,
        damping: f64,
    ) -> Result<Self> {
        let mut is_gen = vec![false; n_bus];
        for &g in &generators {
            if g >= n_bus {
                return Err(Error::Grid(format!("generator bus {} out of range", g + 1)));
            }
            is_gen[g] = true;
        }
        let loads = (0..n_bus).filter(|&b| !is_gen[b]).collect();
        let spec = Self {
            n_bus,
            generators,
            loads,
            inertia: vec![inertia; n_bus],
            damping: vec![damping; n_bus],
            edges,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same network with every edge weight multiplied by `factor`.
    pub fn with_edge_scale(&self, factor: f64) -> Self {
        Self {
            edges: self.edges.iter().map(|&(i, j, h)| (i, j, h * factor)).collect(),
            ..self.clone()
        }
    }

    pub fn is_generator(&self, bus: usize) -> bool {
        self.generators.contains(&bus)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_bus;
        if n == 0 {
            return Err(Error::Grid("network has no buses".into()));
        }
        let mut seen = vec![0u8; n];
        for &b in self.generators.iter().chain(&self.loads) {
            if b >= n {
                return Err(Error::Grid(format!("bus {} out of range", b + 1)));
            }
            seen[b] += 1;
        }
        if let Some(b) = seen.iter().position(|&c| c != 1) {
            return Err(Error::Grid(format!(
                "bus {} must be exactly one of generator or load",
                b + 1
            )));
        }
        if self.inertia.len() != n || self.damping.len() != n {
            return Err(Error::Grid("parameter vectors must have one entry per bus".into()));
        }
        for &g in &self.generators {
            if !(self.inertia[g] > 0.0 && self.inertia[g].is_finite()) {
                return Err(Error::Grid(format!("inertia at bus {} must be positive", g + 1)));
            }
        }
        if let Some(b) = self.damping.iter().position(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Grid(format!("damping at bus {} must be positive", b + 1)));
        }
        for &(i, j, h) in &self.edges {
            if i >= n || j >= n {
                return Err(Error::Grid(format!("edge {}-{} out of range", i + 1, j + 1)));
            }
            if i == j {
                return Err(Error::Grid(format!("self-loop at bus {}", i + 1)));
            }
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::Grid(format!(
                    "edge {}-{} has invalid weight {h}",
                    i + 1,
                    j + 1
                )));
            }
        }
        let adj = self.bus_adjacency();
        let dist = hop_distances(&adj)?;
        if let Some(b) = dist[0].iter().position(|d| d.is_none()) {
            return Err(Error::Grid(format!("bus {} is disconnected", b + 1)));
        }
        Ok(())
    }

    /// Bus graph with self-loops.
    pub fn bus_adjacency(&self) -> SupportMask {
        let mut adj = SupportMask::identity(self.n_bus);
        for &(i, j, _) in &self.edges {
            adj.set(i, j, true);
            adj.set(j, i, true);
        }
        adj
    }
}

/// Where each bus lives in the state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridIndexMap {
    /// Offset of the phase-angle state of each bus. A generator's
    /// frequency state follows at `offset + 1`.
    pub offsets: Vec<usize>,
    pub generator: Vec<bool>,
    pub states: usize,
}

impl GridIndexMap {
    fn new(spec: &GridSpec) -> Self {
        let mut offsets = Vec::with_capacity(spec.n_bus);
        let mut generator = Vec::with_capacity(spec.n_bus);
        let mut next = 0;
        for b in 0..spec.n_bus {
            let g = spec.is_generator(b);
            offsets.push(next);
            generator.push(g);
            next += if g { 2 } else { 1 };
        }
        Self {
            offsets,
            generator,
            states: next,
        }
    }

    pub fn buses(&self) -> usize {
        self.offsets.len()
    }

    pub fn theta(&self, bus: usize) -> usize {
        self.offsets[bus]
    }

    pub fn omega(&self, bus: usize) -> Option<usize> {
        self.generator[bus].then(|| self.offsets[bus] + 1)
    }

    /// State whose equation the bus's disturbance and actuator enter.
    pub fn input_row(&self, bus: usize) -> usize {
        self.omega(bus).unwrap_or(self.offsets[bus])
    }

    /// Actuator index of a bus; one actuator per bus.
    pub fn actuator(&self, bus: usize) -> usize {
        bus
    }

    pub fn bus_of_state(&self, state: usize) -> usize {
        match self.offsets.binary_search(&state) {
            Ok(b) => b,
            Err(b) => b - 1,
        }
    }

    /// States of the same or neighboring buses are adjacent.
    pub fn state_adjacency(&self, bus_adjacency: &SupportMask) -> SupportMask {
        SupportMask::from_fn(self.states, self.states, |i, j| {
            bus_adjacency.get(self.bus_of_state(i), self.bus_of_state(j))
        })
    }

    /// Actuator `a` acts at every state of bus `a`.
    pub fn actuator_map(&self) -> SupportMask {
        SupportMask::from_fn(self.buses(), self.states, |a, s| self.bus_of_state(s) == a)
    }
}

/// Assemble `(Ahat, B1hat, B2hat)`, the index map and the bus graph.
pub fn linearize(spec: &GridSpec) -> Result<(ContinuousPlant, GridIndexMap, SupportMask)> {
    spec.validate()?;
    let map = GridIndexMap::new(spec);
    let n = map.states;
    let mut a = DenseMatrix::zeros(n, n);
    // Weighted Laplacian on phase angles.
    let mut lap = DMatrix::<f64>::zeros(spec.n_bus, spec.n_bus);
    for &(i, j, h) in &spec.edges {
        lap[(i, j)] -= h;
        lap[(j, i)] -= h;
        lap[(i, i)] += h;
        lap[(j, j)] += h;
    }
    let mut b = DenseMatrix::zeros(n, spec.n_bus);
    for bus in 0..spec.n_bus {
        let (row, scale) = match map.omega(bus) {
            Some(w) => {
                let m = spec.inertia[bus];
                a[(map.theta(bus), w)] = 1.0;
                a[(w, w)] = -spec.damping[bus] / m;
                (w, m)
            }
            None => (map.theta(bus), spec.damping[bus]),
        };
        for other in 0..spec.n_bus {
            let l = lap[(bus, other)];
            if l != 0.0 {
                a[(row, map.theta(other))] -= l / scale;
            }
        }
        b[(row, map.actuator(bus))] = -1.0 / scale;
    }
    let plant = ContinuousPlant::new(a, b.clone(), b)?;
    Ok((plant, map, spec.bus_adjacency()))
}

/// Sampled models of one network: the projected (sparse) design model and
/// the exact ZOH (dense) model, both with unit cost weights.
#[derive(Debug, Clone)]
pub struct GridModels {
    pub continuous: ContinuousPlant,
    pub nominal: DiscretePlant,
    pub dense: DiscretePlant,
    pub map: GridIndexMap,
    pub bus_adjacency: SupportMask,
}

impl GridModels {
    pub fn new(spec: &GridSpec, tau: f64) -> Result<Self> {
        let (continuous, map, bus_adjacency) = linearize(spec)?;
        let n = map.states;
        let nu = continuous.b2_hat.ncols();
        let nw = continuous.b1_hat.ncols();
        let sample = |method| {
            let (c1, d12) = unit_weights(n, nu);
            let d11 = DenseMatrix::zeros(n + nu, nw);
            discretize_all(&continuous, c1, d11, d12, tau, method)
        };
        Ok(Self {
            nominal: sample(Method::Projected)?,
            dense: sample(Method::ZohExact)?,
            continuous,
            map,
            bus_adjacency,
        })
    }

    /// Masks allowing coupling between buses at most `d` hops apart.
    pub fn locality(&self, d: usize, horizon: usize) -> Result<LocalityConstraint> {
        locality_mask(
            &self.map.state_adjacency(&self.bus_adjacency),
            &self.map.actuator_map(),
            d,
            horizon,
        )
    }

    /// Hop distance between buses.
    pub fn bus_distances(&self) -> Result<Vec<Vec<Option<usize>>>> {
        hop_distances(&self.bus_adjacency)
    }
}

/// Parse the plain-text topology format: `i j [H_ij]` per line, one-based,
/// `#` comments, and one `G: i1 i2 ...` generator line. Repeated bus pairs
/// add their weights. The bus count is the largest index seen.
pub fn parse_topology(text: &str, inertia: f64, damping: f64) -> Result<GridSpec> {
    let mut generators: Option<Vec<usize>> = None;
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut n_bus = 0;
    let parse_bus = |tok: &str, line: usize| -> Result<usize> {
        match tok.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(Error::Parse {
                line,
                msg: format!("expected a one-based bus index, got `{tok}`"),
            }),
        }
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("G:") {
            if generators.is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "second generator line".into(),
                });
            }
            let buses = rest
                .split_whitespace()
                .map(|t| parse_bus(t, line))
                .collect::<Result<Vec<_>>>()?;
            n_bus = n_bus.max(buses.iter().copied().max().unwrap_or(0));
            generators = Some(buses.into_iter().map(|b| b - 1).collect());
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(Error::Parse {
                line,
                msg: format!("expected `i j [H]`, got `{body}`"),
            });
        }
        let i = parse_bus(toks[0], line)?;
        let j = parse_bus(toks[1], line)?;
        if i == j {
            return Err(Error::Parse {
                line,
                msg: format!("self-loop at bus {i}"),
            });
        }
        let h = match toks.get(2) {
            Some(t) => t.parse::<f64>().ok().filter(|h| *h >= 0.0 && h.is_finite()).ok_or(
                Error::Parse {
                    line,
                    msg: format!("invalid edge weight `{t}`"),
                },
            )?,
            None => 1.0,
        };
        n_bus = n_bus.max(i).max(j);
        *weights.entry((i.min(j) - 1, i.max(j) - 1)).or_insert(0.0) += h;
    }
    let generators = generators.ok_or(Error::Parse {
        line: 0,
        msg: "missing `G:` generator line".into(),
    })?;
    let edges = weights.into_iter().map(|((i, j), h)| (i, j, h)).collect();
    GridSpec::uniform(n_bus, generators, edges, inertia, damping)
}

/// Bundled IEEE 57-bus topology with `M = D = H = 1`.
pub fn case57_topology() -> Result<GridSpec> {
    parse_topology(CASE57, 1.0, 1.0)
}

/// One-based bus whose frequency the reference disturbance hits.
pub const CASE57_DISTURBED_BUS: usize = 3;
