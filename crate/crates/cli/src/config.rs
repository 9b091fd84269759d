//! Run configuration: command-line flags layered over an optional
//! `key = value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use sparsedisc::sls::MIN_HINF_GRID;
use sparsedisc::NormKind;

use crate::CliError;

const CONFIG_HELP: &str = "\
CONFIG FILE
  --config FILE reads one `key = value` pair per line; `#` starts a comment.
  Keys are the long flag names with `-` or `_`, for example

      tau = 0.2
      horizon = 5
      locality = 4
      norm = l1
      paper_literal = true
      sizes = 20, 40, 60

  Flags given on the command line override the file.

EXIT CODES
  0 success, 2 input error, 3 infeasible synthesis, 4 numerical failure";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    /// Sample a continuous drift (and input) matrix and report the errors.
    Discretize,
    /// Decay bounds against measured errors on random banded matrices.
    Bounds,
    /// Localized controller synthesis on the sparse model.
    Synthesize,
    /// Synthesize, then simulate on the sparse and dense models.
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormChoice {
    L1,
    E1,
    Hinf,
}

impl FromStr for NormChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparsedisc", version, about, after_help = CONFIG_HELP)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandKind,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sampling period.
    #[arg(long)]
    pub tau: Option<f64>,
    /// FIR horizon T.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Locality radius d in graph hops.
    #[arg(long)]
    pub locality: Option<usize>,
    #[arg(long, value_enum)]
    pub norm: Option<NormChoice>,
    /// Fixed residual bound; skips the bisection.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub bisect_tol: Option<f64>,
    /// Minimize the cost at the fixed `--gamma` (default 0).
    #[arg(long)]
    pub paper_literal: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continuous drift matrix (Matrix Market or dense text).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Continuous input matrix.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Treat `--input`/`--b` as already sampled.
    #[arg(long)]
    pub discrete: bool,
    /// Network topology file; the bundled 57-bus case is the default.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Bound the residual through measured model error instead of directly.
    #[arg(long)]
    pub robust: bool,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub hinf_grid: Option<usize>,
    /// Matrix sizes for `bounds`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Largest entry of `Ahat tau` for `bounds`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Random matrices per size.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Simulation length; defaults to 10 T.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Disturbed bus (one-based).
    #[arg(long)]
    pub bus: Option<usize>,
    /// Simulate with no disturbance at all.
    #[arg(long)]
    pub no_disturbance: bool,
    #[arg(long, value_delimiter = ',')]
    pub sweep_horizons: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_localities: Option<Vec<usize>>,
    #[arg(long)]
    pub inertia: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub edge_scale: Option<f64>,
    /// Magnitude below which input entries count as zero.
    #[arg(long)]
    pub zero_tol: Option<f64>,
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub tau: f64,
    pub horizon: usize,
    pub locality: usize,
    pub norm: NormChoice,
    pub hinf_grid: usize,
    pub gamma: Option<f64>,
    pub bisect_tol: f64,
    pub paper_literal: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub discrete: bool,
    pub topology: Option<PathBuf>,
    pub robust: bool,
    pub alpha_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    pub bandwidth: usize,
    pub alpha: f64,
    pub samples: usize,
    pub steps: Option<usize>,
    pub bus: Option<usize>,
    pub no_disturbance: bool,
    pub sweep_horizons: Vec<usize>,
    pub sweep_localities: Vec<usize>,
    pub inertia: f64,
    pub damping: f64,
    pub edge_scale: f64,
    pub zero_tol: f64,
}

impl RunConfig {
    /// Defaults for `command` with no file and no flags.
    pub fn defaults(command: CommandKind) -> Self {
        Self {
            command,
            tau: 0.2,
            horizon: 5,
            locality: 4,
            norm: NormChoice::L1,
            hinf_grid: MIN_HINF_GRID,
            gamma: None,
            bisect_tol: 0.01,
            paper_literal: false,
            seed: 0,
            out: PathBuf::from("out"),
            input: None,
            b: None,
            discrete: false,
            topology: None,
            robust: false,
            alpha_grid: (1..=9).map(|k| k as f64 / 10.0).collect(),
            sizes: vec![20, 40, 60, 100, 200],
            bandwidth: 4,
            alpha: 0.5,
            samples: 3,
            steps: None,
            bus: None,
            no_disturbance: false,
            sweep_horizons: Vec::new(),
            sweep_localities: Vec::new(),
            inertia: 1.0,
            damping: 1.0,
            edge_scale: 1.0,
            zero_tol: 0.0,
        }
    }

    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let d = Self::defaults(cli.command);
        let cfg = Self {
            command: cli.command,
            tau: pick(cli.tau, &file, "tau")?.unwrap_or(d.tau),
            horizon: pick(cli.horizon, &file, "horizon")?.unwrap_or(d.horizon),
            locality: pick(cli.locality, &file, "locality")?.unwrap_or(d.locality),
            norm: pick(cli.norm, &file, "norm")?.unwrap_or(d.norm),
            hinf_grid: pick(cli.hinf_grid, &file, "hinf_grid")?.unwrap_or(d.hinf_grid),
            gamma: pick(cli.gamma, &file, "gamma")?,
            bisect_tol: pick(cli.bisect_tol, &file, "bisect_tol")?.unwrap_or(d.bisect_tol),
            paper_literal: flag(cli.paper_literal, &file, "paper_literal")?,
            seed: pick(cli.seed, &file, "seed")?.unwrap_or(d.seed),
            out: pick(cli.out.clone(), &file, "out")?.unwrap_or(d.out),
            input: pick(cli.input.clone(), &file, "input")?,
            b: pick(cli.b.clone(), &file, "b")?,
            discrete: flag(cli.discrete, &file, "discrete")?,
            topology: pick(cli.topology.clone(), &file, "topology")?,
            robust: flag(cli.robust, &file, "robust")?,
            alpha_grid: pick_list(cli.alpha_grid.clone(), &file, "alpha_grid")?
                .unwrap_or(d.alpha_grid),
            sizes: pick_list(cli.sizes.clone(), &file, "sizes")?.unwrap_or(d.sizes),
            bandwidth: pick(cli.bandwidth, &file, "bandwidth")?.unwrap_or(d.bandwidth),
            alpha: pick(cli.alpha, &file, "alpha")?.unwrap_or(d.alpha),
            samples: pick(cli.samples, &file, "samples")?.unwrap_or(d.samples),
            steps: pick(cli.steps, &file, "steps")?,
            bus: pick(cli.bus, &file, "bus")?,
            no_disturbance: flag(cli.no_disturbance, &file, "no_disturbance")?,
            sweep_horizons: pick_list(cli.sweep_horizons.clone(), &file, "sweep_horizons")?
                .unwrap_or_default(),
            sweep_localities: pick_list(cli.sweep_localities.clone(), &file, "sweep_localities")?
                .unwrap_or_default(),
            inertia: pick(cli.inertia, &file, "inertia")?.unwrap_or(d.inertia),
            damping: pick(cli.damping, &file, "damping")?.unwrap_or(d.damping),
            edge_scale: pick(cli.edge_scale, &file, "edge_scale")?.unwrap_or(d.edge_scale),
            zero_tol: pick(cli.zero_tol, &file, "zero_tol")?.unwrap_or(d.zero_tol),
        };
        if let Some(key) = file.unused() {
            return Err(CliError::Input(format!(
                "{}: line {}: unknown key `{key}`",
                cli.config.as_ref().unwrap().display(),
                file.entries[&key].0
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Input(msg));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tau) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return bad(format!("gamma must lie in [0, 1), got {g}"));
            }
        }
        if !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return bad(format!("bisect_tol must lie in (0, 1), got {}", self.bisect_tol));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("alpha_grid entries must lie in (0, 1)".into());
        }
        if self.hinf_grid < MIN_HINF_GRID {
            return bad(format!("hinf_grid must be at least {MIN_HINF_GRID}"));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 2) {
            return bad("sizes must be at least 2".into());
        }
        if self.bandwidth == 0 {
            return bad("bandwidth must be at least 1".into());
        }
        if !positive(self.alpha) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.samples == 0 || self.steps == Some(0) || self.bus == Some(0) {
            return bad("samples, steps and bus must be at least 1".into());
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("damping", self.damping),
            ("edge_scale", self.edge_scale),
        ] {
            if !positive(v) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.zero_tol >= 0.0 && self.zero_tol.is_finite()) {
            return bad("zero_tol must be nonnegative".into());
        }
        if self.sweep_horizons.contains(&0) {
            return bad("sweep horizons must be at least 1".into());
        }
        if self.sweep_horizons.is_empty() != self.sweep_localities.is_empty() {
            return bad("a sweep needs both sweep_horizons and sweep_localities".into());
        }
        if self.input.is_some() && self.topology.is_some() {
            return bad("give either a matrix input or a topology, not both".into());
        }
        Ok(())
    }

    /// Norm used for the residual constraint.
    pub fn norm_kind(&self) -> NormKind {
        match self.norm {
            NormChoice::L1 => NormKind::L1,
            NormChoice::E1 => NormKind::E1,
            NormChoice::Hinf => NormKind::HinfSampled {
                grid_points: self.hinf_grid,
            },
        }
    }

    /// Fixed-gamma mode; otherwise gamma is bisected.
    pub fn fixed_gamma(&self) -> Option<f64> {
        if self.paper_literal {
            Some(self.gamma.unwrap_or(0.0))
        } else {
            self.gamma
        }
    }
}

#[derive(Debug, Default)]
struct ConfigFile {
    /// key -> (line, raw value)
    entries: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<Vec<String>>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|msg| CliError::Input(format!("{}: {msg}", path.display())))
    }

    fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| format!("line {line}: expected `key = value`"))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                return Err(format!("line {line}: empty key"));
            }
            if entries.insert(key.clone(), (line, value.trim().to_string())).is_some() {
                return Err(format!("line {line}: duplicate key `{key}`"));
            }
        }
        Ok(Self {
            entries,
            used: Default::default(),
        })
    }

    fn get(&self, key: &str) -> Option<&(usize, String)> {
        self.used.borrow_mut().push(key.to_string());
        self.entries.get(key)
    }

    fn unused(&self) -> Option<String> {
        let used = self.used.borrow();
        self.entries.keys().find(|k| !used.contains(k)).cloned()
    }
}

fn parse_at<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Input(format!("config line {line}: bad value `{raw}` for `{key}`")))
}

fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
    let from_file = file.get(key);
    match (flag, from_file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some((line, raw))) => parse_at(*line, key, raw).map(Some),
        (None, None) => Ok(None),
    }
}

fn pick_list<T: FromStr>(
    flag: Option<Vec<T>>,
    file: &ConfigFile,
    key: &str,
) -> Result<Option<Vec<T>>, CliError> {
    let from_file = file.get(key);
    match (flag, from_file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some((line, raw))) => raw
            .split(',')
            .map(|t| parse_at(*line, key, t.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        (None, None) => Ok(None),
    }
}

fn flag(set: bool, file: &ConfigFile, key: &str) -> Result<bool, CliError> {
    Ok(set || pick::<bool>(None, file, key)?.unwrap_or(false))
}
