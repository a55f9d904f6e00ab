//! Experiment configuration: plain-text `key = value` files whose keys are the
//! hyper-parameter symbols (`N_selection`, `eta`, `G_expansion`, ...).

use std::fmt;
use std::path::{Path, PathBuf};

use dslab_core::environments::{
    ArmSpec, BallisticEnv, BoundsShape, MazeEnv, MazeSpec, PolicyEnv, DEFAULT_ACTION_BOUND, JOINTS,
};
use dslab_core::explorers::{Algorithm, DsConfig};
use dslab_core::planners::{EstWeights, MpConfig, Planner};
use dslab_core::policies::{GeneBounds, MutationSpec, Topology};

/// Environment variable that overrides `output_dir`.
pub const OUT_ENV: &str = "DSLAB_OUT";

/// A configuration problem tied to one key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.msg)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoKind {
    Rrt,
    Est,
    Ns,
    Gep,
    Rs,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 5] = [AlgoKind::Rrt, AlgoKind::Est, AlgoKind::Ns, AlgoKind::Gep, AlgoKind::Rs];

    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::Rrt => "rrt",
            AlgoKind::Est => "est",
            AlgoKind::Ns => "ns",
            AlgoKind::Gep => "gep",
            AlgoKind::Rs => "rs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn is_planner(self) -> bool {
        matches!(self, AlgoKind::Rrt | AlgoKind::Est)
    }

    pub fn planner(self) -> Option<Planner> {
        match self {
            AlgoKind::Rrt => Some(Planner::Rrt),
            AlgoKind::Est => Some(Planner::Est),
            _ => None,
        }
    }

    pub fn diversity(self) -> Option<Algorithm> {
        match self {
            AlgoKind::Ns => Some(Algorithm::Ns),
            AlgoKind::Gep => Some(Algorithm::Gep),
            AlgoKind::Rs => Some(Algorithm::Rs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvKind {
    SimpleMaze,
    Ballistic3d,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::SimpleMaze => "simplemaze",
            EnvKind::Ballistic3d => "ballistic3d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simplemaze" => Some(EnvKind::SimpleMaze),
            "ballistic3d" => Some(EnvKind::Ballistic3d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstMode {
    Knn,
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: AlgoKind,
    pub environment: EnvKind,
    /// Maze description file; `None` uses the bundled simplemaze-v1.
    pub env_file: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub workers: usize,

    pub n_sel_exp: usize,
    pub r_neigh: f64,
    pub s0: Option<[f64; 2]>,
    pub n_samples: usize,
    pub est_weights: EstMode,
    pub control_steps: usize,

    pub n_timestep: usize,
    pub n_selection: usize,
    pub n_layers: usize,
    pub n_neurons: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_offspring: usize,
    pub n_generation: usize,
    pub n_init: usize,
    pub p_expansion: f64,
    pub p_mutation: f64,
    pub eta: f64,
    pub k: usize,
    pub g_expansion: usize,
    pub n_filter_archive: usize,
    pub n_update: usize,
    pub gene_lower: f64,
    pub gene_upper: f64,

    pub arm_lengths: [f64; JOINTS],
    pub velocity_bound: f64,
    pub gravity: f64,
    pub control_dt: f64,
    pub outcome_bounds: BoundsShape,

    pub log_selection: bool,
    pub export_outcomes: bool,
    pub write_archive: bool,
}

#[derive(Clone, Copy)]
enum Scope {
    Any,
    Planner,
    Est,
    Diversity,
    Novelty,
    KNeighbours,
    Maze,
    Ballistic,
}

impl Scope {
    fn applies(self, a: AlgoKind, e: EnvKind) -> bool {
        match self {
            Scope::Any => true,
            Scope::Planner => a.is_planner(),
            Scope::Est => a == AlgoKind::Est,
            Scope::Diversity => !a.is_planner(),
            Scope::Novelty => a == AlgoKind::Ns,
            Scope::KNeighbours => matches!(a, AlgoKind::Est | AlgoKind::Ns),
            Scope::Maze => e == EnvKind::SimpleMaze,
            Scope::Ballistic => e == EnvKind::Ballistic3d,
        }
    }
}

/// Every key in serialization order.
const KEYS: &[(&str, Scope)] = &[
    ("algorithm", Scope::Any),
    ("environment", Scope::Any),
    ("env_file", Scope::Maze),
    ("seeds", Scope::Any),
    ("output_dir", Scope::Any),
    ("workers", Scope::Any),
    ("N_sel_exp", Scope::Planner),
    ("R_neigh", Scope::Est),
    ("s0", Scope::Maze),
    ("N_samples", Scope::Est),
    ("est_weights", Scope::Est),
    ("control_steps", Scope::Planner),
    ("N_timestep", Scope::Diversity),
    ("N_selection", Scope::Diversity),
    ("N_layers", Scope::Diversity),
    ("N_neurons", Scope::Diversity),
    ("N_inputs", Scope::Diversity),
    ("N_outputs", Scope::Diversity),
    ("N_offspring", Scope::Diversity),
    ("N_generation", Scope::Diversity),
    ("N_init", Scope::Diversity),
    ("p_expansion", Scope::Diversity),
    ("p_mutation", Scope::Diversity),
    ("eta", Scope::Diversity),
    ("k", Scope::KNeighbours),
    ("G_expansion", Scope::Any),
    ("N_filter_archive", Scope::Novelty),
    ("n_update", Scope::Diversity),
    ("gene_lower", Scope::Diversity),
    ("gene_upper", Scope::Diversity),
    ("arm_lengths", Scope::Ballistic),
    ("velocity_bound", Scope::Ballistic),
    ("gravity", Scope::Ballistic),
    ("control_dt", Scope::Ballistic),
    ("outcome_bounds", Scope::Ballistic),
    ("log_selection", Scope::Diversity),
    ("export_outcomes", Scope::Diversity),
    ("write_archive", Scope::Any),
];

/// All recognised key names.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

fn scope_of(key: &str) -> Option<Scope> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s)
}

/// Parses `1,2,7..9` into `[1, 2, 7, 8, 9]`; ranges are inclusive.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in `{part}`"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in `{part}`"))?;
            if b < a {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?);
        }
    }
    Ok(out)
}

/// Splits config text into `(key, value)` pairs without interpreting them.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(line, format!("line {}: expected `key = value`", i + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn format_seeds(seeds: &[u64]) -> String {
    // Collapse consecutive runs back into ranges.
    let mut parts = Vec::new();
    let mut i = 0;
    while i < seeds.len() {
        let mut j = i;
        while j + 1 < seeds.len() && seeds[j + 1] == seeds[j] + 1 {
            j += 1;
        }
        if j > i + 1 {
            parts.push(format!("{}..{}", seeds[i], seeds[j]));
        } else {
            parts.extend(seeds[i..=j].iter().map(u64::to_string));
        }
        i = j + 1;
    }
    parts.join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| err(key, format!("cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(key, format!("expected true or false, got `{v}`"))),
    }
}

fn parse_floats<const N: usize>(key: &str, v: &str) -> Result<[f64; N], ConfigError> {
    let xs: Vec<f64> = v
        .split(',')
        .map(|x| parse_num::<f64>(key, x.trim()))
        .collect::<Result<_, _>>()?;
    xs.try_into()
        .map_err(|_| err(key, format!("expected {N} comma-separated numbers")))
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Table defaults for an (algorithm, environment) pair.
    pub fn defaults(algorithm: AlgoKind, environment: EnvKind) -> Self {
        let maze = environment == EnvKind::SimpleMaze;
        let arm = ArmSpec::default();
        let (n_selection, eta, g, n_filter, io, n_generation, n_timestep) = if maze {
            (100, 15.0, 4, 6, 2, 1000, 50)
        } else {
            (1, 2000.0, 10, 10, 5, 500, 1)
        };
        ExperimentConfig {
            algorithm,
            environment,
            env_file: None,
            seeds: vec![0],
            output_dir: PathBuf::from("runs"),
            workers: 1,
            n_sel_exp: 1000,
            r_neigh: 0.2,
            s0: None,
            n_samples: 10,
            est_weights: EstMode::Knn,
            control_steps: 1,
            n_timestep,
            n_selection,
            n_layers: 2,
            n_neurons: 50,
            n_inputs: io,
            n_outputs: io,
            n_offspring: 2,
            n_generation,
            n_init: n_selection,
            p_expansion: 1.0,
            p_mutation: 0.1,
            eta,
            k: 15,
            g_expansion: g,
            n_filter_archive: n_filter,
            n_update: 10,
            gene_lower: -1.0,
            gene_upper: 1.0,
            arm_lengths: arm.segment_lengths,
            velocity_bound: arm.velocity_bound,
            gravity: arm.gravity,
            control_dt: arm.control_dt,
            outcome_bounds: BoundsShape::Square,
            log_selection: true,
            export_outcomes: true,
            write_archive: true,
        }
    }

    /// Builds a config from `(key, value)` pairs applied in order on top of the
    /// defaults for the `algorithm`/`environment` given among them.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let last = |key: &str| pairs.iter().rev().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let algorithm = match last("algorithm") {
            Some(v) => AlgoKind::parse(v).ok_or_else(|| err("algorithm", format!("unknown algorithm `{v}`")))?,
            None => return Err(err("algorithm", "missing")),
        };
        let environment = match last("environment") {
            Some(v) => EnvKind::parse(v).ok_or_else(|| err("environment", format!("unknown environment `{v}`")))?,
            None => return Err(err("environment", "missing")),
        };
        let mut cfg = Self::defaults(algorithm, environment);
        let mut n_init_set = false;
        for (k, v) in &pairs {
            if matches!(*k, "algorithm" | "environment") {
                continue;
            }
            n_init_set |= *k == "N_init";
            cfg.set(k, v)?;
        }
        if !n_init_set {
            cfg.n_init = cfg.n_selection;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the `key = value` text format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(text)?;
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(Self::parse(&text)?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let scope = scope_of(key).ok_or_else(|| err(key, "unknown key"))?;
        if !scope.applies(self.algorithm, self.environment) {
            return Err(err(
                key,
                format!(
                    "does not apply to {} on {}",
                    self.algorithm.name(),
                    self.environment.name()
                ),
            ));
        }
        match key {
            "algorithm" => {
                self.algorithm = AlgoKind::parse(v).ok_or_else(|| err(key, format!("unknown algorithm `{v}`")))?
            }
            "environment" => {
                self.environment = EnvKind::parse(v).ok_or_else(|| err(key, format!("unknown environment `{v}`")))?
            }
            "env_file" => self.env_file = (!v.is_empty() && v != "builtin").then(|| PathBuf::from(v)),
            "seeds" => self.seeds = parse_seeds(v).map_err(|m| err(key, m))?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "workers" => self.workers = parse_num(key, v)?,
            "N_sel_exp" => self.n_sel_exp = parse_num(key, v)?,
            "R_neigh" => self.r_neigh = parse_num(key, v)?,
            "s0" => {
                self.s0 = if v == "default" {
                    None
                } else {
                    Some(parse_floats::<2>(key, v)?)
                }
            }
            "N_samples" => self.n_samples = parse_num(key, v)?,
            "est_weights" => {
                self.est_weights = match v {
                    "knn" => EstMode::Knn,
                    "count" => EstMode::Count,
                    _ => return Err(err(key, format!("expected knn or count, got `{v}`"))),
                }
            }
            "control_steps" => self.control_steps = parse_num(key, v)?,
            "N_timestep" => self.n_timestep = parse_num(key, v)?,
            "N_selection" => self.n_selection = parse_num(key, v)?,
            "N_layers" => self.n_layers = parse_num(key, v)?,
            "N_neurons" => self.n_neurons = parse_num(key, v)?,
            "N_inputs" => self.n_inputs = parse_num(key, v)?,
            "N_outputs" => self.n_outputs = parse_num(key, v)?,
            "N_offspring" => self.n_offspring = parse_num(key, v)?,
            "N_generation" => self.n_generation = parse_num(key, v)?,
            "N_init" => self.n_init = parse_num(key, v)?,
            "p_expansion" => self.p_expansion = parse_num(key, v)?,
            "p_mutation" => self.p_mutation = parse_num(key, v)?,
            "eta" => self.eta = parse_num(key, v)?,
            "k" => self.k = parse_num(key, v)?,
            "G_expansion" => self.g_expansion = parse_num(key, v)?,
            "N_filter_archive" => self.n_filter_archive = parse_num(key, v)?,
            "n_update" => self.n_update = parse_num(key, v)?,
            "gene_lower" => self.gene_lower = parse_num(key, v)?,
            "gene_upper" => self.gene_upper = parse_num(key, v)?,
            "arm_lengths" => self.arm_lengths = parse_floats::<JOINTS>(key, v)?,
            "velocity_bound" => self.velocity_bound = parse_num(key, v)?,
            "gravity" => self.gravity = parse_num(key, v)?,
            "control_dt" => self.control_dt = parse_num(key, v)?,
            "outcome_bounds" => {
                self.outcome_bounds = match v {
                    "square" => BoundsShape::Square,
                    "box" => BoundsShape::Box,
                    _ => return Err(err(key, format!("expected square or box, got `{v}`"))),
                }
            }
            "log_selection" => self.log_selection = parse_bool(key, v)?,
            "export_outcomes" => self.export_outcomes = parse_bool(key, v)?,
            "write_archive" => self.write_archive = parse_bool(key, v)?,
            _ => unreachable!("every listed key is handled"),
        }
        Ok(())
    }

    /// Text form of one key, or `None` when it does not apply.
    pub fn get(&self, key: &str) -> Option<String> {
        let scope = scope_of(key)?;
        if !scope.applies(self.algorithm, self.environment) {
            return None;
        }
        Some(match key {
            "algorithm" => self.algorithm.name().to_string(),
            "environment" => self.environment.name().to_string(),
            "env_file" => match &self.env_file {
                Some(p) => p.display().to_string(),
                None => "builtin".to_string(),
            },
            "seeds" => format_seeds(&self.seeds),
            "output_dir" => self.output_dir.display().to_string(),
            "workers" => self.workers.to_string(),
            "N_sel_exp" => self.n_sel_exp.to_string(),
            "R_neigh" => self.r_neigh.to_string(),
            "s0" => match self.s0 {
                Some(s) => join_floats(&s),
                None => "default".to_string(),
            },
            "N_samples" => self.n_samples.to_string(),
            "est_weights" => match self.est_weights {
                EstMode::Knn => "knn",
                EstMode::Count => "count",
            }
            .to_string(),
            "control_steps" => self.control_steps.to_string(),
            "N_timestep" => self.n_timestep.to_string(),
            "N_selection" => self.n_selection.to_string(),
            "N_layers" => self.n_layers.to_string(),
            "N_neurons" => self.n_neurons.to_string(),
            "N_inputs" => self.n_inputs.to_string(),
            "N_outputs" => self.n_outputs.to_string(),
            "N_offspring" => self.n_offspring.to_string(),
            "N_generation" => self.n_generation.to_string(),
            "N_init" => self.n_init.to_string(),
            "p_expansion" => self.p_expansion.to_string(),
            "p_mutation" => self.p_mutation.to_string(),
            "eta" => self.eta.to_string(),
            "k" => self.k.to_string(),
            "G_expansion" => self.g_expansion.to_string(),
            "N_filter_archive" => self.n_filter_archive.to_string(),
            "n_update" => self.n_update.to_string(),
            "gene_lower" => self.gene_lower.to_string(),
            "gene_upper" => self.gene_upper.to_string(),
            "arm_lengths" => join_floats(&self.arm_lengths),
            "velocity_bound" => self.velocity_bound.to_string(),
            "gravity" => self.gravity.to_string(),
            "control_dt" => self.control_dt.to_string(),
            "outcome_bounds" => match self.outcome_bounds {
                BoundsShape::Square => "square",
                BoundsShape::Box => "box",
            }
            .to_string(),
            "log_selection" => self.log_selection.to_string(),
            "export_outcomes" => self.export_outcomes.to_string(),
            "write_archive" => self.write_archive.to_string(),
            _ => return None,
        })
    }

    /// Every applicable key in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        known_keys().filter_map(|k| self.get(k).map(|v| (k, v))).collect()
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.environment == EnvKind::Ballistic3d && self.algorithm.is_planner() {
            return Err(err("algorithm", "tree planners only run in simplemaze"));
        }
        if self.seeds.is_empty() {
            return Err(err("seeds", "at least one seed is required"));
        }
        let positive = [
            ("workers", self.workers),
            ("G_expansion", self.g_expansion),
            ("n_update", self.n_update),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(err(k, "must be at least 1"));
            }
        }
        if self.algorithm.is_planner() {
            if self.control_steps == 0 {
                return Err(err("control_steps", "must be at least 1"));
            }
            if self.algorithm == AlgoKind::Est {
                if self.k == 0 {
                    return Err(err("k", "must be at least 1"));
                }
                if !(self.r_neigh > 0.0) {
                    return Err(err("R_neigh", "must be positive"));
                }
                if self.n_samples == 0 {
                    return Err(err("N_samples", "must be at least 1"));
                }
            }
        } else {
            let (inputs, outputs) = match self.environment {
                EnvKind::SimpleMaze => (2, 2),
                EnvKind::Ballistic3d => (JOINTS + 1, JOINTS + 1),
            };
            if self.n_inputs != inputs {
                return Err(err(
                    "N_inputs",
                    format!("{} requires {inputs}", self.environment.name()),
                ));
            }
            if self.n_outputs != outputs {
                return Err(err(
                    "N_outputs",
                    format!("{} requires {outputs}", self.environment.name()),
                ));
            }
            if self.environment == EnvKind::Ballistic3d && self.n_timestep != 1 {
                return Err(err("N_timestep", "the throw is a single control step"));
            }
            if self.n_timestep == 0 {
                return Err(err("N_timestep", "must be at least 1"));
            }
            if self.n_layers > 0 && self.n_neurons == 0 {
                return Err(err("N_neurons", "hidden layers need at least one neuron"));
            }
            for (k, v) in [
                ("N_selection", self.n_selection),
                ("N_offspring", self.n_offspring),
                ("N_init", self.n_init),
            ] {
                if v == 0 {
                    return Err(err(k, "must be at least 1"));
                }
            }
            if self.algorithm == AlgoKind::Ns && self.k == 0 {
                return Err(err("k", "must be at least 1"));
            }
            if !(0.0..=1.0).contains(&self.p_expansion) {
                return Err(err("p_expansion", "must lie in [0, 1]"));
            }
            if !(0.0..=1.0).contains(&self.p_mutation) {
                return Err(err("p_mutation", "must lie in [0, 1]"));
            }
            if !(self.eta > 0.0) {
                return Err(err("eta", "must be positive"));
            }
            if !(self.gene_lower < self.gene_upper) {
                return Err(err("gene_lower", "must be below gene_upper"));
            }
            if self.environment == EnvKind::Ballistic3d {
                self.arm_spec().validate().map_err(|e| err("arm_lengths", e))?;
            }
        }
        if self.environment == EnvKind::SimpleMaze {
            self.maze_spec().map_err(|e| err("env_file", e))?;
        }
        Ok(())
    }

    /// The maze after applying `s0` and `N_timestep`.
    pub fn maze_spec(&self) -> dslab_core::Result<MazeSpec> {
        let mut spec = match &self.env_file {
            Some(p) => MazeSpec::from_file(p)?,
            None => MazeSpec::simplemaze_v1(),
        };
        if let Some(s0) = self.s0 {
            spec.start = s0;
        }
        spec.horizon = self.n_timestep;
        spec.action_bound = [DEFAULT_ACTION_BOUND; 2];
        spec.validate()?;
        Ok(spec)
    }

    pub fn arm_spec(&self) -> ArmSpec {
        ArmSpec {
            segment_lengths: self.arm_lengths,
            velocity_bound: self.velocity_bound,
            gravity: self.gravity,
            control_dt: self.control_dt,
            ..ArmSpec::default()
        }
    }

    pub fn topology(&self) -> dslab_core::Result<Topology> {
        Topology::new(self.n_inputs, &vec![self.n_neurons; self.n_layers], self.n_outputs)
    }

    /// Policy environment for the diversity algorithms.
    pub fn policy_env(&self) -> anyhow::Result<Box<dyn PolicyEnv>> {
        Ok(match self.environment {
            EnvKind::SimpleMaze => Box::new(MazeEnv::with_topology(self.maze_spec()?, self.topology()?)?),
            EnvKind::Ballistic3d => Box::new(
                BallisticEnv::with_shape(self.arm_spec(), self.outcome_bounds)?.with_topology(self.topology()?)?,
            ),
        })
    }

    pub fn mutation(&self) -> dslab_core::Result<MutationSpec> {
        MutationSpec::new(
            self.eta,
            self.p_mutation,
            GeneBounds::new(self.gene_lower, self.gene_upper)?,
        )
    }

    pub fn ds_config(&self) -> dslab_core::Result<DsConfig> {
        Ok(DsConfig {
            n_selection: self.n_selection,
            n_offspring: self.n_offspring,
            n_init: self.n_init,
            k: self.k,
            n_filter_archive: self.n_filter_archive,
            p_expansion: self.p_expansion,
            mutation: self.mutation()?,
            init_bounds: GeneBounds::new(self.gene_lower, self.gene_upper)?,
            n_update: self.n_update,
            workers: 1,
            log_selection: self.log_selection,
        })
    }

    pub fn mp_config(&self) -> MpConfig {
        MpConfig {
            iterations: self.n_sel_exp,
            control_steps: self.control_steps,
            est: match self.est_weights {
                EstMode::Knn => EstWeights::Knn { k: self.k },
                EstMode::Count => EstWeights::NeighborCount {
                    r_neigh: self.r_neigh,
                    n_samples: self.n_samples,
                },
            },
        }
    }

    /// Length of a run: iterations for planners, generations otherwise.
    pub fn iterations(&self) -> usize {
        if self.algorithm.is_planner() {
            self.n_sel_exp
        } else {
            self.n_generation
        }
    }

    pub fn set_iterations(&mut self, n: usize) {
        if self.algorithm.is_planner() {
            self.n_sel_exp = n;
        } else {
            self.n_generation = n;
        }
    }

    /// Applies `DSLAB_OUT` when set.
    pub fn apply_env_overrides(&mut self) {
        if let Some(dir) = std::env::var_os(OUT_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    /// Settings that change the meaning of an expansion score; runs can only be
    /// aggregated together when these agree.
    pub fn grid_signature(&self) -> String {
        format!(
            "{} G={} bounds={:?}",
            self.environment.name(),
            self.g_expansion,
            self.outcome_signature()
        )
    }

    fn outcome_signature(&self) -> Option<&'static str> {
        (self.environment == EnvKind::Ballistic3d).then_some(match self.outcome_bounds {
            BoundsShape::Square => "square",
            BoundsShape::Box => "box",
        })
    }
}
