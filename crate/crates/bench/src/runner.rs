//! Multi-seed execution and on-disk run artifacts.
//!
//! A run directory holds `config.txt`, `manifest.txt`, `expansion.csv`
//! (`run_id,seed,generation,score`) and one `seed_<s>/` directory per seed with
//! `telemetry.csv`, `history.csv`, `timing.csv` and the final archive
//! (`archive.bin` for diversity runs, `tree.txt` for planners). Row 0 of every
//! per-step file is the initial state; row `g` follows the `g`-th
//! generation or iteration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use dslab_core::explorers::Explorer;
use dslab_core::metrics::ExpansionGrid;
use dslab_core::planners::run_planner;
use dslab_core::rng::stream;
use sha2::{Digest, Sha256};

use crate::archive::save_archive;
use crate::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const EXPANSION_FILE: &str = "expansion.csv";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const ARCHIVE_FILE: &str = "archive.bin";
pub const TREE_FILE: &str = "tree.txt";

pub const TELEMETRY_HEADER: &str =
    "generation,evaluations,archive_size,population_size,new_outcomes,selected,out_of_bounds,score";

/// One row of `telemetry.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub generation: usize,
    pub evaluations: u64,
    pub archive_size: usize,
    pub population_size: usize,
    pub new_outcomes: usize,
    pub selected: usize,
    pub out_of_bounds: u64,
    pub score: f64,
}

impl TelemetryRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.16e}",
            self.generation,
            self.evaluations,
            self.archive_size,
            self.population_size,
            self.new_outcomes,
            self.selected,
            self.out_of_bounds,
            self.score
        )
    }
}

/// What a finished seed leaves in memory.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    /// Expansion score per row, initial state first.
    pub scores: Vec<f64>,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub results: Vec<SeedResult>,
    pub failures: Vec<(u64, String)>,
}

pub fn run_id(cfg: &ExperimentConfig, seed: u64) -> String {
    format!("{}_{}_{}", cfg.algorithm.name(), cfg.environment.name(), seed)
}

pub fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}"))
}

/// Hash of the settings that determine results; output location and worker
/// count are left out.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    for (k, v) in cfg.entries() {
        if k != "output_dir" && k != "workers" {
            h.update(format!("{k} = {v}\n").as_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

struct CsvOut(BufWriter<File>);

impl CsvOut {
    fn create(path: &Path, header: &str) -> Result<Self> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{header}")?;
        Ok(CsvOut(w))
    }

    fn point(&mut self, g: usize, p: &[f64]) -> Result<()> {
        write!(self.0, "{g}")?;
        for x in p {
            write!(self.0, ",{x:.16e}")?;
        }
        writeln!(self.0)?;
        Ok(())
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.0, "{s}")?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.0.flush()?;
        Ok(())
    }
}

/// Runs one seed and writes its per-seed files into `dir`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<SeedResult> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let started = Instant::now();
    let mut telemetry = CsvOut::create(&dir.join(TELEMETRY_FILE), TELEMETRY_HEADER)?;
    let mut timing = CsvOut::create(&dir.join(TIMING_FILE), "generation,wall_ms")?;
    let mut history = if cfg.algorithm.is_planner() || cfg.log_selection {
        Some(CsvOut::create(&dir.join(HISTORY_FILE), "generation,x,y")?)
    } else {
        None
    };
    let mut scores = Vec::with_capacity(cfg.iterations() + 1);

    if let Some(planner) = cfg.algorithm.planner() {
        let spec = cfg.maze_spec()?;
        let mut grid = ExpansionGrid::new(spec.bounds.clone(), cfg.g_expansion)?;
        grid.add(&spec.start);
        scores.push(grid.score());
        telemetry.line(
            &TelemetryRow {
                generation: 0,
                evaluations: 0,
                archive_size: 1,
                population_size: 1,
                new_outcomes: 1,
                selected: 0,
                out_of_bounds: grid.out_of_bounds(),
                score: grid.score(),
            }
            .csv(),
        )?;
        timing.line("0,0")?;
        let mut rng = stream(seed);
        let mut last = Instant::now();
        let mut failure: Option<anyhow::Error> = None;
        let mut seen = 1;
        let tree = run_planner(planner, &spec, &cfg.mp_config(), &mut rng, |it, tree, selected| {
            if failure.is_some() {
                return;
            }
            let step = it + 1;
            let new = tree.len() - seen;
            for i in seen..tree.len() {
                grid.add(&tree.position(i));
            }
            seen = tree.len();
            scores.push(grid.score());
            let row = TelemetryRow {
                generation: step,
                evaluations: step as u64,
                archive_size: tree.len(),
                population_size: tree.len(),
                new_outcomes: new,
                selected: 1,
                out_of_bounds: grid.out_of_bounds(),
                score: grid.score(),
            };
            let now = Instant::now();
            let ms = now.duration_since(last).as_secs_f64() * 1e3;
            last = now;
            let res = telemetry
                .line(&row.csv())
                .and_then(|_| timing.line(&format!("{step},{ms:.3}")))
                .and_then(|_| match history.as_mut() {
                    Some(h) => h.point(step, &tree.position(selected)),
                    None => Ok(()),
                });
            if let Err(e) = res {
                failure = Some(e);
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        if cfg.write_archive {
            fs::write(dir.join(TREE_FILE), tree.dump())?;
        }
    } else {
        let alg = cfg
            .algorithm
            .diversity()
            .expect("non-planner algorithms are diversity algorithms");
        let env = cfg.policy_env()?;
        let mut ds = cfg.ds_config()?;
        // Selections are streamed to history.csv instead of kept in memory.
        ds.log_selection = false;
        let mut ex = Explorer::new(alg, env.as_ref(), ds, seed)?;
        let mut grid = ExpansionGrid::new(env.reachable_bounds(), cfg.g_expansion)?;
        let mut outcomes = if cfg.export_outcomes {
            Some(CsvOut::create(&dir.join(OUTCOMES_FILE), "generation,x,y")?)
        } else {
            None
        };
        for p in ex.initial() {
            grid.add(&p.outcome);
            if let Some(o) = outcomes.as_mut() {
                o.point(0, &p.outcome)?;
            }
        }
        scores.push(grid.score());
        telemetry.line(
            &TelemetryRow {
                generation: 0,
                evaluations: ex.evaluations(),
                archive_size: ex.archive().len(),
                population_size: ex.population_size(),
                new_outcomes: ex.initial().len(),
                selected: 0,
                out_of_bounds: grid.out_of_bounds(),
                score: grid.score(),
            }
            .csv(),
        )?;
        timing.line("0,0")?;
        for g in 1..=cfg.n_generation {
            let t = Instant::now();
            let out = ex.step()?;
            for p in &out.new {
                grid.add(&p.outcome);
                if let Some(o) = outcomes.as_mut() {
                    o.point(g, &p.outcome)?;
                }
            }
            if let Some(h) = history.as_mut() {
                for s in &out.selected {
                    h.point(g, s)?;
                }
            }
            scores.push(grid.score());
            telemetry.line(
                &TelemetryRow {
                    generation: g,
                    evaluations: ex.evaluations(),
                    archive_size: ex.archive().len(),
                    population_size: ex.population_size(),
                    new_outcomes: out.new.len(),
                    selected: out.selected.len(),
                    out_of_bounds: grid.out_of_bounds(),
                    score: grid.score(),
                }
                .csv(),
            )?;
            timing.line(&format!("{g},{:.3}", t.elapsed().as_secs_f64() * 1e3))?;
        }
        if let Some(o) = outcomes {
            o.finish()?;
        }
        if cfg.write_archive {
            let entries = ex.archive().to_vec();
            save_archive(&dir.join(ARCHIVE_FILE), ex.bank_mut(), &entries)?;
        }
    }
    telemetry.finish()?;
    timing.finish()?;
    if let Some(h) = history {
        h.finish()?;
    }
    Ok(SeedResult {
        seed,
        scores,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every seed of `cfg` on `cfg.workers` threads and writes the run
/// directory. Returns an error if any seed failed, after writing the rest.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let report = run_collect(cfg)?;
    if !report.failures.is_empty() {
        let msgs: Vec<String> = report.failures.iter().map(|(s, m)| format!("seed {s}: {m}")).collect();
        return Err(anyhow!(
            "{} of {} runs failed:\n{}",
            msgs.len(),
            cfg.seeds.len(),
            msgs.join("\n")
        ));
    }
    Ok(report)
}

/// Like [`run`] but reports failed seeds instead of returning an error.
pub fn run_collect(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(CONFIG_FILE), cfg.serialize())?;
    let started = Instant::now();

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SeedResult, String>>>> = Mutex::new(vec![None; cfg.seeds.len()]);
    let workers = cfg.workers.min(cfg.seeds.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                let res = run_seed(cfg, seed, &seed_dir(&dir, seed)).map_err(|e| format!("{e:#}"));
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(res);
            });
        }
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (slot, &seed) in slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .zip(&cfg.seeds)
    {
        match slot {
            Some(Ok(r)) => results.push(r),
            Some(Err(m)) => failures.push((seed, m)),
            None => failures.push((seed, "not run".to_string())),
        }
    }

    let mut exp = CsvOut::create(&dir.join(EXPANSION_FILE), "run_id,seed,generation,score")?;
    for r in &results {
        let id = run_id(cfg, r.seed);
        for (g, s) in r.scores.iter().enumerate() {
            exp.line(&format!("{id},{},{g},{s:.16e}", r.seed))?;
        }
    }
    exp.finish()?;

    let mut m = String::new();
    m.push_str(&format!("config_hash = {}\n", config_hash(cfg)));
    m.push_str(&format!("code_version = {}\n", env!("CARGO_PKG_VERSION")));
    m.push_str(&format!("algorithm = {}\n", cfg.algorithm.name()));
    m.push_str(&format!("environment = {}\n", cfg.environment.name()));
    m.push_str(&format!("grid = {}\n", cfg.grid_signature()));
    m.push_str(&format!("wall_time_s = {:.3}\n", started.elapsed().as_secs_f64()));
    for r in &results {
        m.push_str(&format!("seed {} = ok {:.1} ms\n", r.seed, r.wall_ms));
    }
    for (seed, msg) in &failures {
        m.push_str(&format!("seed {seed} = failed: {}\n", msg.replace('\n', " ")));
    }
    fs::write(dir.join(MANIFEST_FILE), m)?;

    Ok(RunReport { dir, results, failures })
}
