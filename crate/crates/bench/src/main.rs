use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dslab_bench::aggregate::{aggregate, load_run};
use dslab_bench::config::parse_pairs;
use dslab_bench::degradation::{
    cell_ranks, degradation, load_all, run_archives, to_csv, DEFAULT_EXPANSIONS_PER_POLICY, DEFAULT_POLICIES_PER_CELL,
};
use dslab_bench::render::{render, Kind};
use dslab_bench::runner::CONFIG_FILE;
use dslab_bench::{defaults_table, run, ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dslab", version, about = "Selection-expansion exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment and write its run directory.
    Run {
        /// Config file in `key = value` form.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        env: Option<String>,
        /// Seed list such as `1,4,7..9`.
        #[arg(long)]
        seeds: Option<String>,
        /// Inclusive seed range `A..B`.
        #[arg(long)]
        seed_range: Option<String>,
        /// Iterations (planners) or generations (diversity algorithms).
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Any config key as `--KEY VALUE` or `--KEY=VALUE`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0.., value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Mean and population std of expansion scores at checkpoints.
    Aggregate {
        /// Comma-separated generation indices.
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<usize>,
        /// Where to write summary.csv; the ordering report goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Draw a tree, scatter or curve figure as SVG.
    Render {
        #[arg(long, value_parser = ["tree", "scatter", "curve"])]
        kind: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Parent-to-child outcome distance per grid cell over saved archives.
    Degradation {
        /// Config supplying environment, mutation and grid; defaults to the
        /// first run directory's config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directories whose seed archives are pooled.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Individual archive files.
        #[arg(long, num_args = 1..)]
        archives: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_POLICIES_PER_CELL)]
        per_cell: usize,
        #[arg(long, default_value_t = DEFAULT_EXPANSIONS_PER_POLICY)]
        expansions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "degradation.csv")]
        out: PathBuf,
    },
    /// Print the default hyper-parameters for every setup.
    Defaults,
}

/// Turns `--KEY VALUE` / `--KEY=VALUE` tokens into pairs.
fn override_pairs(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(t) = it.next() {
        let Some(key) = t.strip_prefix("--") else {
            bail!(ConfigError {
                key: t.clone(),
                msg: "expected --KEY VALUE".into()
            });
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().with_context(|| ConfigError {
                    key: key.to_string(),
                    msg: "missing value".into(),
                })?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    config: Option<&Path>,
    algo: Option<String>,
    env: Option<String>,
    seeds: Option<String>,
    seed_range: Option<String>,
    iters: Option<usize>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    overrides: &[String],
) -> Result<ExperimentConfig> {
    let mut pairs = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    if let Some(a) = algo {
        pairs.push(("algorithm".into(), a));
    }
    if let Some(e) = env {
        pairs.push(("environment".into(), e));
    }
    let extra = override_pairs(overrides)?;
    let out_given = out.is_some() || extra.iter().any(|(k, _)| k == "output_dir");
    pairs.extend(extra);
    if let Some(s) = seeds {
        pairs.push(("seeds".into(), s));
    }
    if let Some(r) = seed_range {
        if !r.contains("..") {
            bail!(ConfigError {
                key: "seed-range".into(),
                msg: format!("expected A..B, got `{r}`")
            });
        }
        pairs.push(("seeds".into(), r));
    }
    if let Some(w) = workers {
        pairs.push(("workers".into(), w.to_string()));
    }
    let mut cfg = ExperimentConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    if let Some(n) = iters {
        cfg.set_iterations(n);
    }
    if !out_given {
        cfg.apply_env_overrides();
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            algo,
            env,
            seeds,
            seed_range,
            iters,
            out,
            workers,
            overrides,
        } => {
            let cfg = build_config(
                config.as_deref(),
                algo,
                env,
                seeds,
                seed_range,
                iters,
                out,
                workers,
                &overrides,
            )?;
            let report = run(&cfg)?;
            println!(
                "{} runs of {} on {} written to {}",
                report.results.len(),
                cfg.algorithm.name(),
                cfg.environment.name(),
                report.dir.display()
            );
        }
        Command::Aggregate { checkpoints, out, runs } => {
            let loaded = runs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
            let summary = aggregate(&loaded, &checkpoints)?;
            let out = out.unwrap_or_else(|| PathBuf::from("summary.csv"));
            std::fs::write(&out, summary.to_csv()).with_context(|| format!("writing {}", out.display()))?;
            let ordering = out.with_file_name("ordering.csv");
            std::fs::write(&ordering, summary.ordering_csv())?;
            print!("{}", summary.to_csv());
            print!("{}", summary.ordering_csv());
        }
        Command::Render { kind, seed, out, runs } => {
            let kind = Kind::parse(&kind).expect("clap restricts the values");
            let dirs: Vec<&Path> = runs.iter().map(PathBuf::as_path).collect();
            let svg = render(&dirs, kind, seed)?;
            let out = out.unwrap_or_else(|| {
                runs[0].join(format!(
                    "{}.svg",
                    match kind {
                        Kind::Tree => "tree",
                        Kind::Scatter => "scatter",
                        Kind::Curve => "curve",
                    }
                ))
            });
            std::fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
        Command::Degradation {
            config,
            runs,
            archives,
            per_cell,
            expansions,
            seed,
            out,
        } => {
            let mut paths = archives;
            for d in &runs {
                paths.extend(run_archives(d)?);
            }
            if paths.is_empty() {
                bail!("no archives given");
            }
            let cfg_path = match (config, runs.first()) {
                (Some(c), _) => c,
                (None, Some(d)) => d.join(CONFIG_FILE),
                (None, None) => bail!("--config is required when only archive files are given"),
            };
            let cfg = ExperimentConfig::load(&cfg_path)?;
            println!(
                "{} archives, {per_cell} selected policies per cell, {expansions} expansions per policy",
                paths.len()
            );
            let mut loaded = load_all(&paths)?;
            let report = degradation(&cfg, &mut loaded, per_cell, expansions, seed)?;
            let csv = to_csv(&report, cell_ranks(&cfg).as_ref());
            std::fs::write(&out, &csv).with_context(|| format!("writing {}", out.display()))?;
            print!("{csv}");
        }
        Command::Defaults => print!("{}", defaults_table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
