//! Cross-seed statistics over run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::{AlgoKind, ExperimentConfig};
use crate::runner::{CONFIG_FILE, EXPANSION_FILE};

/// Expansion curves loaded from one run directory.
#[derive(Debug, Clone)]
pub struct RunCurves {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    /// `(seed, scores by generation)` in file order.
    pub curves: Vec<(u64, Vec<f64>)>,
}

pub fn load_run(dir: &Path) -> Result<RunCurves> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let path = dir.join(EXPANSION_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut curves: Vec<(u64, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("{}:{}: expected 4 fields", path.display(), i + 1);
        }
        let seed: u64 = f[1]
            .parse()
            .with_context(|| format!("{}:{}: seed", path.display(), i + 1))?;
        let g: usize = f[2]
            .parse()
            .with_context(|| format!("{}:{}: generation", path.display(), i + 1))?;
        let s: f64 = f[3]
            .parse()
            .with_context(|| format!("{}:{}: score", path.display(), i + 1))?;
        if curves.last().map(|c| c.0) != Some(seed) {
            curves.push((seed, Vec::new()));
        }
        let c = &mut curves.last_mut().expect("pushed above").1;
        if g != c.len() {
            bail!("{}:{}: generations out of order", path.display(), i + 1);
        }
        c.push(s);
    }
    Ok(RunCurves {
        dir: dir.to_path_buf(),
        config,
        curves,
    })
}

/// Mean and population standard deviation (divides by n).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: AlgoKind,
    pub checkpoint: usize,
    pub n_runs: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    pub checkpoint: usize,
    /// Algorithms from highest to lowest mean.
    pub ranking: Vec<(AlgoKind, f64)>,
}

impl Ordering {
    pub fn leader(&self) -> AlgoKind {
        self.ranking[0].0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub environment: String,
    pub rows: Vec<SummaryRow>,
    pub ordering: Vec<Ordering>,
}

impl Summary {
    pub fn row(&self, algorithm: AlgoKind, checkpoint: usize) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.checkpoint == checkpoint)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# std_pop is the population standard deviation (divides by n_runs)\n");
        s.push_str("algorithm,environment,checkpoint,n_runs,mean,std_pop\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.16e},{:.16e}",
                r.algorithm.name(),
                self.environment,
                r.checkpoint,
                r.n_runs,
                r.mean,
                r.std
            );
        }
        s
    }

    pub fn ordering_csv(&self) -> String {
        let mut s = String::from("checkpoint,leader,order\n");
        for o in &self.ordering {
            let order: Vec<&str> = o.ranking.iter().map(|(a, _)| a.name()).collect();
            let _ = writeln!(s, "{},{},{}", o.checkpoint, o.leader().name(), order.join(">"));
        }
        s
    }
}

/// Per-checkpoint mean/std across all seeds of each algorithm. Runs of the
/// same algorithm in several directories are pooled.
pub fn aggregate(runs: &[RunCurves], checkpoints: &[usize]) -> Result<Summary> {
    let Some(first) = runs.first() else {
        bail!("no runs to aggregate");
    };
    let signature = first.config.grid_signature();
    for r in runs {
        if r.config.grid_signature() != signature {
            bail!(
                "mismatched grids: {} has `{}`, {} has `{}`",
                first.dir.display(),
                signature,
                r.dir.display(),
                r.config.grid_signature()
            );
        }
    }
    let mut by_algo: BTreeMap<AlgoKind, Vec<&Vec<f64>>> = BTreeMap::new();
    for r in runs {
        for (_, c) in &r.curves {
            by_algo.entry(r.config.algorithm).or_default().push(c);
        }
    }
    let mut rows = Vec::new();
    let mut ordering = Vec::new();
    for &cp in checkpoints {
        let mut ranking = Vec::new();
        for (&algo, curves) in &by_algo {
            if curves.is_empty() {
                continue;
            }
            let xs: Vec<f64> = curves
                .iter()
                .map(|c| c.get(cp).copied())
                .collect::<Option<_>>()
                .with_context(|| format!("{} runs stop before checkpoint {cp}", algo.name()))?;
            let (mean, std) = mean_std(&xs);
            rows.push(SummaryRow {
                algorithm: algo,
                checkpoint: cp,
                n_runs: xs.len(),
                mean,
                std,
            });
            ranking.push((algo, mean));
        }
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ordering.push(Ordering {
            checkpoint: cp,
            ranking,
        });
    }
    Ok(Summary {
        environment: first.config.environment.name().to_string(),
        rows,
        ordering,
    })
}
