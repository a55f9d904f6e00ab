//! Expansion degradation pooled over saved archives.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use dslab_core::environments::CellRanks;
use dslab_core::metrics::{
    expansion_degradation, BankSource, CellDegradation, ExpansionGrid, PolicySource, PooledSource,
};
use dslab_core::rng::stream;

use crate::archive::{load_archive, LoadedArchive};
use crate::config::{EnvKind, ExperimentConfig};
use crate::runner::{seed_dir, ARCHIVE_FILE};

pub use dslab_core::metrics::{DEFAULT_EXPANSIONS_PER_POLICY, DEFAULT_POLICIES_PER_CELL};

/// Archive files of every seed in a run directory.
pub fn run_archives(dir: &Path) -> Result<Vec<PathBuf>> {
    let cfg = ExperimentConfig::load(&dir.join(crate::runner::CONFIG_FILE))?;
    let paths: Vec<PathBuf> = cfg
        .seeds
        .iter()
        .map(|&s| seed_dir(dir, s).join(ARCHIVE_FILE))
        .filter(|p| p.exists())
        .collect();
    Ok(paths)
}

/// Corridor ranks of the grid cells, when known for this setup.
pub fn cell_ranks(cfg: &ExperimentConfig) -> Option<CellRanks> {
    let ranks = CellRanks::simplemaze_v1();
    (cfg.environment == EnvKind::SimpleMaze && cfg.env_file.is_none() && cfg.g_expansion == ranks.grid())
        .then_some(ranks)
}

/// Runs the degradation probe over the pooled archives. `cfg` supplies the
/// environment, mutation operator and grid.
pub fn degradation(
    cfg: &ExperimentConfig,
    archives: &mut [LoadedArchive],
    n_policies_per_cell: usize,
    n_expansions_per_policy: usize,
    seed: u64,
) -> Result<Vec<CellDegradation>> {
    if archives.is_empty() {
        bail!("no archives given");
    }
    let env = cfg.policy_env()?;
    for a in archives.iter() {
        if a.bank.topology() != env.topology() {
            bail!("archive topology does not match the configured policy");
        }
    }
    let grid = ExpansionGrid::new(env.reachable_bounds(), cfg.g_expansion)?;
    let mut sources: Vec<BankSource> = archives
        .iter_mut()
        .map(|a| {
            let entries = a.policy_outcomes();
            BankSource {
                bank: &mut a.bank,
                entries,
            }
        })
        .collect();
    let parts: Vec<&mut dyn PolicySource> = sources.iter_mut().map(|s| s as &mut dyn PolicySource).collect();
    let mut pooled = PooledSource::new(parts);
    let mutation = cfg.mutation()?;
    Ok(expansion_degradation(
        env.as_ref(),
        &mut pooled,
        &grid,
        n_policies_per_cell,
        n_expansions_per_policy,
        &mutation,
        &mut stream(seed),
    )?)
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<LoadedArchive>> {
    if paths.is_empty() {
        bail!("no archives given");
    }
    paths.iter().map(|p| load_archive(p)).collect()
}

pub fn to_csv(report: &[CellDegradation], ranks: Option<&CellRanks>) -> String {
    let mut s = String::from("cell_x,cell_y,rank,mean_dist,n_parents,n_expansions\n");
    for c in report {
        let rank = ranks
            .map(|r| r.rank(c.cell_x, c.cell_y).to_string())
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{:.16e},{},{}",
            c.cell_x, c.cell_y, rank, c.mean_dist, c.n_parents, c.n_expansions
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AlgoKind;

    #[test]
    fn defaults_are_the_probe_sizes() {
        assert_eq!(DEFAULT_POLICIES_PER_CELL, 200);
        assert_eq!(DEFAULT_EXPANSIONS_PER_POLICY, 100);
    }

    #[test]
    fn no_archives_is_an_error() {
        let cfg = ExperimentConfig::defaults(AlgoKind::Ns, EnvKind::SimpleMaze);
        assert!(degradation(&cfg, &mut [], 10, 10, 0).is_err());
        assert!(load_all(&[]).is_err());
    }

    #[test]
    fn ranks_only_for_the_bundled_grid() {
        let mut cfg = ExperimentConfig::defaults(AlgoKind::Ns, EnvKind::SimpleMaze);
        assert!(cell_ranks(&cfg).is_some());
        cfg.g_expansion = 5;
        assert!(cell_ranks(&cfg).is_none());
    }
}
