//! Experiment harness: configs, multi-seed runs, aggregation, degradation
//! probes and SVG figures.

pub mod aggregate;
pub mod archive;
pub mod config;
pub mod degradation;
pub mod render;
pub mod runner;

pub use config::{AlgoKind, ConfigError, EnvKind, ExperimentConfig};
pub use runner::{run, run_collect, RunReport, SeedResult};

/// Text of the `defaults` subcommand: every key per (algorithm, environment).
pub fn defaults_table() -> String {
    let columns = [
        ExperimentConfig::defaults(AlgoKind::Rrt, EnvKind::SimpleMaze),
        ExperimentConfig::defaults(AlgoKind::Est, EnvKind::SimpleMaze),
        ExperimentConfig::defaults(AlgoKind::Ns, EnvKind::Ballistic3d),
        ExperimentConfig::defaults(AlgoKind::Ns, EnvKind::SimpleMaze),
    ];
    let headers = ["rrt/simplemaze", "est/simplemaze", "ds/ballistic3d", "ds/simplemaze"];
    let mut out = format!("{:<18}", "key");
    for h in headers {
        out.push_str(&format!(" {h:<18}"));
    }
    out.push('\n');
    for key in config::known_keys() {
        if matches!(key, "algorithm" | "environment" | "seeds" | "output_dir" | "workers") {
            continue;
        }
        let cells: Vec<String> = columns
            .iter()
            .map(|c| c.get(key).unwrap_or_else(|| "-".to_string()))
            .collect();
        out.push_str(&format!("{key:<18}"));
        for c in cells {
            out.push_str(&format!(" {c:<18}"));
        }
        out.push('\n');
    }
    out
}
