//! Self-contained SVG figures: planner trees over the maze, outcome scatters
//! coloured by generation, and mean ± std expansion curves.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dslab_core::environments::Segment;
use dslab_core::planners::parse_tree_dump;
use dslab_core::sel_exp::OutcomeBounds;

use crate::aggregate::{load_run, mean_std};
use crate::config::{EnvKind, ExperimentConfig};
use crate::runner::{seed_dir, CONFIG_FILE, HISTORY_FILE, OUTCOMES_FILE, TREE_FILE};

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Tree,
    Scatter,
    Curve,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tree" => Some(Kind::Tree),
            "scatter" => Some(Kind::Scatter),
            "curve" => Some(Kind::Curve),
            _ => None,
        }
    }
}

/// Maps outcome coordinates onto the square canvas, y up.
struct Frame {
    lo: [f64; 2],
    scale: f64,
}

impl Frame {
    fn new(bounds: &OutcomeBounds) -> Self {
        let (lo, hi) = (bounds.lower(), bounds.upper());
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        Frame {
            lo: [lo[0], lo[1]],
            scale: (SIZE - 2.0 * MARGIN) / extent,
        }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.lo[0]) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.lo[1]) * self.scale
    }
}

fn open(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
}

fn frame_box(out: &mut String, f: &Frame, bounds: &OutcomeBounds) {
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let _ = writeln!(
        out,
        r#"<rect class="bounds" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="2"/>"#,
        f.x(lo[0]),
        f.y(hi[1]),
        (hi[0] - lo[0]) * f.scale,
        (hi[1] - lo[1]) * f.scale
    );
}

fn walls(out: &mut String, f: &Frame, walls: &[Segment]) {
    for w in walls {
        let _ = writeln!(
            out,
            r#"<line class="wall" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="4"/>"#,
            f.x(w.a[0]),
            f.y(w.a[1]),
            f.x(w.b[0]),
            f.y(w.b[1])
        );
    }
}

/// Maze walls plus one `class="edge"` line per node with a parent.
pub fn tree_svg(
    bounds: &OutcomeBounds,
    wall_list: &[Segment],
    nodes: &[(u64, Option<u64>, [f64; 2], [f64; 2])],
) -> String {
    let f = Frame::new(bounds);
    let mut out = String::new();
    open(&mut out);
    frame_box(&mut out, &f, bounds);
    walls(&mut out, &f, wall_list);
    let pos: HashMap<u64, [f64; 2]> = nodes.iter().map(|n| (n.0, n.2)).collect();
    for (_, parent, p, _) in nodes {
        if let Some(q) = parent.and_then(|id| pos.get(&id)) {
            let _ = writeln!(
                out,
                r#"<line class="edge" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="1"/>"#,
                f.x(q[0]),
                f.y(q[1]),
                f.x(p[0]),
                f.y(p[1]),
                PALETTE[0]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Outcome points coloured from blue (early) to red (late).
pub fn scatter_svg(bounds: &OutcomeBounds, wall_list: &[Segment], points: &[(usize, [f64; 2])]) -> String {
    let f = Frame::new(bounds);
    let mut out = String::new();
    open(&mut out);
    frame_box(&mut out, &f, bounds);
    let g_max = points.iter().map(|p| p.0).max().unwrap_or(0).max(1) as f64;
    for (g, p) in points {
        let hue = 240.0 * (1.0 - *g as f64 / g_max);
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="1.5" fill="hsl({hue:.0},80%,45%)"/>"#,
            f.x(p[0]),
            f.y(p[1])
        );
    }
    walls(&mut out, &f, wall_list);
    out.push_str("</svg>\n");
    out
}

/// Mean curves with ± std bands; scores are in [0, 1].
pub fn curve_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    open(&mut out);
    let len = series.iter().map(|s| s.1.len()).max().unwrap_or(1).max(2) - 1;
    let x = |g: usize| MARGIN + g as f64 / len as f64 * (SIZE - 2.0 * MARGIN);
    let y = |v: f64| SIZE - MARGIN - v.clamp(0.0, 1.0) * (SIZE - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect class="axes" x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        w = SIZE - 2.0 * MARGIN
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(g, (m, s))| format!("{:.2},{:.2}", x(g), y(m + s)))
            .collect();
        let lower: Vec<String> = pts
            .iter()
            .enumerate()
            .rev()
            .map(|(g, (m, s))| format!("{:.2},{:.2}", x(g), y(m - s)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon class="band" points="{} {}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let mean: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(g, (m, _))| format!("{:.2},{:.2}", x(g), y(*m)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            mean.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.0}" fill="{colour}" font-family="sans-serif" font-size="14">{name}</text>"#,
            MARGIN + 10.0,
            MARGIN + 20.0 * (i as f64 + 1.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn outcome_frame(cfg: &ExperimentConfig) -> Result<(OutcomeBounds, Vec<Segment>)> {
    Ok(match cfg.environment {
        EnvKind::SimpleMaze => {
            let spec = cfg.maze_spec()?;
            (spec.bounds.clone(), spec.walls.clone())
        }
        EnvKind::Ballistic3d => (cfg.policy_env()?.reachable_bounds(), Vec::new()),
    })
}

fn read_points(path: &Path) -> Result<Vec<(usize, [f64; 2])>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("absent data: {}", path.display()))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let parse = || -> Option<(usize, [f64; 2])> {
            Some((
                f.first()?.parse().ok()?,
                [f.get(1)?.parse().ok()?, f.get(2)?.parse().ok()?],
            ))
        };
        pts.push(parse().with_context(|| format!("{}:{}: malformed row", path.display(), i + 1))?);
    }
    Ok(pts)
}

/// Renders one figure from run directories. Tree and scatter use the first
/// directory and `seed` (default: its first seed); curves overlay every
/// directory.
pub fn render(dirs: &[&Path], kind: Kind, seed: Option<u64>) -> Result<String> {
    let Some(&dir) = dirs.first() else {
        bail!("no run directory given");
    };
    let cfg = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    match kind {
        Kind::Tree => {
            if !cfg.algorithm.is_planner() {
                bail!("absent data: {} is not a planner run", dir.display());
            }
            let path = seed_dir(dir, seed).join(TREE_FILE);
            let text = std::fs::read_to_string(&path).with_context(|| format!("absent data: {}", path.display()))?;
            let nodes = parse_tree_dump(&text)?;
            let (bounds, w) = outcome_frame(&cfg)?;
            Ok(tree_svg(&bounds, &w, &nodes))
        }
        Kind::Scatter => {
            let sd = seed_dir(dir, seed);
            let path = [OUTCOMES_FILE, HISTORY_FILE]
                .iter()
                .map(|f| sd.join(f))
                .find(|p| p.exists())
                .with_context(|| format!("absent data: no outcomes or history in {}", sd.display()))?;
            let pts = read_points(&path)?;
            let (bounds, w) = outcome_frame(&cfg)?;
            Ok(scatter_svg(&bounds, &w, &pts))
        }
        Kind::Curve => {
            let mut series = Vec::new();
            for d in dirs {
                let run = load_run(d)?;
                if run.curves.is_empty() {
                    bail!("absent data: {} has no expansion curves", d.display());
                }
                let len = run.curves.iter().map(|c| c.1.len()).min().unwrap_or(0);
                let pts = (0..len)
                    .map(|g| mean_std(&run.curves.iter().map(|c| c.1[g]).collect::<Vec<_>>()))
                    .collect();
                series.push((run.config.algorithm.name().to_string(), pts));
            }
            Ok(curve_svg(&series))
        }
    }
}
