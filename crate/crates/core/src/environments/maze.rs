//! SimpleMaze: a point agent moved by bounded displacements among wall
//! segments. The policy observes only its position.

use std::collections::BinaryHeap;
use std::path::Path;

use super::geometry::{segments_intersect, Segment};
use super::{PolicyEnv, Trajectory};
use crate::error::{Error, Result};
use crate::policies::{MlpPolicy, Scratch, Topology};
use crate::sel_exp::OutcomeBounds;

/// Canonical layout file.
pub const SIMPLEMAZE_V1: &str = include_str!("../../data/simplemaze-v1.maze");
/// Corridor-order ranks of the 4×4 expansion cells of [`SIMPLEMAZE_V1`].
pub const SIMPLEMAZE_V1_RANKS: &str = include_str!("../../data/simplemaze-v1.ranks");

pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_ACTION_BOUND: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct MazeSpec {
    pub bounds: OutcomeBounds,
    pub walls: Vec<Segment>,
    pub start: [f64; 2],
    pub horizon: usize,
    pub action_bound: [f64; 2],
}

/// Result of a single attempted move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Moved([f64; 2]),
    Blocked,
}

fn parse_reals(parts: &[&str], n: usize, line: usize, name: &str) -> Result<Vec<f64>> {
    if parts.len() != n {
        return Err(Error::Parse {
            source_name: name.into(),
            line,
            msg: format!("expected {n} numbers, found {}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>().map_err(|e| Error::Parse {
                source_name: name.into(),
                line,
                msg: format!("bad number {p:?}: {e}"),
            })
        })
        .collect()
}

impl MazeSpec {
    pub fn simplemaze_v1() -> Self {
        Self::parse(SIMPLEMAZE_V1, "simplemaze-v1").expect("bundled layout is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the line-oriented layout format: `bounds x0 y0 x1 y1`,
    /// `start x y`, `wall ax ay bx by`, with `#` comments.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut bounds = None;
        let mut start = None;
        let mut walls = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let parts: Vec<&str> = content.split_whitespace().collect();
            let err = |msg: String| Error::Parse {
                source_name: name.into(),
                line,
                msg,
            };
            match parts[0] {
                "bounds" => {
                    if bounds.is_some() {
                        return Err(err("duplicate bounds".into()));
                    }
                    let v = parse_reals(&parts[1..], 4, line, name)?;
                    bounds =
                        Some(OutcomeBounds::new(vec![v[0], v[1]], vec![v[2], v[3]]).map_err(|e| err(e.to_string()))?);
                }
                "start" => {
                    if start.is_some() {
                        return Err(err("duplicate start".into()));
                    }
                    let v = parse_reals(&parts[1..], 2, line, name)?;
                    start = Some([v[0], v[1]]);
                }
                "wall" => {
                    let v = parse_reals(&parts[1..], 4, line, name)?;
                    walls.push(Segment::new([v[0], v[1]], [v[2], v[3]]));
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        let spec = MazeSpec {
            bounds: bounds.ok_or_else(|| Error::invalid(format!("{name}: missing bounds")))?,
            start: start.ok_or_else(|| Error::invalid(format!("{name}: missing start")))?,
            walls,
            horizon: DEFAULT_HORIZON,
            action_bound: [DEFAULT_ACTION_BOUND; 2],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.dim() != 2 {
            return Err(Error::invalid("maze bounds must be two-dimensional"));
        }
        if !self.bounds.contains(&self.start) {
            return Err(Error::invalid(format!("start {:?} is outside the bounds", self.start)));
        }
        for (i, w) in self.walls.iter().enumerate() {
            if !self.bounds.contains(&w.a) || !self.bounds.contains(&w.b) {
                return Err(Error::invalid(format!("wall {i} leaves the bounds")));
            }
            if w.contains_point(self.start) {
                return Err(Error::invalid(format!("start lies on wall {i}")));
            }
        }
        if self.action_bound.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::invalid("action bounds must be positive"));
        }
        Ok(())
    }

    /// Serialises back to the layout format.
    pub fn to_text(&self) -> String {
        let (lo, hi) = (self.bounds.lower(), self.bounds.upper());
        let mut s = format!(
            "bounds {} {} {} {}\nstart {} {}\n",
            lo[0], lo[1], hi[0], hi[1], self.start[0], self.start[1]
        );
        for w in &self.walls {
            s.push_str(&format!("wall {} {} {} {}\n", w.a[0], w.a[1], w.b[0], w.b[1]));
        }
        s
    }

    pub fn clamp_action(&self, action: [f64; 2]) -> [f64; 2] {
        [
            action[0].clamp(-self.action_bound[0], self.action_bound[0]),
            action[1].clamp(-self.action_bound[1], self.action_bound[1]),
        ]
    }

    /// Segment from `from` to `to` stays in bounds and touches no wall.
    pub fn is_free_move(&self, from: [f64; 2], to: [f64; 2]) -> bool {
        self.bounds.contains(&to) && !self.walls.iter().any(|w| segments_intersect(from, to, w.a, w.b))
    }

    /// Applies a clamped displacement; a move that would touch a wall or leave
    /// the bounds is cancelled entirely.
    pub fn try_step(&self, position: [f64; 2], action: [f64; 2]) -> Step {
        let a = self.clamp_action(action);
        let next = [position[0] + a[0], position[1] + a[1]];
        if self.is_free_move(position, next) {
            Step::Moved(next)
        } else {
            Step::Blocked
        }
    }

    pub fn step(&self, position: [f64; 2], action: [f64; 2]) -> [f64; 2] {
        match self.try_step(position, action) {
            Step::Moved(p) => p,
            Step::Blocked => position,
        }
    }

    fn check_policy(&self, policy: &MlpPolicy) -> Result<()> {
        let t = policy.topology();
        if t.n_inputs() != 2 || t.n_outputs() != 2 {
            return Err(Error::invalid(format!(
                "maze policies map 2 inputs to 2 outputs, got {} -> {}",
                t.n_inputs(),
                t.n_outputs()
            )));
        }
        Ok(())
    }

    fn run<F: FnMut([f64; 2])>(&self, policy: &MlpPolicy, mut visit: F) -> [f64; 2] {
        let mut scratch = Scratch::default();
        let mut pos = self.start;
        let mut action = [0.0; 2];
        visit(pos);
        for _ in 0..self.horizon {
            policy.forward_into(&pos, &mut scratch, &mut action);
            pos = self.step(pos, action);
            visit(pos);
        }
        pos
    }

    /// Full rollout from the start; the outcome is the final position.
    pub fn rollout(&self, policy: &MlpPolicy) -> Result<Trajectory> {
        self.check_policy(policy)?;
        let mut states = Vec::with_capacity(self.horizon + 1);
        let end = self.run(policy, |p| states.push(p.to_vec()));
        Ok(Trajectory {
            states,
            outcome: end.to_vec(),
        })
    }

    pub fn final_position(&self, policy: &MlpPolicy) -> Result<[f64; 2]> {
        self.check_policy(policy)?;
        Ok(self.run(policy, |_| {}))
    }
}

/// SimpleMaze as a policy environment: 2 inputs (position), 2 outputs
/// (displacement scaled to the action bounds).
#[derive(Debug, Clone)]
pub struct MazeEnv {
    spec: MazeSpec,
    topology: Topology,
    name: String,
}

impl MazeEnv {
    pub fn new(spec: MazeSpec) -> Self {
        Self::with_topology(spec, Topology::mlp(2, 2)).expect("2-in/2-out topology")
    }

    pub fn with_topology(spec: MazeSpec, topology: Topology) -> Result<Self> {
        if topology.n_inputs() != 2 || topology.n_outputs() != 2 {
            return Err(Error::invalid("maze policies map 2 inputs to 2 outputs"));
        }
        Ok(MazeEnv {
            spec,
            topology,
            name: "simplemaze".into(),
        })
    }

    pub fn spec(&self) -> &MazeSpec {
        &self.spec
    }

    pub fn policy(&self, params: &[f64]) -> Result<MlpPolicy> {
        MlpPolicy::new(self.topology.clone(), params, self.spec.action_bound.to_vec())
    }
}

impl PolicyEnv for MazeEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn topology(&self) -> &Topology {
        &self.topology
    }

    fn reachable_bounds(&self) -> OutcomeBounds {
        self.spec.bounds.clone()
    }

    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        Ok(self.spec.final_position(&self.policy(params)?)?.to_vec())
    }

    fn trajectory(&self, params: &[f64]) -> Result<Trajectory> {
        self.spec.rollout(&self.policy(params)?)
    }
}

/// Expansion-cell ranks along the corridor sequence of a maze.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRanks {
    grid: usize,
    ranks: Vec<u32>,
}

impl CellRanks {
    /// Format: `grid G` followed by one `rank cx cy r` line per cell.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut grid = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let parts: Vec<&str> = content.split_whitespace().collect();
            let err = |msg: String| Error::Parse {
                source_name: name.into(),
                line,
                msg,
            };
            let ints = |xs: &[&str]| -> Result<Vec<usize>> {
                xs.iter()
                    .map(|x| x.parse::<usize>().map_err(|e| err(format!("bad integer {x:?}: {e}"))))
                    .collect()
            };
            match parts[0] {
                "grid" if parts.len() == 2 => grid = Some(ints(&parts[1..])?[0]),
                "rank" if parts.len() == 4 => entries.push((ints(&parts[1..])?, line)),
                _ => return Err(err(format!("unrecognised line {content:?}"))),
            }
        }
        let grid = grid.ok_or_else(|| Error::invalid(format!("{name}: missing grid line")))?;
        let mut ranks = vec![None; grid * grid];
        for (v, line) in entries {
            let (cx, cy, r) = (v[0], v[1], v[2]);
            if cx >= grid || cy >= grid {
                return Err(Error::Parse {
                    source_name: name.into(),
                    line,
                    msg: format!("cell ({cx}, {cy}) outside a {grid}x{grid} grid"),
                });
            }
            ranks[cy * grid + cx] = Some(r as u32);
        }
        let ranks = ranks
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::invalid(format!("{name}: cell {} has no rank", i))))
            .collect::<Result<Vec<_>>>()?;
        Ok(CellRanks { grid, ranks })
    }

    pub fn simplemaze_v1() -> Self {
        Self::parse(SIMPLEMAZE_V1_RANKS, "simplemaze-v1.ranks").expect("bundled ranks are valid")
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn rank(&self, cx: usize, cy: usize) -> u32 {
        self.ranks[cy * self.grid + cx]
    }

    pub fn max_rank(&self) -> u32 {
        *self.ranks.iter().max().unwrap()
    }

    pub fn cells_with_rank(&self, rank: u32) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for cy in 0..self.grid {
            for cx in 0..self.grid {
                if self.rank(cx, cy) == rank {
                    out.push((cx, cy));
                }
            }
        }
        out
    }
}

/// Geodesic (wall-respecting) distance from the maze start, measured on a
/// regular lattice of free moves.
#[derive(Debug, Clone)]
pub struct ProgressMap {
    spec: MazeSpec,
    n: usize,
    dist: Vec<f64>,
}

#[derive(PartialEq)]
struct QueueItem(f64, usize);
impl Eq for QueueItem {}
impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl ProgressMap {
    pub fn new(spec: &MazeSpec, resolution: usize) -> Self {
        let n = resolution.max(2);
        let mut dist = vec![f64::INFINITY; n * n];
        let map = ProgressMap {
            spec: spec.clone(),
            n,
            dist: Vec::new(),
        };
        let mut heap = BinaryHeap::new();
        for node in map.visible_nodes(spec.start) {
            let d = distance(spec.start, map.node_pos(node));
            if d < dist[node] {
                dist[node] = d;
                heap.push(QueueItem(d, node));
            }
        }
        while let Some(QueueItem(d, node)) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            let (i, j) = (node % n, node / n);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if (di == 0 && dj == 0) || ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                        continue;
                    }
                    let next = nj as usize * n + ni as usize;
                    let (a, b) = (map.node_pos(node), map.node_pos(next));
                    if !map.spec.is_free_move(a, b) {
                        continue;
                    }
                    let nd = d + distance(a, b);
                    if nd < dist[next] {
                        dist[next] = nd;
                        heap.push(QueueItem(nd, next));
                    }
                }
            }
        }
        ProgressMap { dist, ..map }
    }

    fn node_pos(&self, node: usize) -> [f64; 2] {
        let (lo, hi) = (self.spec.bounds.lower(), self.spec.bounds.upper());
        let (i, j) = (node % self.n, node / self.n);
        [
            lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / self.n as f64,
            lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / self.n as f64,
        ]
    }

    fn visible_nodes(&self, p: [f64; 2]) -> Vec<usize> {
        let (lo, hi) = (self.spec.bounds.lower(), self.spec.bounds.upper());
        let fi = ((p[0] - lo[0]) / (hi[0] - lo[0]) * self.n as f64 - 0.5).floor() as i64;
        let fj = ((p[1] - lo[1]) / (hi[1] - lo[1]) * self.n as f64 - 0.5).floor() as i64;
        let mut out = Vec::new();
        for dj in -1..=2 {
            for di in -1..=2 {
                let (i, j) = (fi + di, fj + dj);
                if i < 0 || j < 0 || i >= self.n as i64 || j >= self.n as i64 {
                    continue;
                }
                let node = j as usize * self.n + i as usize;
                if !self
                    .spec
                    .walls
                    .iter()
                    .any(|w| segments_intersect(p, self.node_pos(node), w.a, w.b))
                {
                    out.push(node);
                }
            }
        }
        out
    }

    /// Approximate geodesic distance from the start to `p`.
    pub fn progress(&self, p: [f64; 2]) -> f64 {
        self.visible_nodes(p)
            .into_iter()
            .map(|node| self.dist.get(node).copied().unwrap_or(f64::INFINITY) + distance(p, self.node_pos(node)))
            .fold(f64::INFINITY, f64::min)
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
