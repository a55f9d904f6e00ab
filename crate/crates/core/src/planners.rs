//! Model-free tree planners in the maze: RRT and the EST variant with
//! k-nearest-neighbour weights. Each expansion applies one random control
//! from the selected node; blocked expansions add nothing.

use std::fmt::Write as _;

use rand::{Rng, RngCore};

use crate::environments::{MazeSpec, Step};
use crate::error::{Error, Result};
use crate::sel_exp::{
    run_loop, sample_proportionate, select_goal_nearest, ArchiveStore, Evaluator, Expander, LoopHook, SamplePair,
    Selector,
};
use crate::spatial::{dist2, Neighbor};

pub const DEFAULT_EST_K: usize = 15;
pub const DEFAULT_R_NEIGH: f64 = 0.2;
pub const DEFAULT_N_SAMPLES: usize = 10;

/// Tree nodes are samples whose outcome is the maze position and whose
/// parameters are the control that produced them (zero for the root).
pub type MpNode = SamplePair<[f64; 2]>;

#[derive(Debug, Clone)]
pub struct MpTree {
    store: ArchiveStore<[f64; 2]>,
}

impl MpTree {
    pub fn new(root: [f64; 2]) -> Self {
        // Single-node generations; the main tree is rebuilt every 32 nodes.
        let mut store = ArchiveStore::with_update_period(2, 32).expect("2D store");
        store.insert([0.0; 2], root.to_vec(), None, 0).expect("root fits");
        MpTree { store }
    }

    pub fn store(&self) -> &ArchiveStore<[f64; 2]> {
        &self.store
    }

    pub fn nodes(&self) -> &[MpNode] {
        self.store.entries()
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        let o = &self.store.entries()[i].outcome;
        [o[0], o[1]]
    }

    /// Re-checks every edge against the maze step rule.
    pub fn validate(&self, spec: &MazeSpec, control_steps: usize) -> Result<()> {
        for (i, n) in self.nodes().iter().enumerate() {
            if n.id != i as u64 {
                return Err(Error::invalid(format!("node {i} carries id {}", n.id)));
            }
            if !spec.bounds.contains(&n.outcome) {
                return Err(Error::invalid(format!("node {i} is out of bounds")));
            }
            let Some(p) = n.parent_id else {
                if i != 0 {
                    return Err(Error::invalid(format!("node {i} has no parent")));
                }
                continue;
            };
            if p >= n.id {
                return Err(Error::invalid(format!("node {i} has parent {p}")));
            }
            let expected = propagate(spec, self.position(p as usize), n.params, control_steps);
            if expected != Some([n.outcome[0], n.outcome[1]]) {
                return Err(Error::invalid(format!("edge {p} -> {i} violates the step rule")));
            }
        }
        Ok(())
    }

    /// One line per node: `id parent x y cx cy`, parent -1 for the root.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for n in self.nodes() {
            let parent = n.parent_id.map_or(-1, |p| p as i64);
            writeln!(
                s,
                "{} {} {:.16e} {:.16e} {:.16e} {:.16e}",
                n.id, parent, n.outcome[0], n.outcome[1], n.params[0], n.params[1]
            )
            .unwrap();
        }
        s
    }
}

/// Parses a tree dump into `(id, parent, position, control)` rows.
pub fn parse_tree_dump(text: &str) -> Result<Vec<(u64, Option<u64>, [f64; 2], [f64; 2])>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            source_name: "tree".into(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let id: u64 = f[0].parse().map_err(|e| err(format!("bad id: {e}")))?;
        let parent: i64 = f[1].parse().map_err(|e| err(format!("bad parent: {e}")))?;
        let r: Vec<f64> = f[2..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| err(format!("bad number {v:?}: {e}"))))
            .collect::<Result<_>>()?;
        rows.push((id, (parent >= 0).then_some(parent as u64), [r[0], r[1]], [r[2], r[3]]));
    }
    Ok(rows)
}

/// Applies `control` for `steps` steps; `None` if any step is blocked.
pub fn propagate(spec: &MazeSpec, from: [f64; 2], control: [f64; 2], steps: usize) -> Option<[f64; 2]> {
    let mut p = from;
    for _ in 0..steps.max(1) {
        match spec.try_step(p, control) {
            Step::Moved(q) => p = q,
            Step::Blocked => return None,
        }
    }
    Some(p)
}

fn random_control(spec: &MazeSpec, rng: &mut dyn RngCore) -> [f64; 2] {
    let [bx, by] = spec.action_bound;
    [rng.gen_range(-bx..=bx), rng.gen_range(-by..=by)]
}

/// Goal-nearest selection over the tree.
pub struct RrtSelector<'a> {
    pub spec: &'a MazeSpec,
}

impl Selector<[f64; 2]> for RrtSelector<'_> {
    fn select(&mut self, store: &ArchiveStore<[f64; 2]>, rng: &mut dyn RngCore) -> Result<usize> {
        Ok(select_goal_nearest(store, &self.spec.bounds, rng)?.1)
    }
}

/// How EST weights nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstWeights {
    /// Mean distance to the k nearest other nodes.
    Knn { k: usize },
    /// Inverse neighbour count within `r_neigh`; the expansion keeps the best
    /// of `n_samples` random controls.
    NeighborCount { r_neigh: f64, n_samples: usize },
}

impl Default for EstWeights {
    fn default() -> Self {
        EstWeights::Knn { k: DEFAULT_EST_K }
    }
}

/// Mean distance of node `i` to its k nearest other nodes, via the index.
pub fn est_weight(tree: &MpTree, i: usize, k: usize) -> f64 {
    let node = &tree.nodes()[i];
    let nn = tree
        .store
        .index()
        .knn_where(&node.outcome, k, |id| id != node.id)
        .unwrap_or_default();
    mean(&nn)
}

fn mean(nn: &[Neighbor]) -> f64 {
    if nn.is_empty() {
        return 0.0;
    }
    nn.iter().map(|n| n.distance).sum::<f64>() / nn.len() as f64
}

/// Weights of every node recomputed from scratch.
pub fn est_weights(tree: &MpTree, k: usize) -> Vec<f64> {
    (0..tree.len()).map(|i| est_weight(tree, i, k)).collect()
}

fn neighbor_count(tree: &MpTree, p: &[f64], r: f64) -> usize {
    let r2 = r * r;
    tree.nodes().iter().filter(|n| dist2(&n.outcome, p) <= r2).count()
}

/// Weight-proportionate selection with k-NN weights kept up to date
/// incrementally as nodes arrive.
#[derive(Debug, Clone, Default)]
pub struct EstSelector {
    k: usize,
    // Per node: ascending (distance², id) of its nearest other nodes.
    lists: Vec<Vec<(f64, u64)>>,
    weights: Vec<f64>,
}

impl EstSelector {
    pub fn new(k: usize) -> Self {
        EstSelector {
            k,
            ..Default::default()
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn weight_of(list: &[(f64, u64)]) -> f64 {
        if list.is_empty() {
            return 0.0;
        }
        list.iter().map(|(d2, _)| d2.sqrt()).sum::<f64>() / list.len() as f64
    }

    /// Brings the weights in line with the store contents.
    pub fn sync(&mut self, store: &ArchiveStore<[f64; 2]>) {
        let entries = store.entries();
        while self.lists.len() < entries.len() {
            let j = self.lists.len();
            let (new_id, new_pt) = (entries[j].id, &entries[j].outcome);
            let mut own: Vec<(f64, u64)> = Vec::with_capacity(self.k + 1);
            for i in 0..j {
                let d2 = dist2(&entries[i].outcome, new_pt);
                let id = entries[i].id;
                insert_bounded(&mut own, (d2, id), self.k);
                if insert_bounded(&mut self.lists[i], (d2, new_id), self.k) {
                    self.weights[i] = Self::weight_of(&self.lists[i]);
                }
            }
            self.weights.push(Self::weight_of(&own));
            self.lists.push(own);
        }
    }
}

/// Keeps `list` as the `k` smallest entries by (distance², id); returns
/// whether `item` entered.
fn insert_bounded(list: &mut Vec<(f64, u64)>, item: (f64, u64), k: usize) -> bool {
    let key = |e: &(f64, u64)| (e.0, e.1);
    if list.len() == k {
        let worst = key(list.last().unwrap());
        if (item.0, item.1) >= worst {
            return false;
        }
        list.pop();
    }
    let at = list.partition_point(|e| key(e) < (item.0, item.1));
    list.insert(at, item);
    true
}

impl Selector<[f64; 2]> for EstSelector {
    fn select(&mut self, store: &ArchiveStore<[f64; 2]>, rng: &mut dyn RngCore) -> Result<usize> {
        self.sync(store);
        Ok(sample_proportionate(&self.weights, rng))
    }
}

/// Neighbour-count EST selection.
pub struct CountSelector {
    pub r_neigh: f64,
}

impl Selector<[f64; 2]> for CountSelector {
    fn select(&mut self, store: &ArchiveStore<[f64; 2]>, rng: &mut dyn RngCore) -> Result<usize> {
        let r2 = self.r_neigh * self.r_neigh;
        let pts = store.entries();
        let weights: Vec<f64> = pts
            .iter()
            .map(|a| 1.0 / pts.iter().filter(|b| dist2(&a.outcome, &b.outcome) <= r2).count() as f64)
            .collect();
        Ok(sample_proportionate(&weights, rng))
    }
}

/// One uniform random control.
pub struct RandomControl<'a> {
    pub spec: &'a MazeSpec,
}

impl Expander<[f64; 2]> for RandomControl<'_> {
    fn expand(&mut self, _parent: &MpNode, rng: &mut dyn RngCore) -> Result<[f64; 2]> {
        Ok(random_control(self.spec, rng))
    }
}

/// Best of `n_samples` random controls: the one landing among the fewest
/// nodes within `r_neigh`.
pub struct SparsestControl<'a> {
    pub spec: &'a MazeSpec,
    pub tree: &'a MpTree,
    pub r_neigh: f64,
    pub n_samples: usize,
    pub control_steps: usize,
}

impl SparsestControl<'_> {
    fn choose(&self, parent: [f64; 2], rng: &mut dyn RngCore) -> [f64; 2] {
        let mut best = (usize::MAX, [0.0; 2]);
        for _ in 0..self.n_samples.max(1) {
            let u = random_control(self.spec, rng);
            let count = match propagate(self.spec, parent, u, self.control_steps) {
                Some(p) => neighbor_count(self.tree, &p, self.r_neigh),
                None => usize::MAX - 1,
            };
            if count < best.0 {
                best = (count, u);
            }
        }
        best.1
    }
}

/// Steps the maze from the parent; blocked moves yield no sample.
pub struct MazeEvaluator<'a> {
    pub spec: &'a MazeSpec,
    pub control_steps: usize,
}

impl Evaluator<[f64; 2]> for MazeEvaluator<'_> {
    fn evaluate(&mut self, parent: &MpNode, control: &[f64; 2]) -> Result<Option<Vec<f64>>> {
        let from = [parent.outcome[0], parent.outcome[1]];
        Ok(propagate(self.spec, from, *control, self.control_steps).map(|p| p.to_vec()))
    }
}

/// Planner configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpConfig {
    pub iterations: usize,
    pub control_steps: usize,
    pub est: EstWeights,
}

impl Default for MpConfig {
    fn default() -> Self {
        MpConfig {
            iterations: 1000,
            control_steps: 1,
            est: EstWeights::default(),
        }
    }
}

struct Recording<'s, S: ?Sized> {
    inner: &'s mut S,
    last: usize,
}

impl<S: Selector<[f64; 2]> + ?Sized> Selector<[f64; 2]> for Recording<'_, S> {
    fn select(&mut self, store: &ArchiveStore<[f64; 2]>, rng: &mut dyn RngCore) -> Result<usize> {
        self.last = self.inner.select(store, rng)?;
        Ok(self.last)
    }
}

/// Runs one iteration; returns the selected node and the new node, if any.
fn step_tree<S: Selector<[f64; 2]> + ?Sized>(
    tree: &mut MpTree,
    selector: &mut S,
    spec: &MazeSpec,
    control_steps: usize,
    rng: &mut dyn RngCore,
) -> Result<(usize, Option<usize>)> {
    let before = tree.len();
    let mut rec = Recording {
        inner: selector,
        last: 0,
    };
    let mut no_hooks: [&mut dyn LoopHook<[f64; 2]>; 0] = [];
    run_loop(
        &mut rec,
        &mut RandomControl { spec },
        &mut MazeEvaluator { spec, control_steps },
        &mut tree.store,
        1,
        &mut no_hooks,
        rng,
    )?;
    tree.store.end_generation();
    Ok((rec.last, (tree.len() > before).then_some(before)))
}

fn one_iteration<S: Selector<[f64; 2]> + ?Sized>(
    tree: &mut MpTree,
    selector: &mut S,
    spec: &MazeSpec,
    control_steps: usize,
    rng: &mut dyn RngCore,
) -> Result<Option<usize>> {
    step_tree(tree, selector, spec, control_steps, rng).map(|(_, new)| new)
}

/// One RRT step; returns the new node's index if the move was free.
pub fn rrt_iteration(tree: &mut MpTree, spec: &MazeSpec, rng: &mut dyn RngCore) -> Result<Option<usize>> {
    one_iteration(tree, &mut RrtSelector { spec }, spec, 1, rng)
}

/// One EST step with weights recomputed through the spatial index.
pub fn est_iteration(tree: &mut MpTree, spec: &MazeSpec, k: usize, rng: &mut dyn RngCore) -> Result<Option<usize>> {
    struct Fresh(usize);
    impl Selector<[f64; 2]> for Fresh {
        fn select(&mut self, store: &ArchiveStore<[f64; 2]>, rng: &mut dyn RngCore) -> Result<usize> {
            let tree = MpTree { store: store.clone() };
            Ok(sample_proportionate(&est_weights(&tree, self.0), rng))
        }
    }
    one_iteration(tree, &mut Fresh(k), spec, 1, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planner {
    Rrt,
    Est,
}

/// Grows a tree from the maze start for `cfg.iterations` iterations, calling
/// `observe(iteration, tree, selected)` after each one, where `selected` is
/// the index of the node chosen for expansion.
pub fn run_planner<F: FnMut(usize, &MpTree, usize)>(
    planner: Planner,
    spec: &MazeSpec,
    cfg: &MpConfig,
    rng: &mut dyn RngCore,
    mut observe: F,
) -> Result<MpTree> {
    let mut tree = MpTree::new(spec.start);
    let steps = cfg.control_steps;
    match (planner, cfg.est) {
        (Planner::Rrt, _) => {
            let mut sel = RrtSelector { spec };
            for it in 0..cfg.iterations {
                let (selected, _) = step_tree(&mut tree, &mut sel, spec, steps, rng)?;
                observe(it, &tree, selected);
            }
        }
        (Planner::Est, EstWeights::Knn { k }) => {
            let mut sel = EstSelector::new(k);
            for it in 0..cfg.iterations {
                let (selected, _) = step_tree(&mut tree, &mut sel, spec, steps, rng)?;
                observe(it, &tree, selected);
            }
        }
        (Planner::Est, EstWeights::NeighborCount { r_neigh, n_samples }) => {
            let mut sel = CountSelector { r_neigh };
            for it in 0..cfg.iterations {
                let pos = sel.select(&tree.store, rng)?;
                let parent = tree.position(pos);
                let control = SparsestControl {
                    spec,
                    tree: &tree,
                    r_neigh,
                    n_samples,
                    control_steps: steps,
                }
                .choose(parent, rng);
                if let Some(p) = propagate(spec, parent, control, steps) {
                    let pid = tree.nodes()[pos].id;
                    let generation = tree.nodes()[pos].generation + 1;
                    tree.store.insert(control, p.to_vec(), Some(pid), generation)?;
                }
                tree.store.end_generation();
                observe(it, &tree, pos);
            }
        }
    }
    Ok(tree)
}
