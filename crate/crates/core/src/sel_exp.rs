//! The selection-expansion framework shared by the motion planners and the
//! diversity searchers.
//!
//! An [`ArchiveStore`] keeps every retained sample together with an exact
//! spatial index over outcomes. Two selection strategies operate on it:
//!
//! * density-proportionate selection, which favours samples far from their
//!   neighbours (EST weights, novelty scores);
//! * goal-nearest selection, which draws a random goal and picks the closest
//!   sample, so each sample is chosen with probability proportional to the
//!   volume of its Voronoi cell (RRT, GEP).

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::spatial::{dist2, KdIndex, KnnHeap, Neighbor, DEFAULT_N_UPDATE};

/// Axis-aligned box in outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl OutcomeBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("bounds need matching, non-empty lower/upper"));
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!(
                    "bounds dimension {d}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        Ok(OutcomeBounds { lower, upper })
    }

    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, lo], vec![hi, hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Per-dimension uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect()
    }
}

/// A parameter value paired with the outcome it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair<P> {
    pub params: P,
    pub outcome: Vec<f64>,
    pub id: u64,
    pub parent_id: Option<u64>,
    pub generation: u32,
}

/// Append-only store of samples with an exact k-NN index over outcomes.
#[derive(Debug, Clone)]
pub struct ArchiveStore<P> {
    entries: Vec<SamplePair<P>>,
    index: KdIndex,
    dim: usize,
    next_id: u64,
}

impl<P> ArchiveStore<P> {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_update_period(dim, DEFAULT_N_UPDATE)
    }

    pub fn with_update_period(dim: usize, n_update: usize) -> Result<Self> {
        Ok(ArchiveStore {
            entries: Vec::new(),
            index: KdIndex::new(dim, n_update)?,
            dim,
            next_id: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SamplePair<P>] {
        &self.entries
    }

    pub fn get(&self, pos: usize) -> Option<&SamplePair<P>> {
        self.entries.get(pos)
    }

    pub fn last(&self) -> Option<&SamplePair<P>> {
        self.entries.last()
    }

    pub fn index(&self) -> &KdIndex {
        &self.index
    }

    /// Next id [`insert`](Self::insert) will allocate.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Position of the entry with `id` (ids are increasing, so this is a
    /// binary search).
    pub fn position(&self, id: u64) -> Option<usize> {
        self.entries.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub fn by_id(&self, id: u64) -> Option<&SamplePair<P>> {
        self.position(id).map(|p| &self.entries[p])
    }

    fn check_outcome(&self, outcome: &[f64]) -> Result<()> {
        if outcome.len() != self.dim {
            return Err(Error::invalid(format!(
                "outcome has dimension {}, store expects {}",
                outcome.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Appends a new sample, allocating its id. The parent, when given, must
    /// already be in the store.
    pub fn insert(&mut self, params: P, outcome: Vec<f64>, parent_id: Option<u64>, generation: u32) -> Result<u64> {
        self.check_outcome(&outcome)?;
        if let Some(parent) = parent_id {
            if self.position(parent).is_none() {
                return Err(Error::invalid(format!("parent id {parent} is not in the store")));
            }
        }
        let id = self.next_id;
        self.index.insert(&outcome, id)?;
        self.entries.push(SamplePair {
            params,
            outcome,
            id,
            parent_id,
            generation,
        });
        self.next_id += 1;
        Ok(id)
    }

    /// Appends a sample that was identified elsewhere (for instance an NS
    /// offspring copied into the novelty archive). Ids must keep increasing;
    /// the parent is not required to be present.
    pub fn adopt(&mut self, pair: SamplePair<P>) -> Result<()> {
        self.check_outcome(&pair.outcome)?;
        if let Some(last) = self.entries.last() {
            if pair.id <= last.id {
                return Err(Error::invalid(format!(
                    "id {} does not follow the last id {}",
                    pair.id, last.id
                )));
            }
        }
        self.index.insert(&pair.outcome, pair.id)?;
        self.next_id = pair.id + 1;
        self.entries.push(pair);
        Ok(())
    }

    /// Closes a generation of the underlying index (deferred rebuild).
    pub fn end_generation(&mut self) {
        self.index.end_generation();
    }

    pub fn flush_index(&mut self) {
        self.index.flush();
    }

    pub fn into_entries(self) -> Vec<SamplePair<P>> {
        self.entries
    }
}

/// Anything that can serve as a reference set for neighbour statistics.
pub trait NeighborSource {
    fn source_len(&self) -> usize;
    /// Offers every point whose id differs from `exclude` to `heap`.
    fn gather_excluding(&self, query: &[f64], exclude: Option<u64>, heap: &mut KnnHeap);
}

impl<P> NeighborSource for ArchiveStore<P> {
    fn source_len(&self) -> usize {
        self.len()
    }

    fn gather_excluding(&self, query: &[f64], exclude: Option<u64>, heap: &mut KnnHeap) {
        match exclude {
            Some(x) => self.index.gather(query, heap, &|id| id != x),
            None => self.index.gather(query, heap, &|_| true),
        }
    }
}

impl<P> NeighborSource for [SamplePair<P>] {
    fn source_len(&self) -> usize {
        self.len()
    }

    fn gather_excluding(&self, query: &[f64], exclude: Option<u64>, heap: &mut KnnHeap) {
        for s in self {
            if Some(s.id) == exclude {
                continue;
            }
            let d2 = dist2(query, &s.outcome);
            if d2 <= heap.worst_d2() {
                heap.offer(d2, s.id);
            }
        }
    }
}

/// Union of two reference sets.
pub struct Union<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: NeighborSource + ?Sized, B: NeighborSource + ?Sized> NeighborSource for Union<'_, A, B> {
    fn source_len(&self) -> usize {
        self.0.source_len() + self.1.source_len()
    }

    fn gather_excluding(&self, query: &[f64], exclude: Option<u64>, heap: &mut KnnHeap) {
        self.0.gather_excluding(query, exclude, heap);
        self.1.gather_excluding(query, exclude, heap);
    }
}

/// The k nearest reference points of `query`, skipping entries with id
/// `exclude`.
pub fn neighbors<S: NeighborSource + ?Sized>(
    reference: &S,
    query: &[f64],
    k: usize,
    exclude: Option<u64>,
) -> Vec<Neighbor> {
    let mut heap = KnnHeap::new(k);
    reference.gather_excluding(query, exclude, &mut heap);
    heap.into_sorted()
}

/// Mean distance to the k nearest neighbours (fewer if the reference set is
/// smaller); zero when there are no neighbours.
pub fn density_score<S: NeighborSource + ?Sized>(reference: &S, query: &[f64], k: usize, exclude: Option<u64>) -> f64 {
    let nn = neighbors(reference, query, k, exclude);
    mean_distance(&nn)
}

pub(crate) fn mean_distance(nn: &[Neighbor]) -> f64 {
    if nn.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for n in nn {
        s += n.distance;
    }
    s / nn.len() as f64
}

/// A candidate for density-proportionate selection: its id (used for
/// self-exclusion) and outcome.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: Option<u64>,
    pub outcome: &'a [f64],
}

/// Selection probabilities proportional to `weights`; uniform when every
/// weight is zero.
pub fn proportionate_probabilities(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if total > 0.0 {
        weights.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    }
}

/// Draws an index with probability `w_i / Σ w` (uniform if all are zero).
pub fn sample_proportionate<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.gen_range(0..weights.len());
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

/// `n` distinct indices drawn sequentially, each proportionate to the
/// remaining weights; remaining zero weights fall back to uniform.
pub fn sample_proportionate_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n > weights.len() {
        return Err(Error::invalid(format!(
            "cannot draw {n} distinct items from {}",
            weights.len()
        )));
    }
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut chosen = Vec::with_capacity(n);
    let mut w: Vec<f64> = weights.to_vec();
    for _ in 0..n {
        let j = sample_proportionate(&w, rng);
        chosen.push(remaining[j]);
        remaining.remove(j);
        w.remove(j);
    }
    Ok(chosen)
}

/// Density scores of every candidate against `reference`.
pub fn candidate_scores<S: NeighborSource + ?Sized>(candidates: &[Candidate<'_>], reference: &S, k: usize) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| density_score(reference, c.outcome, k, c.id))
        .collect()
}

/// Picks a candidate with probability proportional to the mean distance to
/// its k nearest neighbours in `reference` (the candidate itself excluded).
pub fn select_density_proportionate<S, R>(
    candidates: &[Candidate<'_>],
    reference: &S,
    k: usize,
    rng: &mut R,
) -> Result<usize>
where
    S: NeighborSource + ?Sized,
    R: Rng + ?Sized,
{
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to select from"));
    }
    if reference.source_len() == 0 {
        return Err(Error::invalid("empty reference set"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let scores = candidate_scores(candidates, reference, k);
    Ok(sample_proportionate(&scores, rng))
}

/// Draws a uniform goal in `bounds` and returns it with the position of the
/// store entry nearest to it (lowest id on ties).
pub fn select_goal_nearest<P, R: Rng + ?Sized>(
    store: &ArchiveStore<P>,
    bounds: &OutcomeBounds,
    rng: &mut R,
) -> Result<(Vec<f64>, usize)> {
    if store.is_empty() {
        return Err(Error::invalid("goal-nearest selection on an empty store"));
    }
    if bounds.dim() != store.dim() {
        return Err(Error::invalid("bounds and store dimensions differ"));
    }
    let goal = bounds.sample(rng);
    let nearest = store.index().nearest(&goal)?;
    let pos = store
        .position(nearest.id)
        .expect("index ids always refer to store entries");
    Ok((goal, pos))
}

/// Chooses the entry to expand.
pub trait Selector<P> {
    fn select(&mut self, store: &ArchiveStore<P>, rng: &mut dyn RngCore) -> Result<usize>;
}

/// Produces new parameters from a selected sample.
pub trait Expander<P> {
    fn expand(&mut self, parent: &SamplePair<P>, rng: &mut dyn RngCore) -> Result<P>;
}

/// Maps expanded parameters to an outcome; `None` discards the sample.
pub trait Evaluator<P> {
    fn evaluate(&mut self, parent: &SamplePair<P>, params: &P) -> Result<Option<Vec<f64>>>;
}

/// Observer notified of every sample inserted by [`run_loop`].
pub trait LoopHook<P> {
    fn on_iteration(&mut self, iteration: usize, inserted: Option<&SamplePair<P>>);
}

impl<P, F: FnMut(usize, Option<&SamplePair<P>>)> LoopHook<P> for F {
    fn on_iteration(&mut self, iteration: usize, inserted: Option<&SamplePair<P>>) {
        self(iteration, inserted)
    }
}

/// Runs `iterations` rounds of select → expand → evaluate → insert.
///
/// Returns the number of inserted samples. On error the store keeps
/// everything inserted before the failing iteration.
pub fn run_loop<P, S, X, E>(
    selector: &mut S,
    expander: &mut X,
    evaluator: &mut E,
    store: &mut ArchiveStore<P>,
    iterations: usize,
    hooks: &mut [&mut dyn LoopHook<P>],
    rng: &mut dyn RngCore,
) -> Result<usize>
where
    S: Selector<P> + ?Sized,
    X: Expander<P> + ?Sized,
    E: Evaluator<P> + ?Sized,
{
    if store.is_empty() {
        return Err(Error::invalid("selection-expansion loop needs a seeded store"));
    }
    let mut inserted = 0;
    for it in 0..iterations {
        let pos = selector.select(store, rng)?;
        let parent = &store.entries()[pos];
        let params = expander.expand(parent, rng)?;
        let outcome = evaluator.evaluate(parent, &params)?;
        let (parent_id, generation) = (parent.id, parent.generation + 1);
        match outcome {
            Some(o) => {
                store.insert(params, o, Some(parent_id), generation)?;
                inserted += 1;
                let new = store.last();
                for h in hooks.iter_mut() {
                    h.on_iteration(it, new);
                }
            }
            None => {
                for h in hooks.iter_mut() {
                    h.on_iteration(it, None);
                }
            }
        }
    }
    Ok(inserted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn store_of(points: &[[f64; 2]]) -> ArchiveStore<()> {
        let mut s = ArchiveStore::new(2).unwrap();
        for p in points {
            s.insert((), p.to_vec(), None, 0).unwrap();
        }
        s
    }

    #[test]
    fn bounds_reject_inverted_dimensions() {
        assert!(OutcomeBounds::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(OutcomeBounds::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(OutcomeBounds::square(-1.0, 1.0).is_ok());
    }

    #[test]
    fn insert_validates_parent_and_dimension() {
        let mut s: ArchiveStore<()> = ArchiveStore::new(2).unwrap();
        assert!(s.insert((), vec![0.0, 0.0], Some(3), 0).is_err());
        let a = s.insert((), vec![0.0, 0.0], None, 0).unwrap();
        assert!(s.insert((), vec![0.0], Some(a), 1).is_err());
        let b = s.insert((), vec![1.0, 0.0], Some(a), 1).unwrap();
        assert!(b > a);
    }

    #[test]
    fn adopt_requires_increasing_ids() {
        let mut s: ArchiveStore<()> = ArchiveStore::new(2).unwrap();
        let pair = |id| SamplePair {
            params: (),
            outcome: vec![0.0, 0.0],
            id,
            parent_id: Some(999),
            generation: 0,
        };
        s.adopt(pair(5)).unwrap();
        assert!(s.adopt(pair(5)).is_err());
        s.adopt(pair(9)).unwrap();
        assert_eq!(s.position(9), Some(1));
    }

    #[test]
    fn single_candidate_is_always_selected() {
        let reference = store_of(&[[0.0, 0.0], [0.5, 0.5]]);
        let c = [Candidate {
            id: None,
            outcome: &[0.2, 0.1],
        }];
        let mut rng = stream(1);
        for _ in 0..100 {
            assert_eq!(select_density_proportionate(&c, &reference, 3, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let reference = store_of(&[[0.0, 0.0]]);
        let empty: ArchiveStore<()> = ArchiveStore::new(2).unwrap();
        let c = [Candidate {
            id: None,
            outcome: &[0.2, 0.1],
        }];
        let mut rng = stream(1);
        assert!(select_density_proportionate(&[], &reference, 1, &mut rng).is_err());
        assert!(select_density_proportionate(&c, &empty, 1, &mut rng).is_err());
        let bounds = OutcomeBounds::square(-1.0, 1.0).unwrap();
        assert!(select_goal_nearest(&empty, &bounds, &mut rng).is_err());
    }

    #[test]
    fn self_is_excluded_from_its_own_neighbours() {
        let reference = store_of(&[[0.0, 0.0], [3.0, 0.0]]);
        let c = Candidate {
            id: Some(0),
            outcome: &[0.0, 0.0],
        };
        assert_eq!(density_score(&reference, c.outcome, 1, c.id), 3.0);
        assert_eq!(density_score(&reference, c.outcome, 1, None), 0.0);
    }

    #[test]
    fn small_reference_set_averages_available_neighbours() {
        let reference = store_of(&[[1.0, 0.0], [3.0, 0.0]]);
        assert_eq!(density_score(&reference, &[0.0, 0.0], 15, None), 2.0);
    }

    #[test]
    fn probabilities_are_normalised() {
        let w = [0.3, 1e-9, 7.0, 2.5, 0.0];
        let p = proportionate_probabilities(&w);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(proportionate_probabilities(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_weight_is_never_drawn() {
        let mut rng = stream(4);
        for _ in 0..10_000 {
            assert_eq!(sample_proportionate(&[2.0, 0.0], &mut rng), 0);
        }
        let picks = sample_proportionate_without_replacement(&[2.0, 0.0], 1, &mut rng).unwrap();
        assert_eq!(picks, vec![0]);
    }

    #[test]
    fn without_replacement_returns_distinct_indices() {
        let mut rng = stream(5);
        let w = [1.0, 0.0, 3.0, 0.0, 2.0];
        let picks = sample_proportionate_without_replacement(&w, 5, &mut rng).unwrap();
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert!(sample_proportionate_without_replacement(&w, 6, &mut rng).is_err());
    }

    #[test]
    fn goal_nearest_single_entry() {
        let store = store_of(&[[0.7, -0.2]]);
        let bounds = OutcomeBounds::square(-1.0, 1.0).unwrap();
        let mut rng = stream(2);
        for _ in 0..50 {
            let (goal, pos) = select_goal_nearest(&store, &bounds, &mut rng).unwrap();
            assert!(bounds.contains(&goal));
            assert_eq!(pos, 0);
        }
    }

    struct First;
    impl Selector<u32> for First {
        fn select(&mut self, _: &ArchiveStore<u32>, _: &mut dyn RngCore) -> Result<usize> {
            Ok(0)
        }
    }
    struct Step;
    impl Expander<u32> for Step {
        fn expand(&mut self, parent: &SamplePair<u32>, _: &mut dyn RngCore) -> Result<u32> {
            Ok(parent.params + 1)
        }
    }
    struct FailAt(u32);
    impl Evaluator<u32> for FailAt {
        fn evaluate(&mut self, _: &SamplePair<u32>, p: &u32) -> Result<Option<Vec<f64>>> {
            if *p >= self.0 {
                Err(Error::invalid("boom"))
            } else {
                Ok(Some(vec![*p as f64, 0.0]))
            }
        }
    }

    #[test]
    fn loop_with_zero_iterations_leaves_store_unchanged() {
        let mut store: ArchiveStore<u32> = ArchiveStore::new(2).unwrap();
        store.insert(0, vec![0.0, 0.0], None, 0).unwrap();
        let mut rng = stream(0);
        let n = run_loop(&mut First, &mut Step, &mut FailAt(10), &mut store, 0, &mut [], &mut rng).unwrap();
        assert_eq!(n, 0);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn loop_errors_preserve_partial_results() {
        let mut store: ArchiveStore<u32> = ArchiveStore::new(2).unwrap();
        store.insert(0, vec![0.0, 0.0], None, 0).unwrap();
        let mut rng = stream(0);
        struct Last;
        impl Selector<u32> for Last {
            fn select(&mut self, s: &ArchiveStore<u32>, _: &mut dyn RngCore) -> Result<usize> {
                Ok(s.len() - 1)
            }
        }
        let mut seen = 0;
        let mut hook = |_: usize, p: Option<&SamplePair<u32>>| {
            if p.is_some() {
                seen += 1
            }
        };
        let res = run_loop(
            &mut Last,
            &mut Step,
            &mut FailAt(4),
            &mut store,
            10,
            &mut [&mut hook],
            &mut rng,
        );
        assert!(res.is_err());
        assert_eq!(store.len(), 4);
        assert_eq!(seen, 3);
        assert!(!store.is_empty() && store.entries()[3].parent_id == Some(2));
    }
}
