//! Exact k-nearest-neighbour index over outcome points.
//!
//! Points live in one backing list. A balanced k-d tree covers the prefix that
//! existed at the last main rebuild; points added since then sit in a recent
//! buffer (linear scan, or a small tree once it outgrows
//! [`RECENT_TREE_THRESHOLD`]). The main tree is rebuilt only every `n_update`
//! generations, so an ever-growing archive does not pay a full rebuild per
//! generation. Queries merge both parts and are exact: results match a linear
//! scan, with distance ties broken by the lowest payload id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default number of generations between main-tree rebuilds.
pub const DEFAULT_N_UPDATE: usize = 10;
/// Recent-buffer size above which the buffer is organised as a tree.
pub const RECENT_TREE_THRESHOLD: usize = 512;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: f64,
}

/// Squared Euclidean distance, summed in dimension order.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    id: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

/// Bounded collector of the k best `(distance, id)` pairs.
///
/// Several sources can feed the same collector; the result is the k-NN of
/// their union.
#[derive(Debug)]
pub struct KnnHeap {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl KnnHeap {
    pub fn new(k: usize) -> Self {
        KnnHeap {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    /// Squared distance a candidate must not exceed to be admitted.
    #[inline]
    pub fn worst_d2(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.d2)
        }
    }

    #[inline]
    pub fn offer(&mut self, d2: f64, id: u64) {
        if self.k == 0 {
            return;
        }
        let cand = Candidate { d2, id };
        if self.heap.len() < self.k {
            self.heap.push(cand);
        } else if let Some(top) = self.heap.peek() {
            if cand < *top {
                self.heap.pop();
                self.heap.push(cand);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Ascending by distance, then id.
    pub fn into_sorted(self) -> Vec<Neighbor> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                id: c.id,
                distance: c.d2.sqrt(),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        dim: u32,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Static k-d tree over a contiguous range of the backing point list.
#[derive(Debug, Clone, Default)]
struct KdTree {
    nodes: Vec<Node>,
    perm: Vec<u32>,
}

impl KdTree {
    fn build(coords: &[f64], dim: usize, range: std::ops::Range<usize>) -> Self {
        let mut perm: Vec<u32> = range.map(|i| i as u32).collect();
        let mut nodes = Vec::with_capacity(2 * perm.len() / LEAF_SIZE + 1);
        if !perm.is_empty() {
            let len = perm.len();
            Self::build_rec(coords, dim, &mut perm, 0, len, &mut nodes);
        }
        KdTree { nodes, perm }
    }

    fn build_rec(coords: &[f64], dim: usize, perm: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
        let me = nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return me;
        }
        let slice = &mut perm[start..end];
        let mut best_dim = 0;
        let mut best_spread = f64::NEG_INFINITY;
        for d in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in slice.iter() {
                let v = coords[i as usize * dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            coords[a as usize * dim + best_dim].total_cmp(&coords[b as usize * dim + best_dim])
        });
        let value = coords[slice[mid] as usize * dim + best_dim];
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = Self::build_rec(coords, dim, perm, start, start + mid, nodes);
        let right = Self::build_rec(coords, dim, perm, start + mid, end, nodes);
        nodes[me as usize] = Node::Split {
            dim: best_dim as u32,
            value,
            left,
            right,
        };
        me
    }

    fn search<F: Fn(u64) -> bool>(
        &self,
        node: u32,
        coords: &[f64],
        ids: &[u64],
        dim: usize,
        query: &[f64],
        heap: &mut KnnHeap,
        accept: &F,
    ) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start as usize..end as usize] {
                    let i = i as usize;
                    let d2 = dist2(query, &coords[i * dim..(i + 1) * dim]);
                    if d2 <= heap.worst_d2() && accept(ids[i]) {
                        heap.offer(d2, ids[i]);
                    }
                }
            }
            Node::Split {
                dim: split_dim,
                value,
                left,
                right,
            } => {
                let diff = query[split_dim as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, coords, ids, dim, query, heap, accept);
                // Equal bounds are still explored so that lower ids at the same
                // distance can displace the current worst.
                if diff * diff <= heap.worst_d2() {
                    self.search(far, coords, ids, dim, query, heap, accept);
                }
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

/// Exact k-NN index with deferred main-tree rebuilds.
#[derive(Debug, Clone)]
pub struct KdIndex {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<u64>,
    main: KdTree,
    main_len: usize,
    recent: Option<KdTree>,
    recent_end: usize,
    n_update: usize,
    generation: u64,
    main_rebuilds: usize,
}

impl KdIndex {
    pub fn new(dim: usize, n_update: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("index dimension must be positive"));
        }
        if n_update == 0 {
            return Err(Error::invalid("n_update must be positive"));
        }
        Ok(KdIndex {
            dim,
            coords: Vec::new(),
            ids: Vec::new(),
            main: KdTree::default(),
            main_len: 0,
            recent: None,
            recent_end: 0,
            n_update,
            generation: 0,
            main_rebuilds: 0,
        })
    }

    /// Builds an index whose main tree already covers `points`.
    pub fn from_points<'a, I>(dim: usize, n_update: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], u64)>,
    {
        let mut index = Self::new(dim, n_update)?;
        for (p, id) in points {
            index.insert(p, id)?;
        }
        index.flush();
        Ok(index)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    /// Number of points covered by the main tree.
    pub fn main_tree_len(&self) -> usize {
        self.main_len
    }

    /// Number of points awaiting transfer into the main tree.
    pub fn recent_len(&self) -> usize {
        self.len() - self.main_len
    }

    pub fn main_rebuilds(&self) -> usize {
        self.main_rebuilds
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn n_update(&self) -> usize {
        self.n_update
    }

    /// Adds a point; it is queryable immediately through the recent buffer.
    pub fn insert(&mut self, point: &[f64], id: u64) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, index expects {}",
                point.len(),
                self.dim
            )));
        }
        self.coords.extend_from_slice(point);
        self.ids.push(id);
        Ok(())
    }

    /// Closes a generation: rebuilds the recent buffer, and every `n_update`
    /// generations transfers it into a rebuilt main tree.
    pub fn end_generation(&mut self) {
        self.generation += 1;
        if self.generation.is_multiple_of(self.n_update as u64) {
            self.flush();
        } else {
            self.rebuild_recent();
        }
    }

    /// Transfers the recent buffer into the main tree now.
    pub fn flush(&mut self) {
        self.main = KdTree::build(&self.coords, self.dim, 0..self.len());
        self.main_len = self.len();
        self.recent = None;
        self.recent_end = self.main_len;
        self.main_rebuilds += 1;
    }

    fn rebuild_recent(&mut self) {
        let pending = self.len() - self.main_len;
        if pending > RECENT_TREE_THRESHOLD {
            self.recent = Some(KdTree::build(&self.coords, self.dim, self.main_len..self.len()));
            self.recent_end = self.len();
        } else {
            self.recent = None;
            self.recent_end = self.main_len;
        }
    }

    /// Feeds every accepted point into `heap`.
    pub fn gather<F: Fn(u64) -> bool>(&self, query: &[f64], heap: &mut KnnHeap, accept: &F) {
        let dim = self.dim;
        if !self.main.is_empty() {
            self.main.search(0, &self.coords, &self.ids, dim, query, heap, accept);
        }
        if let Some(recent) = &self.recent {
            if !recent.is_empty() {
                recent.search(0, &self.coords, &self.ids, dim, query, heap, accept);
            }
        }
        for i in self.recent_end..self.len() {
            let d2 = dist2(query, self.point(i));
            if d2 <= heap.worst_d2() && accept(self.ids[i]) {
                heap.offer(d2, self.ids[i]);
            }
        }
    }

    /// The `min(k, len)` nearest points, ascending by distance then id.
    pub fn knn(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.knn_where(query, k, |_| true)
    }

    /// k-NN restricted to points whose id satisfies `accept`.
    pub fn knn_where<F: Fn(u64) -> bool>(&self, query: &[f64], k: usize, accept: F) -> Result<Vec<Neighbor>> {
        if self.is_empty() {
            return Err(Error::invalid("k-NN query on an empty index"));
        }
        if query.len() != self.dim {
            return Err(Error::invalid(format!(
                "query has dimension {}, index expects {}",
                query.len(),
                self.dim
            )));
        }
        let mut heap = KnnHeap::new(k);
        self.gather(query, &mut heap, &accept);
        Ok(heap.into_sorted())
    }

    pub fn nearest(&self, query: &[f64]) -> Result<Neighbor> {
        Ok(self.knn(query, 1)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn linear(points: &[[f64; 2]], q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<(f64, u64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (dist2(q, p), i as u64))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter()
            .map(|(d2, id)| Neighbor {
                id,
                distance: d2.sqrt(),
            })
            .collect()
    }

    #[test]
    fn insert_then_query_same_point() {
        let mut index = KdIndex::new(2, 10).unwrap();
        index.insert(&[0.3, -0.2], 7).unwrap();
        let n = index.nearest(&[0.3, -0.2]).unwrap();
        assert_eq!(n.id, 7);
        assert_eq!(n.distance, 0.0);
    }

    #[test]
    fn dimension_mismatch_and_empty_are_errors() {
        let mut index = KdIndex::new(2, 10).unwrap();
        assert!(index.knn(&[0.0, 0.0], 1).is_err());
        assert!(index.insert(&[1.0], 0).is_err());
        index.insert(&[1.0, 1.0], 0).unwrap();
        assert!(index.knn(&[0.0, 0.0, 0.0], 1).is_err());
    }

    #[test]
    fn k_larger_than_size_returns_everything() {
        let mut index = KdIndex::new(2, 10).unwrap();
        for i in 0..5 {
            index.insert(&[i as f64, 0.0], i).unwrap();
        }
        assert_eq!(index.knn(&[0.0, 0.0], 50).unwrap().len(), 5);
    }

    #[test]
    fn grid_center_has_four_axis_neighbours() {
        let mut index = KdIndex::new(2, 1).unwrap();
        let mut id = 0;
        for y in -1..=1 {
            for x in -1..=1 {
                index.insert(&[x as f64, y as f64], id).unwrap();
                id += 1;
            }
        }
        index.end_generation();
        let res = index.knn_where(&[0.0, 0.0], 4, |i| i != 4).unwrap();
        let mut got: Vec<u64> = res.iter().map(|n| n.id).collect();
        got.sort_unstable();
        assert_eq!(got, vec![1, 3, 5, 7]);
        assert!(res.iter().all(|n| n.distance == 1.0));
    }

    #[test]
    fn deferred_rebuild_keeps_main_tree_fixed() {
        let mut index = KdIndex::new(2, 5).unwrap();
        let mut rng = crate::rng::stream(3);
        for g in 1..=12 {
            for _ in 0..10 {
                let p = [rng.gen::<f64>(), rng.gen::<f64>()];
                let id = index.len() as u64;
                index.insert(&p, id).unwrap();
            }
            index.end_generation();
            let expected_main = (g / 5) * 50;
            assert_eq!(index.main_tree_len(), expected_main, "generation {g}");
        }
    }

    #[test]
    fn rebuild_count_follows_period() {
        let mut index = KdIndex::new(2, 10).unwrap();
        for _ in 0..25 {
            index.end_generation();
        }
        assert_eq!(index.main_rebuilds(), 2);
        let mut always = KdIndex::new(2, 1).unwrap();
        for g in 0..7 {
            always.insert(&[g as f64, 0.0], g).unwrap();
            always.end_generation();
            assert_eq!(always.recent_len(), 0);
        }
        assert_eq!(always.main_rebuilds(), 7);
    }

    #[test]
    fn recent_tree_path_matches_linear_scan() {
        let mut index = KdIndex::new(2, 1000).unwrap();
        let mut rng = crate::rng::stream(11);
        let mut pts = Vec::new();
        for _ in 0..3 {
            for _ in 0..700 {
                let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                index.insert(&p, pts.len() as u64).unwrap();
                pts.push(p);
            }
            index.end_generation();
        }
        assert_eq!(index.main_tree_len(), 0);
        for _ in 0..200 {
            let q = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
            assert_eq!(index.knn(&q, 15).unwrap(), linear(&pts, &q, 15));
        }
    }

    #[test]
    fn ties_break_on_lowest_id() {
        let mut index = KdIndex::new(2, 1).unwrap();
        for id in [9, 4, 6, 2] {
            index.insert(&[1.0, 0.0], id).unwrap();
        }
        index.insert(&[-1.0, 0.0], 1).unwrap();
        index.end_generation();
        let ids: Vec<u64> = index.knn(&[0.0, 0.0], 3).unwrap().iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![1, 2, 4]);
    }
}
