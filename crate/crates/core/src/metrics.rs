//! Exploration measurements: the expansion-grid score, the expansion
//! degradation diagnostic and selection history.

use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::RngCore;

use crate::environments::PolicyEnv;
use crate::error::{Error, Result};
use crate::explorers::Telemetry;
use crate::policies::{polynomial_mutation, MutationSpec, PolicyBank, PolicyId};
use crate::rng::{child_seed, stream, Stream};
use crate::sel_exp::OutcomeBounds;

/// G×G partition of 2D outcome bounds. Cells are half-open `[lo, hi)` except
/// the last row and column, which include the upper boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionGrid {
    bounds: OutcomeBounds,
    resolution: usize,
    filled: Vec<bool>,
    n_filled: usize,
    out_of_bounds: u64,
}

impl ExpansionGrid {
    pub fn new(bounds: OutcomeBounds, resolution: usize) -> Result<Self> {
        if bounds.dim() != 2 {
            return Err(Error::invalid("expansion grids are two-dimensional"));
        }
        if resolution == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        Ok(ExpansionGrid {
            bounds,
            resolution,
            filled: vec![false; resolution * resolution],
            n_filled: 0,
            out_of_bounds: 0,
        })
    }

    pub fn bounds(&self) -> &OutcomeBounds {
        &self.bounds
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Same bounds and resolution, nothing filled.
    pub fn cleared(&self) -> Self {
        Self::new(self.bounds.clone(), self.resolution).expect("validated on construction")
    }

    pub fn cell_of(&self, p: &[f64]) -> Option<(usize, usize)> {
        if !self.bounds.contains(p) {
            return None;
        }
        let g = self.resolution;
        let axis = |d: usize| {
            let (lo, hi) = (self.bounds.lower()[d], self.bounds.upper()[d]);
            (((p[d] - lo) / (hi - lo) * g as f64) as usize).min(g - 1)
        };
        Some((axis(0), axis(1)))
    }

    /// Marks the cell of `p`; returns whether it was newly filled.
    pub fn add(&mut self, p: &[f64]) -> bool {
        match self.cell_of(p) {
            Some((cx, cy)) => {
                let cell = &mut self.filled[cy * self.resolution + cx];
                let fresh = !*cell;
                *cell = true;
                self.n_filled += fresh as usize;
                fresh
            }
            None => {
                self.out_of_bounds += 1;
                false
            }
        }
    }

    pub fn is_filled(&self, cx: usize, cy: usize) -> bool {
        self.filled[cy * self.resolution + cx]
    }

    pub fn filled_count(&self) -> usize {
        self.n_filled
    }

    pub fn out_of_bounds(&self) -> u64 {
        self.out_of_bounds
    }

    pub fn score(&self) -> f64 {
        self.n_filled as f64 / (self.resolution * self.resolution) as f64
    }
}

/// Marks every outcome and returns the filled fraction.
pub fn expansion_score<'a, I>(grid: &mut ExpansionGrid, outcomes: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    for o in outcomes {
        grid.add(o);
    }
    grid.score()
}

/// Policies with known outcomes whose parameters can be materialised.
pub trait PolicySource {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn outcome(&self, i: usize) -> &[f64];
    fn params(&mut self, i: usize) -> Result<Arc<[f64]>>;
}

/// Archive entries backed by the bank that produced them.
pub struct BankSource<'a> {
    pub bank: &'a mut PolicyBank,
    pub entries: Vec<(PolicyId, Vec<f64>)>,
}

impl PolicySource for BankSource<'_> {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn outcome(&self, i: usize) -> &[f64] {
        &self.entries[i].1
    }

    fn params(&mut self, i: usize) -> Result<Arc<[f64]>> {
        self.bank.params(self.entries[i].0)
    }
}

/// Several sources viewed as one, in order.
pub struct PooledSource<'a> {
    parts: Vec<&'a mut dyn PolicySource>,
    offsets: Vec<usize>,
}

impl<'a> PooledSource<'a> {
    pub fn new(parts: Vec<&'a mut dyn PolicySource>) -> Self {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0;
        for p in &parts {
            offsets.push(total);
            total += p.len();
        }
        PooledSource { parts, offsets }
    }

    fn locate(&self, i: usize) -> (usize, usize) {
        let part = self.offsets.partition_point(|&o| o <= i) - 1;
        (part, i - self.offsets[part])
    }
}

impl PolicySource for PooledSource<'_> {
    fn len(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }

    fn outcome(&self, i: usize) -> &[f64] {
        let (p, j) = self.locate(i);
        self.parts[p].outcome(j)
    }

    fn params(&mut self, i: usize) -> Result<Arc<[f64]>> {
        let (p, j) = self.locate(i);
        self.parts[p].params(j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDegradation {
    pub cell_x: usize,
    pub cell_y: usize,
    /// Mean parent-to-child outcome distance; NaN for cells without parents.
    pub mean_dist: f64,
    pub n_parents: usize,
    pub n_expansions: usize,
}

pub const DEFAULT_POLICIES_PER_CELL: usize = 200;
pub const DEFAULT_EXPANSIONS_PER_POLICY: usize = 100;

/// Measures how far expansions move outcomes, cell by cell. For each cell,
/// up to `n_policies_per_cell` source policies with outcomes in it are drawn
/// uniformly without replacement and each is expanded
/// `n_expansions_per_policy` times.
///
/// Every expansion gets a child seed drawn up front, so the result does not
/// depend on how rollouts are scheduled.
#[allow(clippy::too_many_arguments)]
pub fn expansion_degradation_with<X, F>(
    source: &mut dyn PolicySource,
    grid: &ExpansionGrid,
    n_policies_per_cell: usize,
    n_expansions_per_policy: usize,
    expand: X,
    rollout: F,
    rng: &mut dyn RngCore,
) -> Result<Vec<CellDegradation>>
where
    X: Fn(&[f64], &mut Stream) -> Result<Vec<f64>>,
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if source.is_empty() {
        return Err(Error::invalid("no policies to probe"));
    }
    let g = grid.resolution();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); g * g];
    for i in 0..source.len() {
        if let Some((cx, cy)) = grid.cell_of(source.outcome(i)) {
            members[cy * g + cx].push(i);
        }
    }
    let mut report = Vec::with_capacity(g * g);
    for cy in 0..g {
        for cx in 0..g {
            let pool = &members[cy * g + cx];
            let n = n_policies_per_cell.min(pool.len());
            let mut picks: Vec<usize> = sample_indices(rng, pool.len(), n)
                .into_iter()
                .map(|j| pool[j])
                .collect();
            picks.sort_unstable();
            let seeds: Vec<u64> = (0..n * n_expansions_per_policy).map(|_| child_seed(rng)).collect();
            let mut total = 0.0;
            for (slot, &i) in picks.iter().enumerate() {
                let parent_outcome = source.outcome(i).to_vec();
                let params = source.params(i)?;
                for e in 0..n_expansions_per_policy {
                    let mut s = stream(seeds[slot * n_expansions_per_policy + e]);
                    let child = expand(&params, &mut s)?;
                    let o = rollout(&child)?;
                    total += parent_outcome
                        .iter()
                        .zip(&o)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                }
            }
            let count = n * n_expansions_per_policy;
            report.push(CellDegradation {
                cell_x: cx,
                cell_y: cy,
                mean_dist: if count > 0 { total / count as f64 } else { f64::NAN },
                n_parents: n,
                n_expansions: count,
            });
        }
    }
    Ok(report)
}

/// [`expansion_degradation_with`] using polynomial mutation and rollouts in
/// `env`.
pub fn expansion_degradation(
    env: &dyn PolicyEnv,
    source: &mut dyn PolicySource,
    grid: &ExpansionGrid,
    n_policies_per_cell: usize,
    n_expansions_per_policy: usize,
    mutation: &MutationSpec,
    rng: &mut dyn RngCore,
) -> Result<Vec<CellDegradation>> {
    expansion_degradation_with(
        source,
        grid,
        n_policies_per_cell,
        n_expansions_per_policy,
        |p, s| polynomial_mutation(p, mutation, s),
        |p| env.evaluate(p),
        rng,
    )
}

/// Pooled mean distance over a set of cells, weighting every expansion
/// equally.
pub fn pooled_mean(report: &[CellDegradation], cells: &[(usize, usize)]) -> Option<f64> {
    let (mut total, mut count) = (0.0, 0usize);
    for c in report {
        if c.n_expansions > 0 && cells.contains(&(c.cell_x, c.cell_y)) {
            total += c.mean_dist * c.n_expansions as f64;
            count += c.n_expansions;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Outcomes chosen by the selection operator, per generation.
pub fn selection_history(telemetry: &Telemetry) -> Result<Vec<(u32, Vec<Vec<f64>>)>> {
    telemetry
        .selections
        .clone()
        .ok_or_else(|| Error::absent("selection logging was disabled for this run"))
}
