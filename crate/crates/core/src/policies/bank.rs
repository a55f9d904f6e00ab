//! Lineage-compressed policy storage.
//!
//! A policy is either a seeded random initialisation, a seeded mutation of a
//! parent, or an explicit vector. Parameters are a pure function of that
//! lineage, so the bank keeps only a small record per policy and
//! re-materialises parameters on demand by replaying mutations from the
//! nearest stored ancestor. Ever-growing archives (hundreds of thousands of
//! 2802-gene policies) therefore fit in memory.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use super::{polynomial_mutation, random_init, GeneBounds, MutationSpec, Topology};
use crate::error::{Error, Result};
use crate::rng::stream;

pub type PolicyId = u64;

/// Mutants at depths divisible by this are kept materialised.
pub const DEFAULT_CHECKPOINT_EVERY: u32 = 16;
const DEFAULT_CACHE: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Random { seed: u64 },
    Mutant { parent: PolicyId, seed: u64 },
    Explicit,
}

#[derive(Debug, Clone, Copy)]
struct Record {
    origin: Origin,
    depth: u32,
}

#[derive(Debug, Clone)]
pub struct PolicyBank {
    topology: Topology,
    init_bounds: GeneBounds,
    mutation: MutationSpec,
    records: Vec<Record>,
    pinned: HashMap<PolicyId, Arc<[f64]>>,
    cache: HashMap<PolicyId, Arc<[f64]>>,
    cache_order: VecDeque<PolicyId>,
    cache_capacity: usize,
    checkpoint_every: u32,
}

impl PolicyBank {
    /// `checkpoint_every = 0` disables automatic checkpoints; callers then pin
    /// whatever they need to keep cheap.
    pub fn new(topology: Topology, init_bounds: GeneBounds, mutation: MutationSpec, checkpoint_every: u32) -> Self {
        PolicyBank {
            topology,
            init_bounds,
            mutation,
            records: Vec::new(),
            pinned: HashMap::new(),
            cache: HashMap::new(),
            cache_order: VecDeque::new(),
            cache_capacity: DEFAULT_CACHE,
            checkpoint_every,
        }
    }

    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache_capacity = capacity;
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn mutation(&self) -> &MutationSpec {
        &self.mutation
    }

    pub fn init_bounds(&self) -> GeneBounds {
        self.init_bounds
    }

    pub fn checkpoint_every(&self) -> u32 {
        self.checkpoint_every
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pinned_count(&self) -> usize {
        self.pinned.len()
    }

    pub fn origin(&self, id: PolicyId) -> Result<Origin> {
        Ok(self.record(id)?.origin)
    }

    pub fn depth(&self, id: PolicyId) -> Result<u32> {
        Ok(self.record(id)?.depth)
    }

    pub fn is_pinned(&self, id: PolicyId) -> bool {
        self.pinned.contains_key(&id)
    }

    fn record(&self, id: PolicyId) -> Result<&Record> {
        self.records
            .get(id as usize)
            .ok_or_else(|| Error::invalid(format!("unknown policy id {id}")))
    }

    fn next_id(&self) -> PolicyId {
        self.records.len() as PolicyId
    }

    pub fn spawn_random(&mut self, seed: u64) -> (PolicyId, Arc<[f64]>) {
        let params: Arc<[f64]> = random_init(&self.topology, self.init_bounds, &mut stream(seed)).into();
        let id = self.next_id();
        self.records.push(Record {
            origin: Origin::Random { seed },
            depth: 0,
        });
        self.remember(id, params.clone());
        (id, params)
    }

    pub fn spawn_mutant(&mut self, parent: PolicyId, seed: u64) -> Result<(PolicyId, Arc<[f64]>)> {
        let parent_params = self.params(parent)?;
        let depth = self.record(parent)?.depth + 1;
        let params: Arc<[f64]> = polynomial_mutation(&parent_params, &self.mutation, &mut stream(seed))?.into();
        let id = self.next_id();
        self.records.push(Record {
            origin: Origin::Mutant { parent, seed },
            depth,
        });
        if self.is_checkpoint(depth) {
            self.pinned.insert(id, params.clone());
        } else {
            self.remember(id, params.clone());
        }
        Ok((id, params))
    }

    /// Registers an explicit parameter vector; it stays materialised.
    pub fn add_explicit(&mut self, params: Vec<f64>) -> Result<PolicyId> {
        if params.len() != self.topology.param_count() {
            return Err(Error::invalid(format!(
                "explicit policy has {} parameters, expected {}",
                params.len(),
                self.topology.param_count()
            )));
        }
        let id = self.next_id();
        self.records.push(Record {
            origin: Origin::Explicit,
            depth: 0,
        });
        self.pinned.insert(id, params.into());
        Ok(id)
    }

    /// Restores a record read back from storage. Mutant parents must already
    /// be present.
    pub fn restore(&mut self, origin: Origin, params: Option<Vec<f64>>) -> Result<PolicyId> {
        match origin {
            Origin::Explicit => {
                self.add_explicit(params.ok_or_else(|| Error::invalid("explicit policy without parameters"))?)
            }
            Origin::Random { .. } => {
                let id = self.next_id();
                self.records.push(Record { origin, depth: 0 });
                Ok(id)
            }
            Origin::Mutant { parent, .. } => {
                let depth = self.record(parent)?.depth + 1;
                let id = self.next_id();
                self.records.push(Record { origin, depth });
                Ok(id)
            }
        }
    }

    fn is_checkpoint(&self, depth: u32) -> bool {
        self.checkpoint_every > 0 && depth > 0 && depth.is_multiple_of(self.checkpoint_every)
    }

    fn remember(&mut self, id: PolicyId, params: Arc<[f64]>) {
        if self.cache_capacity == 0 {
            return;
        }
        if self.cache.insert(id, params).is_none() {
            self.cache_order.push_back(id);
            while self.cache_order.len() > self.cache_capacity {
                if let Some(old) = self.cache_order.pop_front() {
                    self.cache.remove(&old);
                }
            }
        }
    }

    fn materialised(&self, id: PolicyId) -> Option<Arc<[f64]>> {
        self.pinned.get(&id).or_else(|| self.cache.get(&id)).cloned()
    }

    /// Parameters of `id`, replaying its lineage when not materialised.
    pub fn params(&mut self, id: PolicyId) -> Result<Arc<[f64]>> {
        if let Some(p) = self.materialised(id) {
            return Ok(p);
        }
        // Walk up to a materialised ancestor or a random root.
        let mut chain = Vec::new();
        let mut cur = id;
        let mut base = loop {
            if let Some(p) = self.materialised(cur) {
                break p;
            }
            match self.record(cur)?.origin {
                Origin::Random { seed } => {
                    break random_init(&self.topology, self.init_bounds, &mut stream(seed)).into();
                }
                Origin::Mutant { parent, .. } => {
                    chain.push(cur);
                    cur = parent;
                }
                Origin::Explicit => {
                    return Err(Error::absent(format!("explicit policy {cur} has no parameters")));
                }
            }
        };
        for &node in chain.iter().rev() {
            let rec = self.records[node as usize];
            let Origin::Mutant { seed, .. } = rec.origin else {
                unreachable!("chain holds mutants only")
            };
            base = polynomial_mutation(&base, &self.mutation, &mut stream(seed))?.into();
            if self.is_checkpoint(rec.depth) {
                self.pinned.insert(node, base.clone());
            }
        }
        self.remember(id, base.clone());
        Ok(base)
    }

    /// Keeps `id` materialised until [`unpin`](Self::unpin).
    pub fn pin(&mut self, id: PolicyId) -> Result<()> {
        if !self.pinned.contains_key(&id) {
            let p = self.params(id)?;
            self.pinned.insert(id, p);
        }
        Ok(())
    }

    pub fn unpin(&mut self, id: PolicyId) {
        if let Some(rec) = self.records.get(id as usize) {
            if rec.origin != Origin::Explicit {
                self.pinned.remove(&id);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::polynomial_mutation;

    fn bank(checkpoint: u32, cache: usize) -> PolicyBank {
        let t = Topology::new(2, &[4], 2).unwrap();
        let m = MutationSpec::new(15.0, 0.5, GeneBounds::default()).unwrap();
        PolicyBank::new(t, GeneBounds::default(), m, checkpoint).with_cache_capacity(cache)
    }

    #[test]
    fn replay_reproduces_direct_mutation_chain() {
        let mut b = bank(4, 0);
        let (root, root_params) = b.spawn_random(11);
        let mut direct = root_params.to_vec();
        let mut id = root;
        for s in 0..23u64 {
            let (child, p) = b.spawn_mutant(id, 100 + s).unwrap();
            direct = polynomial_mutation(&direct, b.mutation(), &mut stream(100 + s)).unwrap();
            assert_eq!(&*p, &direct[..]);
            id = child;
        }
        // No cache: materialisation goes through checkpoints and replay.
        assert_eq!(&*b.params(id).unwrap(), &direct[..]);
        assert_eq!(b.depth(id).unwrap(), 23);
        assert_eq!(b.pinned_count(), 5);
    }

    #[test]
    fn restore_then_replay_matches_original() {
        let mut a = bank(0, 16);
        let (r, _) = a.spawn_random(3);
        let (c1, _) = a.spawn_mutant(r, 4).unwrap();
        let (c2, p2) = a.spawn_mutant(c1, 5).unwrap();
        let mut b = bank(0, 16);
        for id in [r, c1, c2] {
            b.restore(a.origin(id).unwrap(), None).unwrap();
        }
        assert_eq!(b.params(c2).unwrap(), p2);
    }

    #[test]
    fn explicit_policies_stay_pinned() {
        let mut b = bank(0, 0);
        let n = b.topology().param_count();
        assert!(b.add_explicit(vec![0.0; n + 1]).is_err());
        let id = b.add_explicit(vec![0.25; n]).unwrap();
        b.unpin(id);
        assert!(b.is_pinned(id));
        assert_eq!(b.params(id).unwrap()[0], 0.25);
        assert!(b.params(99).is_err());
    }
}
