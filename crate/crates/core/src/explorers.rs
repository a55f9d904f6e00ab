//! Diversity search in policy space: goal exploration (GEP), novelty search
//! with population and archive filtering (NS), and a random-search baseline.
//!
//! Policies live in a [`PolicyBank`]; samples carry the bank id as their
//! parameters, and their sample id equals that bank id.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::environments::PolicyEnv;
use crate::error::{Error, Result};
use crate::policies::{GeneBounds, MutationSpec, PolicyBank, PolicyId, DEFAULT_CHECKPOINT_EVERY};
use crate::rng::{child_seed, stream, Stream};
use crate::sel_exp::{
    candidate_scores, sample_proportionate_without_replacement, select_goal_nearest, ArchiveStore, Candidate,
    OutcomeBounds, SamplePair, Union,
};
use crate::spatial::DEFAULT_N_UPDATE;

pub type PolicyPair = SamplePair<PolicyId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Ns,
    Gep,
    Rs,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ns => "ns",
            Algorithm::Gep => "gep",
            Algorithm::Rs => "rs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsConfig {
    pub n_selection: usize,
    pub n_offspring: usize,
    /// Size of the random initial population.
    pub n_init: usize,
    pub k: usize,
    pub n_filter_archive: usize,
    pub p_expansion: f64,
    pub mutation: MutationSpec,
    pub init_bounds: GeneBounds,
    pub n_update: usize,
    /// Rollout threads per generation; results do not depend on it.
    pub workers: usize,
    pub log_selection: bool,
}

impl DsConfig {
    pub fn maze() -> Self {
        DsConfig {
            n_selection: 100,
            n_offspring: 2,
            n_init: 100,
            k: 15,
            n_filter_archive: 6,
            p_expansion: 1.0,
            mutation: MutationSpec::new(15.0, 0.1, GeneBounds::default()).unwrap(),
            init_bounds: GeneBounds::default(),
            n_update: DEFAULT_N_UPDATE,
            workers: 1,
            log_selection: false,
        }
    }

    pub fn ballistic() -> Self {
        DsConfig {
            n_selection: 1,
            n_init: 1,
            n_filter_archive: 10,
            mutation: MutationSpec::new(2000.0, 0.1, GeneBounds::default()).unwrap(),
            ..Self::maze()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::invalid("initial population must not be empty"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p_expansion) {
            return Err(Error::invalid(format!(
                "p_expansion {} is not a probability",
                self.p_expansion
            )));
        }
        if self.n_update == 0 {
            return Err(Error::invalid("n_update must be at least 1"));
        }
        Ok(())
    }

    /// Rollouts per generation; the random-search batch uses the same count.
    pub fn budget(&self) -> usize {
        self.n_selection * self.n_offspring
    }
}

/// What one generation produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationOutput {
    pub new: Vec<PolicyPair>,
    /// Outcomes of the samples chosen by the selection operator.
    pub selected: Vec<Vec<f64>>,
}

fn evaluate_batch(env: &dyn PolicyEnv, params: &[Arc<[f64]>], workers: usize) -> Result<Vec<Vec<f64>>> {
    if workers <= 1 || params.len() < 2 {
        return params.iter().map(|p| env.evaluate(p)).collect();
    }
    let chunk = params.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = params
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(|p| env.evaluate(p)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(params.len());
        for h in handles {
            out.extend(h.join().expect("rollout worker panicked")?);
        }
        Ok(out)
    })
}

/// Spawns one mutant per seed and evaluates them in seed order.
fn spawn_children(
    bank: &mut PolicyBank,
    env: &dyn PolicyEnv,
    parent: PolicyId,
    seeds: &[u64],
    generation: u32,
    workers: usize,
) -> Result<Vec<PolicyPair>> {
    let mut ids = Vec::with_capacity(seeds.len());
    let mut params = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let (id, p) = bank.spawn_mutant(parent, s)?;
        ids.push(id);
        params.push(p);
    }
    let outcomes = evaluate_batch(env, &params, workers)?;
    Ok(ids
        .into_iter()
        .zip(outcomes)
        .map(|(id, outcome)| SamplePair {
            params: id,
            outcome,
            id,
            parent_id: Some(parent),
            generation,
        })
        .collect())
}

fn spawn_random_batch(
    bank: &mut PolicyBank,
    env: &dyn PolicyEnv,
    n: usize,
    generation: u32,
    workers: usize,
    rng: &mut Stream,
) -> Result<Vec<PolicyPair>> {
    let mut ids = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        let (id, p) = bank.spawn_random(child_seed(rng));
        ids.push(id);
        params.push(p);
    }
    let outcomes = evaluate_batch(env, &params, workers)?;
    Ok(ids
        .into_iter()
        .zip(outcomes)
        .map(|(id, outcome)| SamplePair {
            params: id,
            outcome,
            id,
            parent_id: None,
            generation,
        })
        .collect())
}

fn expansion_draw(p_expansion: f64, rng: &mut Stream) -> bool {
    p_expansion >= 1.0 || rng.gen::<f64>() < p_expansion
}

/// GEP keeps every policy ever evaluated.
#[derive(Debug, Clone)]
pub struct GepState {
    pub population: ArchiveStore<PolicyId>,
    pub bounds: OutcomeBounds,
}

impl GepState {
    pub fn new(initial: &[PolicyPair], bounds: OutcomeBounds, n_update: usize) -> Result<Self> {
        let mut population = ArchiveStore::with_update_period(bounds.dim(), n_update)?;
        for p in initial {
            population.adopt(p.clone())?;
        }
        population.flush_index();
        Ok(GepState { population, bounds })
    }
}

/// One GEP generation: `n_selection` rounds of goal sampling, nearest-outcome
/// selection and expansion. Children join the population immediately, so later
/// rounds of the same generation can select them.
pub fn gep_generation(
    state: &mut GepState,
    bank: &mut PolicyBank,
    env: &dyn PolicyEnv,
    cfg: &DsConfig,
    generation: u32,
    rng: &mut Stream,
) -> Result<GenerationOutput> {
    if state.population.is_empty() {
        return Err(Error::invalid("GEP population is empty"));
    }
    let mut out = GenerationOutput::default();
    for _ in 0..cfg.n_selection {
        let (_, pos) = select_goal_nearest(&state.population, &state.bounds, rng)?;
        let parent = &state.population.entries()[pos];
        out.selected.push(parent.outcome.clone());
        if !expansion_draw(cfg.p_expansion, rng) {
            continue;
        }
        let parent_id = parent.params;
        let seeds: Vec<u64> = (0..cfg.n_offspring).map(|_| child_seed(rng)).collect();
        for child in spawn_children(bank, env, parent_id, &seeds, generation, cfg.workers)? {
            state.population.adopt(child.clone())?;
            out.new.push(child);
        }
    }
    state.population.end_generation();
    Ok(out)
}

/// NS state: a fixed-size population, the offspring of the last generation
/// and the novelty reference archive.
#[derive(Debug, Clone)]
pub struct NsState {
    pub population: Vec<PolicyPair>,
    pub offspring: Vec<PolicyPair>,
    pub archive: ArchiveStore<PolicyId>,
}

impl NsState {
    /// The archive starts as a copy of the initial population.
    pub fn new(initial: &[PolicyPair], dim: usize, n_update: usize) -> Result<Self> {
        let mut archive = ArchiveStore::with_update_period(dim, n_update)?;
        for p in initial {
            archive.adopt(p.clone())?;
        }
        archive.flush_index();
        Ok(NsState {
            population: initial.to_vec(),
            offspring: Vec::new(),
            archive,
        })
    }
}

/// Novelty of every member of population ∪ offspring against
/// archive ∪ population, each candidate excluded from its own neighbours.
pub fn ns_novelty(state: &NsState, k: usize) -> Vec<f64> {
    let candidates: Vec<Candidate<'_>> = state
        .population
        .iter()
        .chain(&state.offspring)
        .map(|p| Candidate {
            id: Some(p.id),
            outcome: &p.outcome,
        })
        .collect();
    let reference = Union(&state.archive, &state.population[..]);
    candidate_scores(&candidates, &reference, k)
}

/// One NS generation: population filtering, expansion, archive filtering.
pub fn ns_generation(
    state: &mut NsState,
    bank: &mut PolicyBank,
    env: &dyn PolicyEnv,
    cfg: &DsConfig,
    generation: u32,
    rng: &mut Stream,
) -> Result<GenerationOutput> {
    if state.archive.is_empty() {
        return Err(Error::invalid("NS archive is empty"));
    }
    let scores = ns_novelty(state, cfg.k);
    let mut candidates: Vec<PolicyPair> = std::mem::take(&mut state.population);
    candidates.append(&mut state.offspring);
    let n_keep = cfg.n_selection.min(candidates.len());
    let chosen = sample_proportionate_without_replacement(&scores, n_keep, rng)?;

    let kept: HashSet<PolicyId> = chosen.iter().map(|&i| candidates[i].params).collect();
    for c in &candidates {
        if !kept.contains(&c.params) {
            bank.unpin(c.params);
        }
    }
    let mut population = Vec::with_capacity(n_keep);
    for &i in &chosen {
        bank.pin(candidates[i].params)?;
        population.push(candidates[i].clone());
    }

    let mut out = GenerationOutput {
        new: Vec::new(),
        selected: population.iter().map(|p| p.outcome.clone()).collect(),
    };
    let mut plan = Vec::with_capacity(population.len());
    for member in &population {
        if expansion_draw(cfg.p_expansion, rng) {
            let seeds: Vec<u64> = (0..cfg.n_offspring).map(|_| child_seed(rng)).collect();
            plan.push((member.params, seeds));
        }
    }
    let mut offspring = Vec::with_capacity(cfg.budget());
    for (parent, seeds) in plan {
        offspring.extend(spawn_children(bank, env, parent, &seeds, generation, cfg.workers)?);
    }

    let n_archive = cfg.n_filter_archive.min(offspring.len());
    let mut picks = sample_indices(rng, offspring.len(), n_archive).into_vec();
    picks.sort_unstable();
    for i in picks {
        state.archive.adopt(offspring[i].clone())?;
    }
    state.archive.end_generation();

    out.new = offspring.clone();
    state.population = population;
    state.offspring = offspring;
    Ok(out)
}

/// `batch` fresh random policies, evaluated.
pub fn random_search_generation(
    bank: &mut PolicyBank,
    env: &dyn PolicyEnv,
    batch: usize,
    generation: u32,
    rng: &mut Stream,
) -> Result<Vec<PolicyPair>> {
    spawn_random_batch(bank, env, batch, generation, 1, rng)
}

#[derive(Debug, Clone)]
pub enum DsState {
    Gep(GepState),
    Ns(NsState),
    /// Random search keeps every evaluated policy.
    Rs(ArchiveStore<PolicyId>),
}

/// Per-generation bookkeeping (no wall-clock, so it is reproducible).
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub generation: u32,
    pub evaluations: u64,
    pub new_outcomes: usize,
    pub archive_size: usize,
    pub population_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Telemetry {
    pub generations: Vec<GenerationSummary>,
    /// `(generation, selected outcomes)`; `None` when logging is off.
    pub selections: Option<Vec<(u32, Vec<Vec<f64>>)>>,
}

/// Drives one seeded run of a diversity algorithm.
pub struct Explorer<'e> {
    algorithm: Algorithm,
    env: &'e dyn PolicyEnv,
    cfg: DsConfig,
    bank: PolicyBank,
    rng: Stream,
    state: DsState,
    initial: Vec<PolicyPair>,
    generation: u32,
    evaluations: u64,
    telemetry: Telemetry,
}

impl<'e> Explorer<'e> {
    pub fn new(algorithm: Algorithm, env: &'e dyn PolicyEnv, cfg: DsConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        // NS only ever expands pinned population members and GEP selects
        // anywhere in its population, so only GEP needs lineage checkpoints.
        let checkpoint = match algorithm {
            Algorithm::Gep => DEFAULT_CHECKPOINT_EVERY,
            _ => 0,
        };
        let mut bank = PolicyBank::new(env.topology().clone(), cfg.init_bounds, cfg.mutation, checkpoint);
        let mut rng = stream(seed);
        let initial = spawn_random_batch(&mut bank, env, cfg.n_init, 0, cfg.workers, &mut rng)?;
        let dim = env.outcome_dim();
        let state = match algorithm {
            Algorithm::Gep => DsState::Gep(GepState::new(&initial, env.reachable_bounds(), cfg.n_update)?),
            Algorithm::Ns => {
                for p in &initial {
                    bank.pin(p.params)?;
                }
                DsState::Ns(NsState::new(&initial, dim, cfg.n_update)?)
            }
            Algorithm::Rs => {
                let mut store = ArchiveStore::with_update_period(dim, usize::MAX)?;
                for p in &initial {
                    store.adopt(p.clone())?;
                }
                DsState::Rs(store)
            }
        };
        let telemetry = Telemetry {
            generations: Vec::new(),
            selections: cfg.log_selection.then(Vec::new),
        };
        Ok(Explorer {
            algorithm,
            env,
            evaluations: initial.len() as u64,
            cfg,
            bank,
            rng,
            state,
            initial,
            generation: 0,
            telemetry,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn config(&self) -> &DsConfig {
        &self.cfg
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn initial(&self) -> &[PolicyPair] {
        &self.initial
    }

    pub fn state(&self) -> &DsState {
        &self.state
    }

    pub fn bank(&self) -> &PolicyBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut PolicyBank {
        &mut self.bank
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    /// The archive a run leaves behind: the GEP population, the NS novelty
    /// archive, or every random-search sample.
    pub fn archive(&self) -> &[PolicyPair] {
        match &self.state {
            DsState::Gep(s) => s.population.entries(),
            DsState::Ns(s) => s.archive.entries(),
            DsState::Rs(s) => s.entries(),
        }
    }

    pub fn population_size(&self) -> usize {
        match &self.state {
            DsState::Gep(s) => s.population.len(),
            DsState::Ns(s) => s.population.len(),
            DsState::Rs(s) => s.len(),
        }
    }

    /// Runs one generation and returns what it produced.
    pub fn step(&mut self) -> Result<GenerationOutput> {
        let g = self.generation;
        let out = match &mut self.state {
            DsState::Gep(s) => gep_generation(s, &mut self.bank, self.env, &self.cfg, g + 1, &mut self.rng)?,
            DsState::Ns(s) => ns_generation(s, &mut self.bank, self.env, &self.cfg, g + 1, &mut self.rng)?,
            DsState::Rs(store) => {
                let new = spawn_random_batch(
                    &mut self.bank,
                    self.env,
                    self.cfg.budget(),
                    g + 1,
                    self.cfg.workers,
                    &mut self.rng,
                )?;
                for p in &new {
                    store.adopt(p.clone())?;
                }
                GenerationOutput {
                    new,
                    selected: Vec::new(),
                }
            }
        };
        self.evaluations += out.new.len() as u64;
        self.telemetry.generations.push(GenerationSummary {
            generation: g,
            evaluations: self.evaluations,
            new_outcomes: out.new.len(),
            archive_size: self.archive().len(),
            population_size: self.population_size(),
        });
        if let Some(sel) = &mut self.telemetry.selections {
            sel.push((g, out.selected.clone()));
        }
        self.generation += 1;
        Ok(out)
    }
}
