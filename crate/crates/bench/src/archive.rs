//! Binary dump of a diversity run's final archive.
//!
//! Policies are stored as lineage records (random seed, or parent plus
//! mutation seed) so parameters can be replayed on load. Only the ancestors
//! of archived policies are written. Layout, all little-endian:
//!
//! ```text
//! b"DSLABARC" u32 version
//! u32 L, L x u32 layer sizes
//! f64 eta, f64 p_mutation, f64 gene_lower, f64 gene_upper, f64 init_lower, f64 init_upper
//! u64 n_records, then per record: u64 id, u8 tag
//!     tag 0: u64 seed | tag 1: u64 parent, u64 seed | tag 2: encoded policy
//! u64 n_entries, then per entry:
//!     u64 id, u64 policy, u64 parent (u64::MAX = none), u32 generation, u32 dim, dim x f64
//! ```

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use dslab_core::explorers::PolicyPair;
use dslab_core::policies::{
    read_policy, write_policy, GeneBounds, MutationSpec, Origin, PolicyBank, PolicyId, Topology,
};
use dslab_core::sel_exp::SamplePair;

const MAGIC: &[u8; 8] = b"DSLABARC";
const VERSION: u32 = 1;
const NO_PARENT: u64 = u64::MAX;

/// Writes `entries` and the lineage needed to rebuild their parameters.
pub fn write_archive<W: Write>(w: &mut W, bank: &mut PolicyBank, entries: &[PolicyPair]) -> Result<()> {
    let mut needed = BTreeSet::new();
    let mut stack: Vec<PolicyId> = entries.iter().map(|e| e.params).collect();
    while let Some(id) = stack.pop() {
        if !needed.insert(id) {
            continue;
        }
        if let Origin::Mutant { parent, .. } = bank.origin(id)? {
            stack.push(parent);
        }
    }

    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    let topology = bank.topology().clone();
    put_u32(w, topology.layers().len() as u32)?;
    for &n in topology.layers() {
        put_u32(w, n as u32)?;
    }
    let m = *bank.mutation();
    let init = bank.init_bounds();
    for x in [
        m.eta,
        m.p_mutation,
        m.bounds.lower,
        m.bounds.upper,
        init.lower,
        init.upper,
    ] {
        put_f64(w, x)?;
    }
    put_u64(w, needed.len() as u64)?;
    for &id in &needed {
        put_u64(w, id)?;
        match bank.origin(id)? {
            Origin::Random { seed } => {
                w.write_all(&[0])?;
                put_u64(w, seed)?;
            }
            Origin::Mutant { parent, seed } => {
                w.write_all(&[1])?;
                put_u64(w, parent)?;
                put_u64(w, seed)?;
            }
            Origin::Explicit => {
                w.write_all(&[2])?;
                let params = bank.params(id)?;
                write_policy(w, &topology, &params)?;
            }
        }
    }
    put_u64(w, entries.len() as u64)?;
    for e in entries {
        put_u64(w, e.id)?;
        put_u64(w, e.params)?;
        put_u64(w, e.parent_id.unwrap_or(NO_PARENT))?;
        put_u32(w, e.generation)?;
        put_u32(w, e.outcome.len() as u32)?;
        for &x in &e.outcome {
            put_f64(w, x)?;
        }
    }
    Ok(())
}

pub fn save_archive(path: &Path, bank: &mut PolicyBank, entries: &[PolicyPair]) -> Result<()> {
    let mut buf = Vec::new();
    write_archive(&mut buf, bank, entries)?;
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// An archive read back from disk. Entry `params` fields refer to ids in
/// `bank`, which are renumbered densely on load.
pub struct LoadedArchive {
    pub bank: PolicyBank,
    pub entries: Vec<PolicyPair>,
}

impl LoadedArchive {
    /// `(policy id, outcome)` pairs in entry order.
    pub fn policy_outcomes(&self) -> Vec<(PolicyId, Vec<f64>)> {
        self.entries.iter().map(|e| (e.params, e.outcome.clone())).collect()
    }
}

pub fn read_archive<R: Read>(r: &mut R) -> Result<LoadedArchive> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        bail!("not an archive file");
    }
    let version = get_u32(r)?;
    if version != VERSION {
        bail!("unsupported archive version {version}");
    }
    let n_layers = get_u32(r)? as usize;
    if !(2..=64).contains(&n_layers) {
        bail!("implausible layer count {n_layers}");
    }
    let layers = (0..n_layers)
        .map(|_| get_u32(r).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let topology = Topology::from_layers(layers)?;
    let mut f = [0.0; 6];
    for x in &mut f {
        *x = get_f64(r)?;
    }
    let mutation = MutationSpec::new(f[0], f[1], GeneBounds::new(f[2], f[3])?)?;
    let init = GeneBounds::new(f[4], f[5])?;
    let mut bank = PolicyBank::new(topology.clone(), init, mutation, 0);

    let n_records = get_u64(r)?;
    let mut remap: HashMap<u64, PolicyId> = HashMap::new();
    for _ in 0..n_records {
        let id = get_u64(r)?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let new = match tag[0] {
            0 => bank.restore(Origin::Random { seed: get_u64(r)? }, None)?,
            1 => {
                let parent = get_u64(r)?;
                let seed = get_u64(r)?;
                let parent = *remap
                    .get(&parent)
                    .with_context(|| format!("record {id} refers to unknown parent {parent}"))?;
                bank.restore(Origin::Mutant { parent, seed }, None)?
            }
            2 => {
                let (t, params) = read_policy(r)?;
                if t != topology {
                    bail!("record {id} has a different topology");
                }
                bank.restore(Origin::Explicit, Some(params))?
            }
            t => bail!("unknown record tag {t}"),
        };
        if remap.insert(id, new).is_some() {
            bail!("duplicate record {id}");
        }
    }

    let n_entries = get_u64(r)?;
    let mut entries = Vec::with_capacity(n_entries.min(1 << 24) as usize);
    for _ in 0..n_entries {
        let id = get_u64(r)?;
        let policy = get_u64(r)?;
        let parent = get_u64(r)?;
        let generation = get_u32(r)?;
        let dim = get_u32(r)? as usize;
        if dim > 64 {
            bail!("implausible outcome dimension {dim}");
        }
        let outcome = (0..dim).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
        let params = *remap
            .get(&policy)
            .with_context(|| format!("entry {id} refers to unknown policy {policy}"))?;
        entries.push(SamplePair {
            params,
            outcome,
            id,
            parent_id: (parent != NO_PARENT).then_some(parent),
            generation,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        bail!("trailing bytes after archive");
    }
    Ok(LoadedArchive { bank, entries })
}

pub fn load_archive(path: &Path) -> Result<LoadedArchive> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_archive(&mut bytes.as_slice()).with_context(|| format!("decoding {}", path.display()))
}

fn put_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_f64<W: Write>(w: &mut W, x: f64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
