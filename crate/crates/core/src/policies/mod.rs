//! Fixed-topology MLP policies over flat parameter vectors, their random
//! initialisation, bounded polynomial mutation, compact storage and binary
//! encoding.

mod bank;
mod codec;
mod mutation;

pub use bank::{Origin, PolicyBank, PolicyId, DEFAULT_CHECKPOINT_EVERY};
pub use codec::{decode_policy, encode_policy, read_policy, write_policy};
pub use mutation::{polynomial_delta, polynomial_mutation, GeneBounds, MutationSpec};

use rand::Rng;

use crate::error::{Error, Result};

/// Hidden layer width used by both benchmark environments.
pub const DEFAULT_HIDDEN: [usize; 2] = [50, 50];

/// Layer sizes of a fully connected network, inputs first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    layers: Vec<usize>,
}

impl Topology {
    pub fn new(n_inputs: usize, hidden: &[usize], n_outputs: usize) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 2);
        layers.push(n_inputs);
        layers.extend_from_slice(hidden);
        layers.push(n_outputs);
        Self::from_layers(layers)
    }

    /// Two hidden layers of 50 units.
    pub fn mlp(n_inputs: usize, n_outputs: usize) -> Self {
        Self::new(n_inputs, &DEFAULT_HIDDEN, n_outputs).expect("static topology is valid")
    }

    pub fn from_layers(layers: Vec<usize>) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {layers:?}")));
        }
        Ok(Topology { layers })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layers.last().unwrap()
    }

    pub fn hidden(&self) -> &[usize] {
        &self.layers[1..self.layers.len() - 1]
    }

    /// Weights plus biases over all layers.
    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn widest(&self) -> usize {
        *self.layers.iter().max().unwrap()
    }
}

/// One dense layer in row-major form: `weights[j][i]` connects input `i` to
/// unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Splits a flat vector (per layer: weights row-major, then biases).
pub fn unflatten(topology: &Topology, params: &[f64]) -> Result<Vec<Layer>> {
    check_len(topology, params)?;
    let mut at = 0;
    let mut layers = Vec::new();
    for w in topology.layers.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = (0..n_out)
            .map(|j| params[at + j * n_in..at + (j + 1) * n_in].to_vec())
            .collect();
        at += n_in * n_out;
        let biases = params[at..at + n_out].to_vec();
        at += n_out;
        layers.push(Layer { weights, biases });
    }
    Ok(layers)
}

pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        for row in &l.weights {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&l.biases);
    }
    out
}

fn check_len(topology: &Topology, params: &[f64]) -> Result<()> {
    if params.len() != topology.param_count() {
        return Err(Error::invalid(format!(
            "parameter vector has {} entries, topology {:?} needs {}",
            params.len(),
            topology.layers,
            topology.param_count()
        )));
    }
    Ok(())
}

/// Uniform draw of every parameter within `bounds`.
pub fn random_init<R: Rng + ?Sized>(topology: &Topology, bounds: GeneBounds, rng: &mut R) -> Vec<f64> {
    (0..topology.param_count())
        .map(|_| bounds.lower + (bounds.upper - bounds.lower) * rng.gen::<f64>())
        .collect()
}

/// Feed-forward tanh network whose outputs are scaled to the action bounds.
#[derive(Debug, Clone)]
pub struct MlpPolicy {
    topology: Topology,
    params: Vec<f64>,
    // Per layer: transposed weights (input-major) followed by biases.
    packed: Vec<f64>,
    output_scale: Vec<f64>,
}

/// Reusable activation buffers for [`MlpPolicy::forward_into`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl MlpPolicy {
    pub fn new(topology: Topology, params: &[f64], output_scale: Vec<f64>) -> Result<Self> {
        check_len(&topology, params)?;
        if output_scale.len() != topology.n_outputs() {
            return Err(Error::invalid(format!(
                "output scale has {} entries for {} outputs",
                output_scale.len(),
                topology.n_outputs()
            )));
        }
        let mut packed = Vec::with_capacity(params.len());
        let mut at = 0;
        for w in topology.layers.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            for i in 0..n_in {
                for j in 0..n_out {
                    packed.push(params[at + j * n_in + i]);
                }
            }
            at += n_in * n_out;
            packed.extend_from_slice(&params[at..at + n_out]);
            at += n_out;
        }
        Ok(MlpPolicy {
            topology,
            params: params.to_vec(),
            packed,
            output_scale,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn output_scale(&self) -> &[f64] {
        &self.output_scale
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.topology.n_inputs() {
            return Err(Error::invalid(format!(
                "observation has {} entries, policy expects {}",
                obs.len(),
                self.topology.n_inputs()
            )));
        }
        let mut out = vec![0.0; self.topology.n_outputs()];
        self.forward_into(obs, &mut Scratch::default(), &mut out);
        out_check(&out);
        Ok(out)
    }

    /// Allocation-free forward pass; `obs` and `out` must match the topology.
    pub fn forward_into(&self, obs: &[f64], scratch: &mut Scratch, out: &mut [f64]) {
        debug_assert_eq!(obs.len(), self.topology.n_inputs());
        debug_assert_eq!(out.len(), self.topology.n_outputs());
        let widest = self.topology.widest();
        scratch.a.resize(widest, 0.0);
        scratch.b.resize(widest, 0.0);
        let (mut cur, mut next) = (&mut scratch.a, &mut scratch.b);
        cur[..obs.len()].copy_from_slice(obs);
        let mut at = 0;
        for w in self.topology.layers.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let acc = &mut next[..n_out];
            acc.fill(0.0);
            for i in 0..n_in {
                let x = cur[i];
                let col = &self.packed[at + i * n_out..at + (i + 1) * n_out];
                for (a, w) in acc.iter_mut().zip(col) {
                    *a += w * x;
                }
            }
            at += n_in * n_out;
            for (a, b) in acc.iter_mut().zip(&self.packed[at..at + n_out]) {
                *a = (*a + b).tanh();
            }
            at += n_out;
            std::mem::swap(&mut cur, &mut next);
        }
        for ((o, a), s) in out.iter_mut().zip(cur.iter()).zip(&self.output_scale) {
            *o = a * s;
        }
    }
}

#[inline]
fn out_check(out: &[f64]) {
    debug_assert!(out.iter().all(|v| v.is_finite()));
}
