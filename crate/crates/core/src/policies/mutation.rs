use rand::Rng;

use crate::error::{Error, Result};

/// Closed interval every gene must stay in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for GeneBounds {
    fn default() -> Self {
        GeneBounds {
            lower: -1.0,
            upper: 1.0,
        }
    }
}

impl GeneBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::invalid(format!("gene bounds [{lower}, {upper}] are empty")));
        }
        Ok(GeneBounds { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Bounded polynomial mutation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationSpec {
    /// Distribution index; larger values give smaller steps.
    pub eta: f64,
    /// Per-gene mutation probability.
    pub p_mutation: f64,
    pub bounds: GeneBounds,
}

impl MutationSpec {
    pub fn new(eta: f64, p_mutation: f64, bounds: GeneBounds) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        if !(0.0..=1.0).contains(&p_mutation) {
            return Err(Error::invalid(format!("p_mutation {p_mutation} is not a probability")));
        }
        Ok(MutationSpec {
            eta,
            p_mutation,
            bounds,
        })
    }
}

/// Normalised polynomial step for gene `x` given a uniform draw `u`.
///
/// The returned step is relative to the bounds width; `x + δ·(upper − lower)`
/// always lands inside `[lower, upper]` up to rounding.
pub fn polynomial_delta(x: f64, bounds: GeneBounds, eta: f64, u: f64) -> f64 {
    let width = bounds.upper - bounds.lower;
    let exp = eta + 1.0;
    let inv = 1.0 / exp;
    if u < 0.5 {
        let d1 = (x - bounds.lower) / width;
        let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(exp);
        v.powf(inv) - 1.0
    } else {
        let d2 = (bounds.upper - x) / width;
        let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(exp);
        1.0 - v.powf(inv)
    }
}

/// Mutates each gene independently with probability `p_mutation`.
///
/// Mutated positions are found by geometric skipping, which is equivalent in
/// distribution to one Bernoulli draw per gene.
pub fn polynomial_mutation<R: Rng + ?Sized>(params: &[f64], spec: &MutationSpec, rng: &mut R) -> Result<Vec<f64>> {
    let b = spec.bounds;
    if let Some((i, g)) = params.iter().enumerate().find(|(_, g)| !b.contains(**g)) {
        return Err(Error::invalid(format!(
            "gene {i} = {g} lies outside [{}, {}]",
            b.lower, b.upper
        )));
    }
    let mut out = params.to_vec();
    let p = spec.p_mutation;
    if p <= 0.0 || out.is_empty() {
        return Ok(out);
    }
    let width = b.upper - b.lower;
    let log_q = (1.0 - p).ln();
    let skip = |rng: &mut R| -> usize {
        if p >= 1.0 {
            return 0;
        }
        // 1 - U lies in (0, 1], so the logarithm is finite.
        let u: f64 = 1.0 - rng.gen::<f64>();
        let s = (u.ln() / log_q).floor();
        if s >= usize::MAX as f64 {
            usize::MAX
        } else {
            s as usize
        }
    };
    let mut pos = skip(rng);
    while pos < out.len() {
        let x = out[pos];
        let u: f64 = rng.gen();
        let delta = polynomial_delta(x, b, spec.eta, u);
        out[pos] = (x + delta * width).clamp(b.lower, b.upper);
        pos = pos.saturating_add(1).saturating_add(skip(rng));
    }
    Ok(out)
}
