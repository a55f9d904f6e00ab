//! Binary policy encoding.
//!
//! Layout (little-endian): `u32` layer count `L`, `L × u32` layer sizes
//! (inputs first), then every parameter as an `f64` in flat order.

use std::io::{Read, Write};

use super::Topology;
use crate::error::{Error, Result};

pub fn write_policy<W: Write>(w: &mut W, topology: &Topology, params: &[f64]) -> Result<()> {
    if params.len() != topology.param_count() {
        return Err(Error::invalid("parameter count does not match topology"));
    }
    w.write_all(&(topology.layers().len() as u32).to_le_bytes())?;
    for &n in topology.layers() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_policy<R: Read>(r: &mut R) -> Result<(Topology, Vec<f64>)> {
    let n_layers = read_u32(r)? as usize;
    if !(2..=64).contains(&n_layers) {
        return Err(Error::invalid(format!("implausible layer count {n_layers}")));
    }
    let layers = (0..n_layers)
        .map(|_| read_u32(r).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let topology = Topology::from_layers(layers)?;
    let mut params = Vec::with_capacity(topology.param_count());
    let mut buf = [0u8; 8];
    for _ in 0..topology.param_count() {
        r.read_exact(&mut buf)?;
        params.push(f64::from_le_bytes(buf));
    }
    Ok((topology, params))
}

pub fn encode_policy(topology: &Topology, params: &[f64]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(4 + 4 * topology.layers().len() + 8 * params.len());
    write_policy(&mut out, topology, params)?;
    Ok(out)
}

pub fn decode_policy(bytes: &[u8]) -> Result<(Topology, Vec<f64>)> {
    let mut cur = bytes;
    let out = read_policy(&mut cur)?;
    if !cur.is_empty() {
        return Err(Error::invalid(format!("{} trailing bytes after policy", cur.len())));
    }
    Ok(out)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
