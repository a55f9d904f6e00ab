//! Seeded random streams.
//!
//! Every run owns exactly one [`Stream`]. Work that may be scheduled out of
//! order (offspring evaluation, degradation probes) receives a child seed drawn
//! from the owning stream up front, so the draw order never depends on
//! scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws a seed for a child stream.
pub fn child_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}
