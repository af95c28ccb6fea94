//! Deterministic RNG substreams.
//!
//! Every random entity (a UE drop, a UE-site LSP draw, a link's small-scale
//! parameters, a correlation field) owns a ChaCha8 stream whose seed is a
//! hash of the master seed and the entity's identifiers. Results therefore do
//! not depend on the order in which workers visit entities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream families. Distinct tags keep e.g. the drop stream of UE 3 apart
/// from the LSP stream of UE 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    DropPosition = 1,
    DropHeight = 2,
    DropVelocity = 3,
    LinkState = 4,
    Lsp = 5,
    LspField = 6,
    SmallScale = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `(master, kind, ids...)`.
pub fn derive_seed(master: u64, kind: Stream, ids: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ 0x5ca1_ab1e);
    h = splitmix64(h ^ kind as u64);
    for &id in ids {
        h = splitmix64(h ^ id);
    }
    h
}

pub fn substream(master: u64, kind: Stream, ids: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, kind, ids))
}
