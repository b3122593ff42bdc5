//! Counter-based derivation of independent random streams from one master seed.
//!
//! Every (trial, role) pair maps to its own ChaCha stream, so adding a structure
//! or a role never shifts the randomness another role sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Trace,
    Table,
    Oracle,
    RandomTreap,
    InsertOrder,
    Hash,
    ShuffledPriorities,
    Permutation,
    QueryOrder,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Trace => 1,
            Stream::Table => 2,
            Stream::Oracle => 3,
            Stream::RandomTreap => 4,
            Stream::InsertOrder => 5,
            Stream::Hash => 6,
            Stream::ShuffledPriorities => 7,
            Stream::Permutation => 8,
            Stream::QueryOrder => 9,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stream` in trial `trial` under `master`.
pub fn derive(master: u64, trial: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ stream.tag())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shorthand for `rng(derive(master, trial, stream))`.
pub fn stream_rng(master: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    rng(derive(master, trial, stream))
}
