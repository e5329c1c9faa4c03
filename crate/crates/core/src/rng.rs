//! Counter-keyed random streams.
//!
//! Every random draw in the crate comes from a stream identified by
//! `(seed, trial, purpose)`. The triple is packed verbatim into the 256-bit
//! ChaCha key, so distinct triples always give distinct, independent streams
//! and results do not depend on the order in which workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream handed to every sampling routine.
pub type RngStream = ChaCha8Rng;

/// What a stream is used for. Keeps e.g. shadowing and channel draws of the
/// same trial independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Placement = 1,
    Shadowing = 2,
    Channel = 3,
    PilotNoise = 4,
    Synthetic = 5,
}

/// Derives the stream for `(seed, trial, purpose)`.
pub fn seed_schedule(seed: u64, trial: u64, purpose: Purpose) -> RngStream {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    // domain tag so the all-zero key is never produced
    key[24..32].copy_from_slice(b"mimo-ppa");
    ChaCha8Rng::from_seed(key)
}

/// Packs two indices into one trial id. Used when a trial is naturally
/// addressed by (outer, inner), e.g. (drop, small-scale realization).
pub fn trial_id(outer: u64, inner: u64) -> u64 {
    (outer << 32) ^ inner
}
