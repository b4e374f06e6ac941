//! Seeded randomness.
//!
//! Every random decision in the crate draws from a ChaCha8 generator
//! derived from one base seed plus a component label. Labels map to
//! distinct ChaCha streams, so components never share a sequence and
//! adding a draw in one place cannot shift the values seen elsewhere.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hash::fnv1a64;

/// Generator for the substream identified by `label` under `seed`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(label.as_bytes()));
    rng
}
