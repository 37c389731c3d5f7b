//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream derived from the
//! run seed, so that adding or removing one consumer (for example an error model that only
//! some schemes train) never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 1,
    Features = 2,
    QInit = 3,
    DeltaInit = 4,
    Rollout = 5,
    Batch = 6,
    Layout = 8,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
