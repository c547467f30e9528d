//! Counter-based stream splitting: one master seed expands into independent
//! ChaCha streams, one per consumer of randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Consumers of randomness within a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ModelInit = 0,
    Environment = 1,
    Arrivals = 2,
    Noise = 3,
    Policy = 4,
}

pub fn stream(master_seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which as u64);
    rng
}
