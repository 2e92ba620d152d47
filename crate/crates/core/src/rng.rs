//! Seeded random streams. Every stochastic model draws from its own ChaCha
//! stream so adding draws in one model never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Stock,
    Detection,
    Laser,
    Measurement,
    Scenario,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Stock => 1,
            Stream::Detection => 2,
            Stream::Laser => 3,
            Stream::Measurement => 4,
            Stream::Scenario => 5,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
