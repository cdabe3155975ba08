//! Named random sub-streams derived from a single seed.
//!
//! Every consumer of randomness (instance generation, message scheduling,
//! MCMC) draws from its own ChaCha stream so that changing one consumer never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generator,
    Scheduler,
    Mcmc,
    Rejection,
    Synthetic,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Generator => 1,
            Stream::Scheduler => 2,
            Stream::Mcmc => 3,
            Stream::Rejection => 4,
            Stream::Synthetic => 5,
        }
    }
}

/// Rng for `stream` under the master `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
