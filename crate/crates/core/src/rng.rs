//! Counter-based random stream derivation.
//!
//! Every random draw in a run comes from a ChaCha stream keyed by
//! `(master seed, replicate, purpose, counters)`. Changing the population
//! size or the number of samples therefore never shifts the draws of an
//! unrelated stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Synthetic target construction; shared by every replicate.
    TargetSetup,
    /// Initial proposal population.
    Init,
    /// Sampling for one mixand at one iteration.
    Sampling { iteration: u64, component: u64 },
}

impl Stream {
    fn key(self) -> (u64, u64, u64) {
        match self {
            Stream::TargetSetup => (1, 0, 0),
            Stream::Init => (2, 0, 0),
            Stream::Sampling { iteration, component } => (3, iteration, component),
        }
    }
}

/// Stream factory for one replicate of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreams {
    master: u64,
    replicate: u64,
}

impl RngStreams {
    pub fn new(master: u64, replicate: u64) -> Self {
        RngStreams { master, replicate }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn stream(&self, which: Stream) -> ChaCha8Rng {
        let (tag, a, b) = which.key();
        // the target is common to all replicates
        let replicate = if which == Stream::TargetSetup { 0 } else { self.replicate };
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master.to_le_bytes());
        seed[8..16].copy_from_slice(&replicate.to_le_bytes());
        seed[16..24].copy_from_slice(&tag.to_le_bytes());
        seed[24..32].copy_from_slice(&a.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(b);
        rng
    }

    pub fn target_setup(&self) -> ChaCha8Rng {
        self.stream(Stream::TargetSetup)
    }

    pub fn init(&self) -> ChaCha8Rng {
        self.stream(Stream::Init)
    }

    pub fn sampling(&self, iteration: usize, component: usize) -> ChaCha8Rng {
        self.stream(Stream::Sampling { iteration: iteration as u64, component: component as u64 })
    }
}
