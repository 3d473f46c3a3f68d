//! Reproducible Gaussian increments.
//!
//! Each trajectory draws from its own ChaCha8 stream keyed by `(seed, stream_id)`,
//! so the noise a replica sees does not depend on which thread runs it or in
//! what order replicas are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

/// Serializable position of a [`NoiseStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamPosition {
    pub seed: u64,
    pub stream_id: u64,
    pub counter: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            counter: 0,
            rng,
        }
    }

    /// Rebuilds a stream and fast-forwards it to `pos.counter` draws.
    pub fn resume(pos: StreamPosition) -> Self {
        let mut s = Self::new(pos.seed, pos.stream_id);
        for _ in 0..pos.counter {
            s.normal();
        }
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of normal draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn position(&self) -> StreamPosition {
        StreamPosition {
            seed: self.seed,
            stream_id: self.stream_id,
            counter: self.counter,
        }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.counter += 1;
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        (self.normal(), self.normal())
    }

    /// Uniform draw on `[0, 1)`; does not advance the normal counter.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}
