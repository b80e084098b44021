//! Counter-addressable random streams.
//!
//! Every draw in the crate goes through [`RngStream`], a ChaCha8 generator
//! keyed by `(seed, stream)`. ChaCha exposes 2^64 independent streams per key
//! and a seekable word counter, so a replica's randomness depends only on its
//! `(seed, stream id)` pair and never on scheduling. Gaussians are drawn with
//! the ziggurat sampler of `rand_distr::StandardNormal`, exponentials with
//! `rand_distr::Exp1`.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids at or above this offset are reserved for auxiliary streams
/// derived from a replica stream (see [`RngStream::auxiliary`]).
pub const AUX_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { seed, stream, inner }
    }

    /// Opens `(seed, stream)` positioned at `counter` 32-bit words.
    pub fn at(seed: u64, stream: u64, counter: u128) -> Self {
        let mut s = Self::new(seed, stream);
        s.inner.set_word_pos(counter);
        s
    }

    /// The stream for replica `r` under `seed`.
    pub fn replica(seed: u64, r: u64) -> Self {
        Self::new(seed, r & !AUX_STREAM_BIT)
    }

    /// An independent companion stream for the same replica.
    pub fn auxiliary(&self) -> Self {
        Self::new(self.seed, self.stream ^ AUX_STREAM_BIT)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
