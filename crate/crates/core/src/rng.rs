//! Deterministic random streams keyed by `(seed, stream)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A single-owner pseudo-random stream.
///
/// Identical `(seed, stream)` pairs produce identical sequences; different
/// stream indices select disjoint ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngHandle {
    inner: ChaCha8Rng,
}

/// Opens stream `stream` under key `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> RngHandle {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(stream);
    RngHandle { inner }
}

impl RngHandle {
    /// Draws a fresh 64-bit seed for a child stream.
    pub fn fork_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl RngCore for RngHandle {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a sequence of words into one well-mixed 64-bit key. Stable across
/// platforms and releases, unlike `std::hash`.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |acc, &w| mix64(acc ^ mix64(w)))
}
