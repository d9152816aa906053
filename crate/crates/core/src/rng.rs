//! Seeded, forkable pseudo-randomness.
//!
//! Every stream is a ChaCha8 generator whose seed is derived from the parent
//! seed and a label, so identical `(seed, labels)` give bit-identical draws on
//! every platform. Forking never advances the parent stream.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream keyed by `label`.
    pub fn fork(&self, label: &str) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(fnv1a(label.as_bytes()))))
    }

    /// Independent child stream keyed by `label` and an index (trial number,
    /// fixture number, ...).
    pub fn fork_indexed(&self, label: &str, index: u64) -> Self {
        let base = splitmix64(self.seed ^ splitmix64(fnv1a(label.as_bytes())));
        Self::new(splitmix64(base ^ splitmix64(index.wrapping_add(0x9E37_79B9))))
    }
}

impl RngCore for RandomSource {
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

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
