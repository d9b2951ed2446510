//! Seeded random streams with stable child derivation.
//!
//! Every stochastic stage in the pipeline takes an [`RngStream`] rather than a
//! thread-local RNG. A stream is created from an explicit `u64` seed and can
//! derive independent child streams from integer or string keys via a fixed
//! 64-bit mixing function, so the same root seed always produces the same
//! artifacts regardless of platform, process or iteration order elsewhere.
//!
//! The generator is ChaCha8, which is specified to be reproducible across
//! versions and architectures. The derivation hash is SplitMix64-based and
//! written out explicitly here — deliberately not the standard library's
//! `DefaultHasher`, whose output may change between releases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a fixed, well-mixed 64-bit permutation.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable combination of a seed and a key into a new seed.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    mix64(seed ^ mix64(key.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Stable hash of a string key (FNV-1a folded through the mixer), for
/// deriving per-item seeds from identifiers.
pub fn hash_str(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive_seed(seed, h)
}

/// A seeded random stream. Cheap to clone; cloning forks the current state.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this stream was created with (not its current state).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child stream from an integer key.
    pub fn derive(&self, key: u64) -> RngStream {
        RngStream::new(derive_seed(self.seed, key))
    }

    /// Derive an independent child stream from a string key.
    pub fn derive_str(&self, key: &str) -> RngStream {
        RngStream::new(hash_str(self.seed, key))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    /// Uniform index in [0, n). `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() requires a nonempty range");
        // 128-bit multiply-shift keeps the draw unbiased without rejection.
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Standard normal via Box–Muller. Draws exactly two uniforms per call.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]: keeps the log finite
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform direction on the unit sphere (area-preserving: uniform z,
    /// uniform azimuth).
    pub fn unit_direction(&mut self) -> [f64; 3] {
        let z = self.uniform_in(-1.0, 1.0);
        let phi = self.uniform_in(0.0, std::f64::consts::TAU);
        let r = (1.0 - z * z).max(0.0).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices drawn without replacement from [0, n), in draw
    /// order. Panics if `k > n`.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} distinct indices from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
