//! Splittable random streams.
//!
//! Every logical task draws from its own ChaCha stream addressed by
//! `(seed, path)`, so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Address of an independent random substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    path: u64,
}

#[inline]
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Substream for the `index`-th child task.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            path: mix(self.path ^ mix(index.wrapping_add(1))),
        }
    }

    /// Substream addressed by a label, e.g. `"reference"` or `"folner"`.
    pub fn named(&self, label: &str) -> Self {
        // FNV-1a; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        Self {
            seed: self.seed,
            path: mix(self.path.rotate_left(17) ^ h),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path);
        rng
    }
}

/// Run `n` replicates in parallel, replicate `i` drawing from `key.child(i)`.
/// Output order is the replicate order regardless of scheduling.
pub fn replicate<T, F>(key: StreamKey, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.child(i as u64).rng();
            f(i, &mut rng)
        })
        .collect()
}
