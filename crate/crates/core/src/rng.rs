//! Deterministic random streams with independent per-trial substreams.
//!
//! Every [`Rng`] is a ChaCha8 stream whose key is derived from a root seed and
//! a path of substream indices. Work split across threads stays reproducible
//! as long as each unit of work draws from its own index-derived substream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    path: Vec<u64>,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, Vec::new())
    }

    fn at(seed: u64, path: Vec<u64>) -> Self {
        let mut h = splitmix64(seed);
        for &p in &path {
            h = splitmix64(h ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
        }
        let mut key = [0u8; 32];
        let mut k = h;
        for chunk in key.chunks_mut(8) {
            k = splitmix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        Self { seed, path, inner: ChaCha8Rng::from_seed(key) }
    }

    /// Independent stream for child `index`. The result depends only on the
    /// root seed and the index path, never on how much has been drawn here.
    pub fn substream(&self, index: u64) -> Rng {
        let mut path = self.path.clone();
        path.push(index);
        Self::at(self.seed, path)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }
}

impl RngCore for Rng {
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
