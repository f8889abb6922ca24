//! Seed derivation. Every stochastic component receives its own generator
//! derived from a root seed and a path of integer labels, so results never
//! depend on call order or on how work is spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A splittable seed: `child` derives an independent stream per label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(splitmix64(seed))
    }

    pub fn child(self, label: u64) -> Self {
        SeedStream(splitmix64(
            self.0 ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F)),
        ))
    }

    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |s, &l| s.child(l))
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}
