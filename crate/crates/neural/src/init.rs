use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Tensor;

/// Deterministic parameter initializer. Each parameter draws from its own
/// stream keyed on (seed, name), so values do not depend on creation order.
#[derive(Debug, Clone, Copy)]
pub struct Init {
    pub seed: u64,
    /// Weights are uniform in `[-scale, scale]`.
    pub scale: f64,
}

impl Default for Init {
    fn default() -> Self {
        Init {
            seed: 0,
            scale: 0.1,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init {
            seed,
            ..Init::default()
        }
    }

    pub fn rng_for(&self, name: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name).rotate_left(17))
    }

    pub fn uniform(&self, name: &str, shape: Vec<usize>) -> Tensor {
        let mut rng = self.rng_for(name);
        let n: usize = shape.iter().product();
        let s = self.scale;
        let values = (0..n).map(|_| rng.random_range(-s..=s)).collect();
        Tensor::new(shape, values).expect("length computed from shape")
    }
}
