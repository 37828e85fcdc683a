//! I.i.d. trajectory sampling by sequential inverse-CDF draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::policy::PathDistribution;

/// Root seed. Sample `i` draws from stream `i` of the generator seeded with
/// this value, so output is independent of thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Deterministically derives an independent child seed (splitmix64 mixing).
    pub fn derive(self, a: u64, b: u64) -> RngSeed {
        let mut z = self.0 ^ splitmix(a.wrapping_add(splitmix(b)));
        z = splitmix(z);
        RngSeed(z)
    }

    pub fn stream(self, ordinal: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(ordinal);
        rng
    }
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `count` paths of length `dist.path_length()`.
pub fn sample_paths(dist: &PathDistribution, count: usize, seed: RngSeed) -> Result<Vec<Path>> {
    (0..count).into_par_iter().map(|i| sample_one(dist, &mut seed.stream(i as u64))).collect()
}

/// Draws a single path from an explicit generator.
pub fn sample_one<R: Rng + ?Sized>(dist: &PathDistribution, rng: &mut R) -> Result<Path> {
    let n = dist.path_length();
    let mut nodes = Vec::with_capacity(n);
    for step in 0..n {
        let cond = dist.conditional(&nodes);
        match draw(&cond, rng) {
            Some(v) => nodes.push(v),
            None => {
                let vertex = *nodes.last().unwrap_or(&0);
                return Err(Error::Sampling { vertex, step });
            }
        }
    }
    Ok(Path::new(nodes))
}

fn draw<R: Rng + ?Sized>(cond: &[(usize, f64)], rng: &mut R) -> Option<usize> {
    let total: f64 = cond.iter().map(|e| e.1).sum();
    if cond.is_empty() || !(total > 0.0) {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for &(v, p) in cond {
        acc += p;
        if u < acc {
            return Some(v);
        }
    }
    cond.last().map(|e| e.0)
}
