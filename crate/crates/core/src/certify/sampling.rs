use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::flow::{LogRadialState, StateVector};

/// Independent generator for item `stream` of a run seeded with `seed`.
pub fn ic_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform direction on the unit sphere of the first `block` coordinates.
pub fn random_direction<R: Rng>(rng: &mut R, dim: usize, block: usize) -> Vec<f64> {
    let block = block.clamp(1, dim);
    let mut v = vec![0.0; dim];
    loop {
        for x in v.iter_mut().take(block) {
            *x = StandardNormal.sample(rng);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Random direction with `log |x|` uniform in `[lo, hi)`.
pub fn shell_ic<R: Rng>(rng: &mut R, dim: usize, block: usize, lo: f64, hi: f64) -> Result<LogRadialState> {
    let u = random_direction(rng, dim, block);
    let sigma = lo + rng.random::<f64>() * (hi - lo);
    LogRadialState::new(sigma, StateVector::new(u)?)
}
