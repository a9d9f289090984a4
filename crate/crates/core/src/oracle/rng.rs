use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream `index` of the generator keyed by `seed`.
///
/// Streams depend only on `(seed, index)`, so results do not depend on the
/// order in which replicates are evaluated.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sd * z
}

pub fn coin<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    rng.random::<bool>() as u8
}
