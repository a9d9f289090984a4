//! Monte Carlo power of the two-sided one-sample t test on pair differences.
//! The critical value comes from bisection on the quadrature CDF.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::quadrature;

pub fn t_critical(alpha: f64, dof: u64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quadrature::noncentral_t_cdf(mid, dof, 0.0) < 1.0 - alpha / 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Power and its binomial standard error: `m` differences with mean `effect`
/// and unit standard deviation per replicate.
pub fn power(alpha: f64, m: usize, effect: f64, replicates: usize, seed: u64) -> (f64, f64) {
    let crit = t_critical(alpha, (m - 1) as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejections = 0usize;
    let mut xs = vec![0.0; m];
    for _ in 0..replicates {
        for x in xs.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x = effect + z;
        }
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let t = mean / (var / m as f64).sqrt();
        if t.abs() > crit {
            rejections += 1;
        }
    }
    let p = rejections as f64 / replicates as f64;
    (p, (p * (1.0 - p) / replicates as f64).sqrt())
}
