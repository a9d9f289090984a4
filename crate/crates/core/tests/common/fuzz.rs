//! Seeded generator of random potential-outcome datasets.

use mpcr_core::oracle::{PotentialCluster, PotentialDataset, PotentialPair, PotentialUnit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct FuzzShape {
    pub pairs: (usize, usize),
    pub max_units: usize,
    pub equal_sizes: bool,
    /// Every unit of a pair has the same effect.
    pub pair_constant_effects: bool,
    pub unit_sampling: bool,
    pub receipts: bool,
    /// Everyone takes the treatment exactly when encouraged.
    pub full_compliance: bool,
}

impl Default for FuzzShape {
    fn default() -> Self {
        Self {
            pairs: (2, 6),
            max_units: 5,
            equal_sizes: false,
            pair_constant_effects: false,
            unit_sampling: true,
            receipts: true,
            full_compliance: false,
        }
    }
}

pub fn dataset(seed: u64, shape: FuzzShape) -> PotentialDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(shape.pairs.0..=shape.pairs.1);
    let pairs = (0..m)
        .map(|k| {
            let n1 = rng.random_range(1..=shape.max_units);
            let n2 = if shape.equal_sizes {
                n1
            } else {
                rng.random_range(1..=shape.max_units)
            };
            let pair_effect: f64 = rng.random_range(-3.0..3.0);
            let cluster = |n: usize, rng: &mut ChaCha8Rng| {
                let level: f64 = rng.random_range(-5.0..5.0);
                let cluster_effect: f64 = pair_effect + rng.random_range(-2.0..2.0);
                let units = (0..n)
                    .map(|_| {
                        let y0 = level + rng.random_range(-2.0..2.0);
                        let tau = if shape.pair_constant_effects {
                            pair_effect
                        } else {
                            cluster_effect + rng.random_range(-1.0..1.0)
                        };
                        let mut u = PotentialUnit::new(y0, y0 + tau);
                        if shape.receipts || shape.full_compliance {
                            let (r0, r1) = if shape.full_compliance {
                                (false, true)
                            } else {
                                match rng.random_range(0..3) {
                                    0 => (false, false),
                                    1 => (false, true),
                                    _ => (true, true),
                                }
                            };
                            u.receipts = Some((r0, r1));
                        }
                        u
                    })
                    .collect::<Vec<_>>();
                // Equal sample sizes stay equal when populations differ.
                let sample = if shape.unit_sampling {
                    rng.random_range(1..=n)
                } else {
                    n
                };
                (units, sample)
            };
            let (u1, s1) = cluster(n1, &mut rng);
            let (u2, s2) = cluster(n2, &mut rng);
            let (s1, s2) = if shape.equal_sizes {
                (s1.min(s2), s1.min(s2))
            } else {
                (s1, s2)
            };
            PotentialPair::new(
                k.to_string(),
                PotentialCluster::sampled(u1, s1),
                PotentialCluster::sampled(u2, s2),
            )
        })
        .collect();
    PotentialDataset::new(pairs).unwrap()
}

pub fn corpus(count: u64, shape: FuzzShape) -> Vec<PotentialDataset> {
    (0..count).map(|s| dataset(0xF0_0D + s, shape)).collect()
}
