//! Canonical small datasets built through the public constructors.

use mpcr_core::estimators::{UmcrCluster, UmcrDataset};
use mpcr_core::model::{ClusterData, MatchedPair, MpcrDataset, Slot};
use mpcr_core::oracle::{PotentialCluster, PotentialDataset, PotentialPair, PotentialUnit};
use rand::{Rng, SeedableRng};

pub fn cluster(id: &str, slot: Slot, ys: &[f64], rs: Option<&[u8]>, pop: Option<u64>) -> ClusterData {
    let rs = rs.map(|r| r.iter().map(|&x| x == 1).collect());
    ClusterData::new(id, slot, ys.to_vec(), rs, pop).unwrap()
}

pub fn pair(id: &str, z: u8, first: &[f64], second: &[f64]) -> MatchedPair {
    MatchedPair::new(
        id,
        z,
        cluster(id, Slot::First, first, None, Some(first.len() as u64)),
        cluster(id, Slot::Second, second, None, Some(second.len() as u64)),
    )
    .unwrap()
}

pub fn ds_a() -> MpcrDataset {
    MpcrDataset::new(vec![
        pair("1", 1, &[2.0, 4.0], &[1.0, 3.0]),
        pair("2", 0, &[0.0, 2.0], &[5.0, 7.0]),
    ])
    .unwrap()
}

pub fn ds_b() -> MpcrDataset {
    let p = |id: &str, z, y1: &[f64], r1: &[u8], y2: &[f64], r2: &[u8]| {
        MatchedPair::new(
            id,
            z,
            cluster(id, Slot::First, y1, Some(r1), Some(2)),
            cluster(id, Slot::Second, y2, Some(r2), Some(2)),
        )
        .unwrap()
    };
    MpcrDataset::new(vec![
        p("1", 1, &[2.0, 4.0], &[1, 1], &[1.0, 3.0], &[0, 0]),
        p("2", 0, &[0.0, 2.0], &[0, 0], &[5.0, 7.0], &[1, 0]),
    ])
    .unwrap()
}

pub fn ds_c() -> MpcrDataset {
    MpcrDataset::new(vec![
        pair("1", 1, &[4.0], &[1.0, 1.0, 4.0]),
        pair("2", 0, &[0.0, 2.0], &[5.0, 7.0]),
    ])
    .unwrap()
}

pub fn ds_u() -> UmcrDataset {
    let c = |z, ys: &[f64]| UmcrCluster {
        assignment: z,
        outcomes: ys.to_vec(),
        population_size: None,
    };
    UmcrDataset::new(vec![
        c(1, &[2.0, 4.0]),
        c(0, &[1.0, 3.0]),
        c(1, &[5.0, 7.0]),
        c(0, &[0.0, 2.0]),
    ])
    .unwrap()
}

pub fn ds_p() -> PotentialDataset {
    let c = |y0: [f64; 2], y1: [f64; 2]| {
        PotentialCluster::new(vec![PotentialUnit::new(y0[0], y1[0]), PotentialUnit::new(y0[1], y1[1])])
    };
    PotentialDataset::new(vec![
        PotentialPair::new("1", c([1.0, 3.0], [2.0, 4.0]), c([1.0, 3.0], [2.0, 4.0])),
        PotentialPair::new("2", c([0.0, 2.0], [5.0, 7.0]), c([0.0, 2.0], [5.0, 7.0])),
    ])
    .unwrap()
}

/// Pairs with a common total of 6 sampled units but unequal splits.
pub fn superpopulation(pairs: usize) -> PotentialDataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let ps = (0..pairs)
        .map(|k| {
            let n1 = rng.random_range(1..=5);
            let mut c = |n: usize| {
                let level: f64 = rng.random_range(-4.0..4.0);
                let tau: f64 = rng.random_range(0.0..3.0);
                PotentialCluster::new(
                    (0..n)
                        .map(|_| {
                            let y0 = level + rng.random_range(-1.5..1.5);
                            PotentialUnit::new(y0, y0 + tau)
                        })
                        .collect(),
                )
            };
            let first = c(n1);
            let second = c(6 - n1);
            PotentialPair::new(k.to_string(), first, second)
        })
        .collect();
    PotentialDataset::new(ps).unwrap()
}
