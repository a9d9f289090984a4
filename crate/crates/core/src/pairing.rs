//! Construction of matched pairs before randomization, and the coin flips
//! that randomize within them.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::rng::{coin, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster_id: String,
    pub size: f64,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

impl ClusterProfile {
    pub fn new(cluster_id: impl Into<String>, size: f64, covariates: Vec<f64>) -> Self {
        Self {
            cluster_id: cluster_id.into(),
            size,
            covariates,
        }
    }
}

/// A perfect matching of clusters. Within a pair the ids are in
/// lexicographic order, and pairs are ordered by their first id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    pub pairs: Vec<(String, String)>,
    /// Sum of within-pair distances in standardized covariate space.
    pub total_distance: f64,
    pub warnings: Vec<String>,
}

impl Pairing {
    /// Id of the `k`-th pair, counting from 1.
    pub fn pair_id(k: usize) -> String {
        (k + 1).to_string()
    }
}

/// Largest input accepted by [`pair_clusters_optimal`].
pub const OPTIMAL_CAP: usize = 16;

struct Space {
    ids: Vec<String>,
    points: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

impl Space {
    /// Sorts by id, standardizes every dimension and drops constant ones.
    fn build(profiles: &[ClusterProfile], include_size: bool) -> Result<Space> {
        let count = profiles.len();
        if count % 2 == 1 {
            return Err(Error::OddClusterCount(count));
        }
        if count < 4 {
            return Err(Error::InvalidArgument(format!(
                "pairing needs at least 4 clusters, got {count}"
            )));
        }
        let mut sorted: Vec<&ClusterProfile> = profiles.iter().collect();
        sorted.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
        let mut seen = HashSet::new();
        let arity = sorted[0].covariates.len();
        for p in &sorted {
            if !seen.insert(p.cluster_id.as_str()) {
                return Err(Error::DuplicateCluster(p.cluster_id.clone()));
            }
            if p.covariates.len() != arity {
                return Err(Error::ArityMismatch(p.cluster_id.clone()));
            }
            if !(p.size.is_finite() && p.size > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "cluster {} must have a positive size",
                    p.cluster_id
                )));
            }
            if p.covariates.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "cluster {} has a non-finite covariate",
                    p.cluster_id
                )));
            }
        }
        let mut dims: Vec<(String, Vec<f64>)> = (0..arity)
            .map(|d| {
                (
                    format!("cov_{}", d + 1),
                    sorted.iter().map(|p| p.covariates[d]).collect(),
                )
            })
            .collect();
        if include_size {
            dims.push(("size".into(), sorted.iter().map(|p| p.size).collect()));
        }
        let mut warnings = Vec::new();
        let mut kept = Vec::new();
        for (name, xs) in dims {
            let mean = xs.iter().sum::<f64>() / count as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64).sqrt();
            if sd == 0.0 {
                warnings.push(format!("dimension {name} has zero variance and was dropped"));
                continue;
            }
            kept.push(xs.iter().map(|x| (x - mean) / sd).collect::<Vec<f64>>());
        }
        if kept.is_empty() {
            warnings.push("no informative dimensions; every pairing is equally close".into());
        }
        let points = (0..count).map(|i| kept.iter().map(|d| d[i]).collect()).collect();
        Ok(Space {
            ids: sorted.iter().map(|p| p.cluster_id.clone()).collect(),
            points,
            warnings,
        })
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Index pairs `(i, j)` with `i < j` in sorted-id order.
    fn finish(self, mut matched: Vec<(usize, usize)>) -> Pairing {
        matched.sort();
        let total_distance = matched.iter().map(|&(i, j)| self.distance(i, j)).sum();
        Pairing {
            pairs: matched
                .iter()
                .map(|&(i, j)| (self.ids[i].clone(), self.ids[j].clone()))
                .collect(),
            total_distance,
            warnings: self.warnings,
        }
    }
}

fn greedy_indices(space: &Space) -> Vec<(usize, usize)> {
    let n = space.ids.len();
    let mut edges: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (space.distance(i, j), i, j))
        .collect();
    // Ids are sorted, so index order is lexicographic id order.
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n / 2);
    for (_, i, j) in edges {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Repeatedly pairs the closest remaining two clusters under standardized
/// Euclidean distance. Ties go to the lexicographically first ids.
pub fn pair_clusters_greedy(profiles: &[ClusterProfile], include_size: bool) -> Result<Pairing> {
    let space = Space::build(profiles, include_size)?;
    let matched = greedy_indices(&space);
    Ok(space.finish(matched))
}

/// Minimum total distance over all perfect matchings, for at most
/// [`OPTIMAL_CAP`] clusters.
pub fn pair_clusters_optimal(profiles: &[ClusterProfile], include_size: bool) -> Result<Pairing> {
    if profiles.len() > OPTIMAL_CAP {
        return Err(Error::TooManyClusters(profiles.len()));
    }
    let space = Space::build(profiles, include_size)?;
    let n = space.ids.len();
    let full = (1usize << n) - 1;
    let dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| space.distance(i, j)).collect()).collect();
    // best[mask]: cheapest matching of the clusters in `mask`, always pairing
    // the lowest member first; choice[mask] records its partner.
    let mut best = vec![f64::INFINITY; 1 << n];
    let mut choice = vec![0usize; 1 << n];
    best[0] = 0.0;
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        for j in (i + 1)..n {
            if rest & (1 << j) != 0 {
                let cost = dist[i][j] + best[rest & !(1 << j)];
                if cost < best[mask] {
                    best[mask] = cost;
                    choice[mask] = j;
                }
            }
        }
    }
    let mut matched = Vec::with_capacity(n / 2);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask];
        matched.push((i, j));
        mask &= !(1 << i) & !(1 << j);
    }
    // Summation order differs between the two searches; keep the greedy
    // matching when it is at least as good after rounding.
    let greedy = greedy_indices(&space);
    let cost = |m: &[(usize, usize)]| {
        let mut m = m.to_vec();
        m.sort();
        m.iter().map(|&(i, j)| dist[i][j]).sum::<f64>()
    };
    if cost(&greedy) <= cost(&matched) {
        matched = greedy;
    }
    Ok(space.finish(matched))
}

/// One fair coin per pair from the stream keyed by `seed`: 1 treats the
/// first cluster of the pair.
pub fn assign_within_pairs(pairing: &Pairing, seed: u64) -> BTreeMap<String, u8> {
    let mut rng = stream(seed, 0);
    (0..pairing.pairs.len())
        .map(|k| (Pairing::pair_id(k), coin(&mut rng)))
        .collect()
}
