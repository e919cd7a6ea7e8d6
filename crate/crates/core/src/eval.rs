//! Clustering evaluation: k-means on encodings, accuracy under the best label
//! mapping, normalized mutual information, and Hoyer sparseness.

use std::collections::BTreeMap;

use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

const LLOYD_MAX_ITER: usize = 300;

/// Cluster ids for `n` samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    /// Rejects any id `≥ k`.
    pub fn with_clusters(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Parameter(format!("label {bad} outside 0..{k}")));
        }
        Ok(Self(labels))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One more than the largest id (0 for an empty vector).
    pub fn span(&self) -> usize {
        self.0.iter().max().map_or(0, |&m| m + 1)
    }

    /// Relabels ids to `0..k` in order of first appearance.
    pub fn compacted(&self) -> Self {
        let mut map = BTreeMap::new();
        let labels = self
            .0
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self(labels)
    }
}

impl From<Vec<usize>> for LabelVector {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Metrics for one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub accuracy: Option<f64>,
    pub nmi: Option<f64>,
    pub kmeans_objective: f64,
    pub restarts_used: usize,
    /// Hoyer sparseness of each `Z_i`, in layer order.
    pub sparseness_z: Vec<f64>,
    pub sparseness_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: LabelVector,
    /// Within-cluster sum of squares of `labels`.
    pub objective: f64,
    /// Index of the winning restart.
    pub best_restart: usize,
    pub restart_objectives: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means over the columns of `features`.
///
/// Each restart seeds with k-means++ from its own stream of `seed` and runs
/// Lloyd iterations until assignments stop changing. The labeling with the
/// lowest within-cluster sum of squares wins; ties go to the earlier restart.
/// A centroid that loses all its points is moved to the sample farthest from
/// its current centroid.
pub fn kmeans(features: &DenseMatrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = features.cols();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} outside 1..={n}")));
    }
    if restarts == 0 {
        return Err(Error::Parameter("at least one k-means restart is required".into()));
    }
    if !features.is_finite() {
        return Err(Error::Domain("k-means features contain non-finite values".into()));
    }
    let points: Vec<Vec<f64>> = (0..n).map(|j| features.column(j)).collect();

    let runs: Vec<(Vec<usize>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            lloyd(&points, k, &mut rng)
        })
        .collect();

    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best].1 {
            best = i;
        }
    }
    let restart_objectives = runs.iter().map(|r| r.1).collect();
    let (labels, objective) = runs.into_iter().nth(best).expect("restarts >= 1");
    Ok(KMeansResult {
        labels: LabelVector(labels),
        objective,
        best_restart: best,
        restart_objectives,
    })
}

fn plus_plus_seed(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize]) -> (bool, f64) {
    let mut changed = false;
    let mut objective = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(p, center);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        if *label != best {
            *label = best;
            changed = true;
        }
        objective += best_d;
    }
    (changed, objective)
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let mut centers = plus_plus_seed(points, k, rng);
    let mut labels = vec![usize::MAX; points.len()];
    let mut objective = f64::INFINITY;

    for _ in 0..LLOYD_MAX_ITER {
        let (changed, obj) = assign(points, &centers, &mut labels);
        objective = obj;
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .zip(&labels)
                    .enumerate()
                    .map(|(i, (p, &l))| (i, sq_dist(p, &centers[l])))
                    .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                    .0;
                centers[c] = points[far].clone();
                labels[far] = c;
            }
        }
    }
    // Report the objective of the final labeling against its own means.
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(&labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    if objective.is_finite() {
        objective = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| {
                let mean: Vec<f64> = sums[l].iter().map(|s| s / counts[l] as f64).collect();
                sq_dist(p, &mean)
            })
            .sum();
    }
    (labels, objective)
}

fn check_lengths(a: &LabelVector, b: &LabelVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(
            "labels",
            format!("{} predicted vs {} true labels", a.len(), b.len()),
        ));
    }
    if a.is_empty() {
        return Err(Error::Parameter("label vectors are empty".into()));
    }
    Ok(())
}

/// Fraction of samples labeled correctly under the best one-to-one mapping of
/// predicted ids onto true ids (Hungarian assignment on the confusion matrix).
pub fn accuracy(predicted: &LabelVector, truth: &LabelVector) -> Result<f64> {
    check_lengths(predicted, truth)?;
    let k = predicted.span().max(truth.span());
    let mut confusion = Matrix::new(k, k, 0i64);
    for (&p, &t) in predicted.as_slice().iter().zip(truth.as_slice()) {
        confusion[(p, t)] += 1;
    }
    let (matched, _) = kuhn_munkres(&confusion);
    Ok(matched as f64 / predicted.len() as f64)
}

/// `MI(predicted, truth) / max(H(predicted), H(truth))`, natural logarithms.
///
/// Two single-cluster labelings score 1; a single-cluster labeling against a
/// multi-cluster one scores 0.
pub fn nmi(predicted: &LabelVector, truth: &LabelVector) -> Result<f64> {
    check_lengths(predicted, truth)?;
    let n = predicted.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut pa: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &b) in predicted.as_slice().iter().zip(truth.as_slice()) {
        *joint.entry((a, b)).or_default() += 1;
        *pa.entry(a).or_default() += 1;
        *pb.entry(b).or_default() += 1;
    }
    let entropy = |m: &BTreeMap<usize, usize>| -> f64 {
        m.values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&pa), entropy(&pb));
    if pa.len() == 1 && pb.len() == 1 {
        return Ok(1.0);
    }
    if pa.len() == 1 || pb.len() == 1 {
        return Ok(0.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pij = c as f64 / n;
            let pi = pa[&a] as f64 / n;
            let pj = pb[&b] as f64 / n;
            pij * (pij / (pi * pj)).ln()
        })
        .sum();
    Ok((mi / ha.max(hb)).clamp(0.0, 1.0))
}

/// Hoyer sparseness of one vector: `(√d − ‖v‖₁/‖v‖₂) / (√d − 1)`.
///
/// An all-zero vector counts as maximally sparse (1.0).
pub fn hoyer_sparseness_vec(v: &[f64]) -> Result<f64> {
    let d = v.len();
    if d < 2 {
        return Err(Error::Parameter(format!(
            "sparseness needs at least 2 entries, got {d}"
        )));
    }
    let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Ok(1.0);
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    let sd = (d as f64).sqrt();
    Ok(((sd - l1 / l2) / (sd - 1.0)).clamp(0.0, 1.0))
}

/// Mean Hoyer sparseness over the columns of `m`.
pub fn hoyer_sparseness(m: &DenseMatrix) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..m.cols() {
        total += hoyer_sparseness_vec(&m.column(j))?;
    }
    Ok(total / m.cols() as f64)
}
