//! Base-station clustering into virtual BSs.
//!
//! The primary method is agglomerative clustering with minimax linkage: the
//! linkage between two clusters is the minimax radius of their union, i.e. the
//! smallest over candidate centers of the largest distance from the center to
//! any member. Cutting the resulting dendrogram at `m` clusters and at `m + 1`
//! clusters differs by exactly one merge. K-means and spectral clustering are
//! provided as baselines.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Point;

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("cannot form {m} clusters from {n} points")]
    TooManyClusters { m: usize, n: usize },
    #[error("number of clusters must be at least 1")]
    ZeroClusters,
    #[error("spectral bandwidth sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("eigendecomposition of the normalized affinity did not converge")]
    EigenFailure,
}

/// One agglomeration step. Leaves carry ids `0..n`, the cluster created by
/// merge `i` gets id `n + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Minimax radius of the merged cluster, meters.
    pub linkage: f64,
    pub new_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_count: usize,
}

/// A partition of points into `m` nonempty clusters labelled `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub m: usize,
}

impl Clustering {
    /// Relabels an arbitrary label vector to `0..m` in order of each cluster's
    /// smallest member index.
    pub fn from_raw_labels(raw: &[usize]) -> Self {
        let mut map = BTreeMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Clustering { labels, m: map.len() }
    }

    /// Members of every cluster, each sorted ascending, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.m];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Radius of `points[idx]` around the member `points[center]`.
fn radius_around(points: &[Point], idx: &[usize], center: usize) -> f64 {
    idx.iter()
        .map(|&j| points[center].distance(&points[j]))
        .fold(0.0, f64::max)
}

/// Minimax radius of the subset `idx` of `points` and the achieving center
/// (an element of `idx`; ties go to the lowest point index).
///
/// Panics on an empty subset.
pub fn minimax_radius(points: &[Point], idx: &[usize]) -> (f64, usize) {
    assert!(!idx.is_empty(), "minimax radius of an empty set");
    let mut best = (f64::INFINITY, usize::MAX);
    for &c in idx {
        let r = radius_around(points, idx, c);
        if r < best.0 || (r == best.0 && c < best.1) {
            best = (r, c);
        }
    }
    best
}

/// Minimax linkage between two disjoint subsets: the minimax radius of their union.
pub fn minimax_linkage(points: &[Point], a: &[usize], b: &[usize]) -> f64 {
    let union: Vec<usize> = a.iter().chain(b).copied().collect();
    minimax_radius(points, &union).0
}

/// Agglomerative clustering with minimax linkage.
///
/// Each step merges the pair of active clusters with the smallest linkage;
/// ties are broken by the smaller cluster id, then the larger one. Linkages
/// are recomputed only between the newly formed cluster and the survivors.
pub fn hierarchical_cluster(points: &[Point]) -> Dendrogram {
    let n = points.len();
    let mut members: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    // Keyed (smaller id, larger id).
    let mut linkage: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            linkage.insert((i, j), points[i].distance(&points[j]));
        }
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        // BTreeMap iterates keys in lexicographic order, so a strict `<` keeps
        // the lexicographically smallest pair among ties.
        let (&(left, right), &value) = linkage
            .iter()
            .fold(None, |best: Option<(&(usize, usize), &f64)>, cur| match best {
                Some(b) if *b.1 <= *cur.1 => Some(b),
                _ => Some(cur),
            })
            .expect("at least two active clusters");

        let new_id = n + step;
        let mut merged = members.remove(&left).expect("active cluster");
        merged.extend(members.remove(&right).expect("active cluster"));
        merged.sort_unstable();
        linkage.retain(|&(a, b), _| a != left && a != right && b != left && b != right);
        for (&other, other_members) in &members {
            linkage.insert((other, new_id), minimax_linkage(points, other_members, &merged));
        }
        members.insert(new_id, merged);
        merges.push(Merge {
            left,
            right,
            linkage: value,
            new_id,
        });
    }
    Dendrogram {
        merges,
        leaf_count: n,
    }
}

/// The partition obtained after applying the first `leaf_count − m` merges.
pub fn cut_dendrogram(d: &Dendrogram, m: usize) -> Result<Clustering, ClusteringError> {
    let n = d.leaf_count;
    if m == 0 {
        return Err(ClusteringError::ZeroClusters);
    }
    if m > n {
        return Err(ClusteringError::TooManyClusters { m, n });
    }
    // Cluster id -> current representative label; leaves start as themselves.
    let mut owner: Vec<usize> = (0..n).collect();
    let mut node_leaves: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for merge in &d.merges[..n - m] {
        let mut leaves = std::mem::take(&mut node_leaves[merge.left]);
        leaves.append(&mut std::mem::take(&mut node_leaves[merge.right]));
        for &leaf in &leaves {
            owner[leaf] = merge.new_id;
        }
        if node_leaves.len() <= merge.new_id {
            node_leaves.resize(merge.new_id + 1, Vec::new());
        }
        node_leaves[merge.new_id] = leaves;
    }
    Ok(Clustering::from_raw_labels(&owner))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// K-means settings; restarts are ranked by within-cluster sum of squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansSettings {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        KMeansSettings {
            restarts: 10,
            max_iterations: 100,
        }
    }
}

/// Result of one k-means run on feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub clustering: Clustering,
    pub cost: f64,
}

fn kmeans_pp_init<R: Rng + ?Sized>(rows: &[Vec<f64>], m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| squared_distance(r, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // All remaining mass is on existing centers: any point will do.
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(r, &c));
        }
        centers.push(c);
    }
    centers
}

/// Moves far-off points into empty clusters until all `m` labels are used.
fn repair_empty(rows: &[Vec<f64>], labels: &mut [usize], centers: &mut [Vec<f64>]) {
    let m = centers.len();
    loop {
        let mut counts = vec![0usize; m];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..rows.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&i, &j| {
                let di = squared_distance(&rows[i], &centers[labels[i]]);
                let dj = squared_distance(&rows[j], &centers[labels[j]]);
                di.total_cmp(&dj).then(j.cmp(&i))
            })
            .expect("m <= n guarantees a cluster with two members");
        labels[donor] = empty;
        centers[empty] = rows[donor].clone();
    }
}

fn lloyd<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    m: usize,
    max_iterations: usize,
    rng: &mut R,
) -> (Vec<usize>, f64) {
    let dim = rows[0].len();
    let mut centers = kmeans_pp_init(rows, m, rng);
    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        rows.iter()
            .map(|r| {
                let mut best = (f64::INFINITY, 0);
                for (c, center) in centers.iter().enumerate() {
                    let d = squared_distance(r, center);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect()
    };
    let mut labels = assign(&centers);
    repair_empty(rows, &mut labels, &mut centers);
    for _ in 0..max_iterations {
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(r) {
                *s += x;
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let mut next = assign(&centers);
        repair_empty(rows, &mut next, &mut centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    let cost = rows
        .iter()
        .zip(&labels)
        .map(|(r, &l)| squared_distance(r, &centers[l]))
        .sum();
    (labels, cost)
}

/// K-means over arbitrary-dimension feature rows: k-means++ seeding, Lloyd
/// iterations until assignments stop changing, best of `restarts` runs.
pub fn kmeans_rows<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    m: usize,
    settings: KMeansSettings,
    rng: &mut R,
) -> Result<KMeansFit, ClusteringError> {
    let n = rows.len();
    if m == 0 {
        return Err(ClusteringError::ZeroClusters);
    }
    if m > n {
        return Err(ClusteringError::TooManyClusters { m, n });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..settings.restarts.max(1) {
        let (labels, cost) = lloyd(rows, m, settings.max_iterations, rng);
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((labels, cost));
        }
    }
    let (labels, cost) = best.expect("at least one restart");
    Ok(KMeansFit {
        clustering: Clustering::from_raw_labels(&labels),
        cost,
    })
}

pub fn kmeans_cluster<R: Rng + ?Sized>(
    points: &[Point],
    m: usize,
    rng: &mut R,
) -> Result<Clustering, ClusteringError> {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.x, p.y]).collect();
    kmeans_rows(&rows, m, KMeansSettings::default(), rng).map(|fit| fit.clustering)
}

/// Gaussian affinity `exp(−‖s_i − s_j‖² / (2σ²))` with a zero diagonal.
pub fn affinity_matrix(points: &[Point], sigma: f64) -> DMatrix<f64> {
    let n = points.len();
    let two_s2 = 2.0 * sigma * sigma;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = points[i].distance(&points[j]);
            (-d * d / two_s2).exp()
        }
    })
}

/// Row-normalized spectral embedding: top-`m` eigenvectors of
/// `D^{-1/2} A D^{-1/2}`, one row per point, each scaled to unit length.
pub fn spectral_embedding(
    points: &[Point],
    m: usize,
    sigma: f64,
) -> Result<Vec<Vec<f64>>, ClusteringError> {
    let n = points.len();
    let a = affinity_matrix(points, sigma);
    // A point with all affinities underflowed to zero has no neighbours;
    // its row of the normalized affinity is left at zero.
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let l = DMatrix::from_fn(n, n, |i, j| inv_sqrt_deg[i] * a[(i, j)] * inv_sqrt_deg[j]);
    let eig = l
        .try_symmetric_eigen(1e-12, 10_000)
        .ok_or(ClusteringError::EigenFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(ClusteringError::EigenFailure);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let rows = (0..n)
        .map(|i| {
            let row: Vec<f64> = order[..m].iter().map(|&c| eig.eigenvectors[(i, c)]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    Ok(rows)
}

/// Ng–Jordan–Weiss spectral clustering with k-means on the embedding rows.
pub fn spectral_cluster<R: Rng + ?Sized>(
    points: &[Point],
    m: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Clustering, ClusteringError> {
    let n = points.len();
    if m == 0 {
        return Err(ClusteringError::ZeroClusters);
    }
    if m > n {
        return Err(ClusteringError::TooManyClusters { m, n });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ClusteringError::BadSigma(sigma));
    }
    let rows = spectral_embedding(points, m, sigma)?;
    kmeans_rows(&rows, m, KMeansSettings::default(), rng).map(|fit| fit.clustering)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::new(x, 0.0)).collect()
    }

    #[test]
    fn radius_examples() {
        let p = line(&[0.0]);
        assert_eq!(minimax_radius(&p, &[0]), (0.0, 0));
        let p = line(&[0.0, 1.0]);
        assert_eq!(minimax_radius(&p, &[0, 1]), (1.0, 0));
        let p = line(&[0.0, 1.0, 3.0]);
        // Candidate radii are 3, 2, 3.
        assert_eq!(minimax_radius(&p, &[0, 1, 2]), (2.0, 1));
    }

    #[test]
    #[should_panic]
    fn radius_of_empty_set_panics() {
        minimax_radius(&line(&[0.0]), &[]);
    }

    #[test]
    fn linkage_examples() {
        let p = line(&[0.0, 1.0, 3.0]);
        assert_eq!(minimax_linkage(&p, &[0], &[1]), 1.0);
        assert_eq!(minimax_linkage(&p, &[0, 1], &[2]), 2.0);
        assert_eq!(minimax_linkage(&p, &[2], &[0, 1]), 2.0);
    }

    #[test]
    fn three_points_on_a_line() {
        let d = hierarchical_cluster(&line(&[0.0, 1.0, 3.0]));
        assert_eq!(d.merges.len(), 2);
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        assert_eq!(d.merges[0].linkage, 1.0);
        assert_eq!((d.merges[1].left, d.merges[1].right), (2, 3));
        assert_eq!(d.merges[1].linkage, 2.0);
    }

    #[test]
    fn single_point_has_no_merges() {
        let d = hierarchical_cluster(&line(&[5.0]));
        assert!(d.merges.is_empty());
        assert_eq!(cut_dendrogram(&d, 1).unwrap().labels, vec![0]);
    }

    #[test]
    fn tie_breaks_by_lowest_ids() {
        // Equal spacing: all adjacent pairs tie at 1.
        let d = hierarchical_cluster(&line(&[0.0, 1.0, 2.0, 3.0]));
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
    }

    #[test]
    fn cut_extremes_and_range() {
        let pts = line(&[0.0, 1.0, 3.0, 7.0]);
        let d = hierarchical_cluster(&pts);
        assert_eq!(cut_dendrogram(&d, 4).unwrap().labels, vec![0, 1, 2, 3]);
        assert_eq!(cut_dendrogram(&d, 1).unwrap().labels, vec![0; 4]);
        assert_eq!(
            cut_dendrogram(&d, 5),
            Err(ClusteringError::TooManyClusters { m: 5, n: 4 })
        );
        assert_eq!(cut_dendrogram(&d, 0), Err(ClusteringError::ZeroClusters));
    }

    #[test]
    fn kmeans_identity_when_m_equals_n() {
        let pts = line(&[0.0, 1.0, 3.0, 7.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.x, p.y]).collect();
        let fit = kmeans_rows(&rows, 4, KMeansSettings::default(), &mut rng).unwrap();
        assert_eq!(fit.cost, 0.0);
        assert_eq!(fit.clustering.labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn kmeans_rejects_too_many_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            kmeans_cluster(&line(&[0.0, 1.0]), 3, &mut rng),
            Err(ClusteringError::TooManyClusters { .. })
        ));
    }

    #[test]
    fn kmeans_keeps_every_cluster_nonempty_with_duplicates() {
        let pts = line(&[0.0, 0.0, 0.0, 0.0, 5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = kmeans_cluster(&pts, 4, &mut rng).unwrap();
        assert_eq!(c.m, 4);
        assert!(c.members().iter().all(|m| !m.is_empty()));
    }

    #[test]
    fn affinity_symmetric_zero_diagonal() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(3.0, 4.0), Point::new(1.0, 9.0)];
        let a = affinity_matrix(&pts, 5.0);
        for i in 0..3 {
            assert_eq!(a[(i, i)], 0.0);
            for j in 0..3 {
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        assert!((a[(0, 1)] - (-25.0f64 / 50.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn spectral_single_cluster_and_errors() {
        let pts = line(&[0.0, 10.0, 20.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(spectral_cluster(&pts, 1, 10.0, &mut rng).unwrap().labels, vec![0; 3]);
        assert_eq!(
            spectral_cluster(&pts, 1, 0.0, &mut rng),
            Err(ClusteringError::BadSigma(0.0))
        );
        assert!(spectral_cluster(&pts, 4, 10.0, &mut rng).is_err());
    }
}
