//! Normalized spectral clustering and the seeded k-means it runs on the
//! spectral embedding.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::affinity::Affinity;
use crate::error::{Error, Result};
use crate::rng::stream;
use rand::Rng;

/// Hard assignment of `N` points to clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labeling {
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(Labeling { labels, k })
    }

    /// Uses `max(label) + 1` as the cluster count.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Labeling { labels, k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member indices of each cluster, in index order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Laplacian {
    /// `I - D^{-1/2} A D^{-1/2}`
    #[default]
    SymmetricNormalized,
    /// `D - A`
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    pub laplacian: Laplacian,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            laplacian: Laplacian::SymmetricNormalized,
            restarts: 50,
            max_iter: 300,
        }
    }
}

pub fn spectral_clustering(affinity: &Affinity, k: usize, seed: u64) -> Result<Labeling> {
    spectral_clustering_with(affinity, k, seed, &SpectralConfig::default())
}

/// Embeds the points with the eigenvectors of the `k` smallest Laplacian
/// eigenvalues, normalizes the rows and runs k-means on them.
///
/// The diagonal of the affinity is ignored. A zero-degree vertex gets a zero
/// embedding row.
pub fn spectral_clustering_with(
    affinity: &Affinity,
    k: usize,
    seed: u64,
    config: &SpectralConfig,
) -> Result<Labeling> {
    let n = affinity.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2 clusters, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form k = {k} clusters from {n} points"
        )));
    }
    let w = affinity.without_diagonal();
    let degree: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[(i, j)]).sum()).collect();
    if degree.iter().all(|&d| d <= 0.0) {
        return Err(Error::ZeroAffinity);
    }
    let laplacian = match config.laplacian {
        Laplacian::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> = degree
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            Mat::from_fn(n, n, |i, j| {
                let off = -inv_sqrt[i] * w[(i, j)] * inv_sqrt[j];
                if i == j && degree[i] > 0.0 {
                    1.0 + off
                } else {
                    off
                }
            })
        }
        Laplacian::Unnormalized => {
            Mat::from_fn(n, n, |i, j| if i == j { degree[i] } else { -w[(i, j)] })
        }
    };
    let eig = laplacian
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let values = eig.S().column_vector();
    let vectors = eig.U();
    // eigenvalues come back nondecreasing; break exact ties by column index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let isolated: Vec<bool> = degree.iter().map(|&d| d <= 0.0).collect();
    let mut embedding = vec![vec![0.0; k]; n];
    for (c, &col) in order.iter().take(k).enumerate() {
        let v = vectors.col(col);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, row) in embedding.iter_mut().enumerate() {
            if !isolated[i] {
                row[c] = sign * v[i];
            }
        }
    }
    for row in &mut embedding {
        let r = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 0.0 {
            row.iter_mut().for_each(|v| *v /= r);
        }
    }
    let result = kmeans_with(&embedding, k, seed, config.restarts, config.max_iter)?;
    Ok(result.labeling)
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labeling: Labeling,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

/// Seeded k-means with 50 furthest-point restarts and 300 Lloyd iterations.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(rows, k, seed, 50, 300)
}

/// Lloyd's algorithm from `restarts` greedy furthest-point initializations.
///
/// Restart `r` draws its first center uniformly from stream `r` of `seed`;
/// the remaining centers are the rows furthest from those already chosen.
/// The lowest-inertia restart wins (earliest on ties). Distance ties resolve
/// to the lowest centroid index.
pub fn kmeans_with(
    rows: &[Vec<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument("rows have different lengths".into()));
    }
    if count_distinct(rows, k) < k {
        return Err(Error::TooFewDistinctRows { k });
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = stream(seed, r as u64);
        let first = rng.random_range(0..n);
        let centroids = furthest_point_init(rows, k, first);
        let run = lloyd(rows, centroids, max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(KMeansResult {
        labeling: Labeling {
            labels: best.labeling.labels,
            k,
        },
        ..best
    })
}

fn count_distinct(rows: &[Vec<f64>], stop_at: usize) -> usize {
    let mut sorted: Vec<&Vec<f64>> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut distinct = usize::from(!sorted.is_empty());
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            distinct += 1;
            if distinct >= stop_at {
                return distinct;
            }
        }
    }
    distinct
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn furthest_point_init(rows: &[Vec<f64>], k: usize, first: usize) -> Vec<Vec<f64>> {
    let mut centroids = vec![rows[first].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while centroids.len() < k {
        let mut pick = 0;
        for i in 1..rows.len() {
            if nearest[i] > nearest[pick] {
                pick = i;
            }
        }
        let c = rows[pick].clone();
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(row, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut labels = vec![usize::MAX; rows.len()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (l, row) in labels.iter_mut().zip(rows) {
            let (c, _) = assign(row, &centroids);
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&l, row) in labels.iter().zip(rows) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(row) {
                *s += v;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let mut inertia = 0.0;
    for (l, row) in labels.iter_mut().zip(rows) {
        let (c, d) = assign(row, &centroids);
        *l = c;
        inertia += d;
    }
    KMeansResult {
        labeling: Labeling { labels, k },
        centroids,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::misclassification_rate;
    use crate::rng::seeded;

    fn affinity(n: usize, f: impl Fn(usize, usize) -> f64) -> Affinity {
        Affinity::from_matrix(Mat::from_fn(n, n, f)).unwrap()
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn block_diagonal_is_recovered() {
        let sizes = [4, 6, 5];
        let block: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect();
        let n = block.len();
        let a = affinity(n, |i, j| if block[i] == block[j] { 1.0 } else { 0.0 });
        let labels = spectral_clustering(&a, 3, 7).unwrap();
        assert!(same_partition(labels.labels(), &block));
        let truth = Labeling::from_labels(block);
        assert_eq!(misclassification_rate(&labels, &truth).unwrap().rate(), 0.0);
    }

    /// Normalized cut of a two-way split, by direct summation.
    fn ncut(w: &Mat<f64>, side: &[bool]) -> f64 {
        let n = side.len();
        let (mut cut, mut vol_a, mut vol_b) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if side[i] {
                    vol_a += w[(i, j)];
                } else {
                    vol_b += w[(i, j)];
                }
                if side[i] && !side[j] {
                    cut += w[(i, j)];
                }
            }
        }
        cut / vol_a + cut / vol_b
    }

    #[test]
    fn weakly_joined_cliques_split_at_best_ncut() {
        let clique = |i: usize| i / 3;
        let m = Mat::from_fn(6, 6, |i, j| {
            if i == j {
                0.0
            } else if clique(i) == clique(j) {
                1.0
            } else if (i, j) == (2, 3) || (i, j) == (3, 2) {
                1e-6
            } else {
                0.0
            }
        });
        // exhaustive search over the 2^6 bipartitions (both sides nonempty)
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..63 {
            let side: Vec<bool> = (0..6).map(|i| mask >> i & 1 == 1).collect();
            let c = ncut(&m, &side);
            if c < best.0 {
                best = (c, side);
            }
        }
        let best_labels: Vec<usize> = best.1.iter().map(|&s| usize::from(s)).collect();
        assert!(same_partition(&best_labels, &[0, 0, 0, 1, 1, 1]));

        let a = Affinity::from_matrix(m).unwrap();
        let labels = spectral_clustering(&a, 2, 0).unwrap();
        assert!(same_partition(labels.labels(), &best_labels));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = seeded(5);
        let mut m = Mat::zeros(30, 30);
        for i in 0..30 {
            for j in i + 1..30 {
                let v: f64 = rng.random::<f64>() * if i / 10 == j / 10 { 1.0 } else { 0.3 };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let a = Affinity::from_matrix(m).unwrap();
        let x = spectral_clustering(&a, 3, 42).unwrap();
        let y = spectral_clustering(&a, 3, 42).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn isolated_vertex_gets_a_label() {
        let a = affinity(7, |i, j| {
            if i == 6 || j == 6 || i == j {
                0.0
            } else if (i < 3) == (j < 3) {
                1.0
            } else {
                0.0
            }
        });
        let labels = spectral_clustering(&a, 2, 1).unwrap();
        assert_eq!(labels.len(), 7);
        assert!(same_partition(&labels.labels()[..6], &[0, 0, 0, 1, 1, 1]));
    }

    #[test]
    fn spectral_errors() {
        let a = affinity(3, |_, _| 1.0);
        assert!(spectral_clustering(&a, 4, 0).is_err());
        assert!(spectral_clustering(&a, 1, 0).is_err());
        let diag_only = affinity(3, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(matches!(
            spectral_clustering(&diag_only, 2, 0),
            Err(Error::ZeroAffinity)
        ));
    }

    #[test]
    fn kmeans_duplicates_and_separated() {
        let rows: Vec<Vec<f64>> = [[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [5.0, 5.0], [9.0, 0.0]]
            .iter()
            .map(|r| r.to_vec())
            .collect();
        let r = kmeans(&rows, 3, 1).unwrap();
        assert!(same_partition(r.labeling.labels(), &[0, 1, 0, 1, 2]));
        assert_eq!(r.inertia, 0.0);

        let line: Vec<Vec<f64>> = [0.0, 0.1, 10.0, 10.1].iter().map(|&v| vec![v]).collect();
        let r = kmeans(&line, 2, 3).unwrap();
        assert!(same_partition(r.labeling.labels(), &[0, 0, 1, 1]));

        let dup: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(matches!(
            kmeans(&dup, 3, 0),
            Err(Error::TooFewDistinctRows { k: 3 })
        ));
    }

    /// Minimum inertia over all assignments of `rows` to `k` nonempty groups.
    fn exhaustive_inertia(rows: &[Vec<f64>], k: usize) -> f64 {
        let n = rows.len();
        let mut best = f64::INFINITY;
        let total = (k as u64).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let labels: Vec<usize> = (0..n)
                .map(|_| {
                    let l = (c % k as u64) as usize;
                    c /= k as u64;
                    l
                })
                .collect();
            let mut cost = 0.0;
            for g in 0..k {
                let members: Vec<&Vec<f64>> =
                    rows.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(r, _)| r).collect();
                if members.is_empty() {
                    cost = f64::INFINITY;
                    break;
                }
                let mean: Vec<f64> = (0..2)
                    .map(|d| members.iter().map(|r| r[d]).sum::<f64>() / members.len() as f64)
                    .collect();
                cost += members.iter().map(|r| sq_dist(r, &mean)).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn kmeans_matches_exhaustive_minimum() {
        let rows: Vec<Vec<f64>> = [
            [0.0, 0.0],
            [0.4, 0.3],
            [0.2, 0.9],
            [3.0, 3.2],
            [3.5, 2.6],
            [2.8, 2.9],
            [6.0, 0.2],
            [5.4, -0.5],
        ]
        .iter()
        .map(|r| r.to_vec())
        .collect();
        let oracle = exhaustive_inertia(&rows, 3);
        let got = kmeans(&rows, 3, 11).unwrap();
        assert!((got.inertia - oracle).abs() < 1e-12, "{} vs {oracle}", got.inertia);
    }
}
