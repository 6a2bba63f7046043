//! UN clustering and per-cluster task popularity.
//!
//! UNs are grouped by a blend of spatial proximity (Gaussian kernel on
//! positions) and shared task interest (cosine of cacheable-task request
//! histograms). The blended similarity is clustered spectrally: the number of
//! clusters comes from the largest gap in the ascending spectrum of the
//! symmetric normalized Laplacian, and the rows of the `k` smallest
//! eigenvectors, normalized to unit length, are grouped with k-means.

mod kmeans;

use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Point;

/// Cacheable-task request counts of one UN over the training window.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestHistogram(pub Vec<u64>);

impl RequestHistogram {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Square, symmetric, non-negative similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(pub DMatrix<f64>);

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Cluster count and 0-based per-UN labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == cluster)
            .map(|(u, _)| u)
    }
}

/// One popularity vector per cluster, most popular cacheable task first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopularityMatrix(pub Vec<Vec<usize>>);

impl PopularityMatrix {
    pub fn vector(&self, cluster: usize) -> &[usize] {
        &self.0[cluster]
    }
}

/// Spectral clustering result with the spectrum used for model selection.
#[derive(Debug, Clone)]
pub struct SpectralOutcome {
    pub assignment: ClusterAssignment,
    /// Ascending eigenvalues of the normalized Laplacian.
    pub eigenvalues: Vec<f64>,
    /// True when no cluster structure was found and labels are round-robin.
    pub fallback: bool,
}

pub fn distance_similarity(a: &Point, b: &Point, sigma_d_sq: f64) -> f64 {
    (-a.dist_sq(b) / (2.0 * sigma_d_sq)).exp()
}

/// Cosine similarity; zero when either histogram is empty.
pub fn popularity_similarity(a: &RequestHistogram, b: &RequestHistogram) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.0.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.0.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn distance_matrix(positions: &[Point], sigma_d_sq: f64) -> SimilarityMatrix {
    let n = positions.len();
    SimilarityMatrix(DMatrix::from_fn(n, n, |i, j| distance_similarity(&positions[i], &positions[j], sigma_d_sq)))
}

/// Pairwise cosine similarities; the diagonal is 1 even for empty histograms.
pub fn popularity_matrix(histograms: &[RequestHistogram]) -> SimilarityMatrix {
    let n = histograms.len();
    SimilarityMatrix(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            popularity_similarity(&histograms[i], &histograms[j])
        }
    }))
}

pub fn blend_similarity(s_d: &SimilarityMatrix, s_p: &SimilarityMatrix, theta: f64) -> Result<SimilarityMatrix> {
    if s_d.0.shape() != s_p.0.shape() {
        return Err(Error::DimensionMismatch(format!(
            "distance similarity is {:?}, popularity similarity is {:?}",
            s_d.0.shape(),
            s_p.0.shape()
        )));
    }
    Ok(SimilarityMatrix(&s_d.0 * theta + &s_p.0 * (1.0 - theta)))
}

/// `I - D^-1/2 S D^-1/2`.
pub fn normalized_laplacian(s: &SimilarityMatrix) -> Result<DMatrix<f64>> {
    let n = s.len();
    let mut inv_sqrt = Vec::with_capacity(n);
    for i in 0..n {
        let d: f64 = s.0.row(i).sum();
        if d <= 0.0 {
            return Err(Error::ZeroDegree(i));
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * s.0[(i, j)] * inv_sqrt[j]
    }))
}

fn check_similarity(s: &SimilarityMatrix) -> Result<()> {
    let (r, c) = s.0.shape();
    if r != c {
        return Err(Error::DimensionMismatch(format!("similarity matrix is {r}x{c}")));
    }
    for i in 0..r {
        for j in 0..r {
            let v = s.0[(i, j)];
            if v < 0.0 {
                return Err(Error::NegativeSimilarity(i, j));
            }
            if (v - s.0[(j, i)]).abs() > 1e-9 {
                return Err(Error::NotSymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// Eigenvalues ascending with matching eigenvector columns.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Index `k` maximizing `λ_{k+1} - λ_k` (1-based λ) over `lo..=hi`; the
/// smallest such `k` on ties.
pub fn eigengap_k(eigenvalues: &[f64], lo: usize, hi: usize) -> (usize, f64) {
    let mut best = (lo, f64::NEG_INFINITY);
    for k in lo..=hi {
        if k >= eigenvalues.len() {
            break;
        }
        let gap = eigenvalues[k] - eigenvalues[k - 1];
        if gap > best.1 {
            best = (k, gap);
        }
    }
    best
}

fn round_robin(n: usize, k: usize) -> ClusterAssignment {
    ClusterAssignment {
        k,
        labels: (0..n).map(|i| i % k).collect(),
    }
}

/// Renumbers clusters so that cluster ids ascend with each cluster's lowest
/// member id.
fn canonical_labels(raw: &[usize]) -> ClusterAssignment {
    let mut map = std::collections::HashMap::new();
    let labels: Vec<usize> = raw
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    ClusterAssignment { k: map.len(), labels }
}

const GAP_TOL: f64 = 1e-9;

pub fn spectral_cluster<R: Rng + ?Sized>(s: &SimilarityMatrix, k_min: usize, k_max: usize, rng: &mut R) -> Result<SpectralOutcome> {
    check_similarity(s)?;
    let n = s.len();
    if n < k_min || k_min == 0 {
        return Err(Error::TooFewPoints { n, k_min });
    }
    let (eigenvalues, vectors) = sorted_eigen(normalized_laplacian(s)?);

    let hi = k_max.min(n.saturating_sub(1));
    let (k, gap) = if hi >= k_min {
        eigengap_k(&eigenvalues, k_min, hi)
    } else {
        (k_min, f64::INFINITY)
    };
    let fallback = |eigenvalues: Vec<f64>| {
        warn!("similarity graph shows no cluster structure; using {k_min} round-robin clusters");
        SpectralOutcome {
            assignment: round_robin(n, k_min),
            eigenvalues,
            fallback: true,
        }
    };
    if gap <= GAP_TOL {
        return Ok(fallback(eigenvalues));
    }

    let mut embedding = vectors.columns(0, k).into_owned();
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let distinct = {
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..n {
            let dup = reps.iter().any(|&r| (embedding.row(i) - embedding.row(r)).norm() <= 1e-9);
            if !dup {
                reps.push(i);
                if reps.len() >= k {
                    break;
                }
            }
        }
        reps.len()
    };
    if distinct < k {
        return Ok(fallback(eigenvalues));
    }

    let fit = kmeans::kmeans(&embedding, k, rng);
    let assignment = canonical_labels(&fit.labels);
    if assignment.k != k {
        return Ok(fallback(eigenvalues));
    }
    Ok(SpectralOutcome {
        assignment,
        eigenvalues,
        fallback: false,
    })
}

/// Per cluster, the cacheable tasks sorted by descending summed request count
/// (ascending task id on ties). `cacheable[i]` is the task id counted in
/// position `i` of every histogram.
pub fn build_popularity_matrix(assignment: &ClusterAssignment, histograms: &[RequestHistogram], cacheable: &[usize]) -> PopularityMatrix {
    let mut totals = vec![vec![0u64; cacheable.len()]; assignment.k];
    for (u, h) in histograms.iter().enumerate() {
        let row = &mut totals[assignment.labels[u]];
        for (t, &c) in row.iter_mut().zip(&h.0) {
            *t += c;
        }
    }
    PopularityMatrix(
        totals
            .into_iter()
            .map(|row| {
                let mut idx: Vec<usize> = (0..cacheable.len()).collect();
                idx.sort_by(|&a, &b| row[b].cmp(&row[a]).then(cacheable[a].cmp(&cacheable[b])));
                idx.into_iter().map(|i| cacheable[i]).collect()
            })
            .collect(),
    )
}

/// Per cloudlet, the cluster whose members it served most during training
/// (lowest cluster id on ties). A cloudlet that served nobody takes the
/// cluster of `nearest_un[cloudlet]`.
pub fn assign_preferred_clusters(service_counts: &[Vec<u64>], assignment: &ClusterAssignment, nearest_un: &[usize]) -> Vec<usize> {
    service_counts
        .iter()
        .enumerate()
        .map(|(e, row)| {
            let mut per_cluster = vec![0u64; assignment.k];
            for (u, &c) in row.iter().enumerate() {
                per_cluster[assignment.labels[u]] += c;
            }
            if per_cluster.iter().all(|&c| c == 0) {
                return assignment.labels[nearest_un[e]];
            }
            let max = *per_cluster.iter().max().expect("k >= 1");
            per_cluster.iter().position(|&c| c == max).expect("max exists")
        })
        .collect()
}

/// Writes similarity, spectrum, labels and popularity vectors as CSV files.
pub fn write_diagnostics(dir: &Path, s: &SimilarityMatrix, outcome: &SpectralOutcome, xi: &PopularityMatrix) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join("similarity.csv"))?;
    for row in s.0.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    let mut f = std::fs::File::create(dir.join("eigenvalues.csv"))?;
    writeln!(f, "index,eigenvalue")?;
    for (i, v) in outcome.eigenvalues.iter().enumerate() {
        writeln!(f, "{},{}", i + 1, v)?;
    }
    let mut f = std::fs::File::create(dir.join("labels.csv"))?;
    writeln!(f, "un,cluster")?;
    for (u, l) in outcome.assignment.labels.iter().enumerate() {
        writeln!(f, "{u},{l}")?;
    }
    let mut f = std::fs::File::create(dir.join("popularity.csv"))?;
    writeln!(f, "cluster,rank,task")?;
    for (c, v) in xi.0.iter().enumerate() {
        for (r, t) in v.iter().enumerate() {
            writeln!(f, "{c},{r},{t}")?;
        }
    }
    Ok(())
}
