//! Lloyd's k-means with k-means++ seeding and restarts.

use nalgebra::DMatrix;
use rand::Rng;

pub(crate) const RESTARTS: usize = 20;
pub(crate) const MAX_ITER: usize = 300;
pub(crate) const TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct KMeansFit {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn row_dist_sq(data: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    center
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let d = data[(i, j)] - c;
            d * d
        })
        .sum()
}

fn nearest(data: &DMatrix<f64>, i: usize, centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = row_dist_sq(data, i, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.nrows();
    let row = |i: usize| data.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centers = vec![row(rng.random_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| row_dist_sq(data, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        };
        centers.push(row(pick));
        let last = centers.last().expect("just pushed");
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(row_dist_sq(data, i, last));
        }
    }
    centers
}

fn lloyd(data: &DMatrix<f64>, mut centers: Vec<Vec<f64>>) -> KMeansFit {
    let (n, dim) = data.shape();
    let k = centers.len();
    let mut labels = vec![0; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let mut new_inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, d) = nearest(data, i, &centers);
            *label = c;
            new_inertia += d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (j, s) in sums[c].iter_mut().enumerate() {
                *s += data[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = row_dist_sq(data, a, &centers[labels[a]]);
                        let db = row_dist_sq(data, b, &centers[labels[b]]);
                        da.total_cmp(&db)
                    })
                    .expect("non-empty data");
                centers[c] = data.row(far).iter().copied().collect();
            }
        }
        let converged = (inertia - new_inertia).abs() <= TOL;
        inertia = new_inertia;
        if converged {
            break;
        }
    }
    KMeansFit { labels, inertia }
}

/// Best-of-`RESTARTS` k-means on the rows of `data`.
pub(crate) fn kmeans<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> KMeansFit {
    let mut best: Option<KMeansFit> = None;
    for _ in 0..RESTARTS {
        let fit = lloyd(data, plus_plus_init(data, k, rng));
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.expect("at least one restart")
}
