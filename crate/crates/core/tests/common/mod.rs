#![allow(dead_code)]

use fogsim::clustering::{blend_similarity, distance_matrix, popularity_matrix, RequestHistogram, SimilarityMatrix};
use fogsim::model::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

/// Connected components of the graph with edges where `s[i][j] > tol`.
pub fn component_count(s: &SimilarityMatrix, tol: f64) -> usize {
    let n = s.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if s.get(i, j) > tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// 60 UNs in 3 well-separated spatial groups; group `g` requests only tasks
/// `10g..10g+10`. Returns the blended similarity at `theta` and the true
/// group of each UN.
pub fn three_group_scenario(seed: u64, theta: f64) -> (SimilarityMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = [(80.0, 80.0), (250.0, 420.0), (420.0, 80.0)];
    let mut positions = Vec::new();
    let mut histograms = Vec::new();
    let mut truth = Vec::new();
    for (g, &(cx, cy)) in centres.iter().enumerate() {
        for _ in 0..20 {
            positions.push(Point::new(cx + rng.random_range(-15.0..15.0), cy + rng.random_range(-15.0..15.0)));
            let mut h = vec![0u64; 30];
            for (i, slot) in h[10 * g..10 * g + 10].iter_mut().enumerate() {
                *slot = rng.random_range(0..20) + 40 / (i as u64 + 1);
            }
            histograms.push(RequestHistogram(h));
            truth.push(g);
        }
    }
    let s_d = distance_matrix(&positions, 500.0);
    let s_p = popularity_matrix(&histograms);
    (blend_similarity(&s_d, &s_p, theta).unwrap(), truth)
}
