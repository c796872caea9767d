//! Latin-hypercube sampling helpers shared by the designs and optimizers.

use rand::seq::SliceRandom;
use rand::Rng;

/// `n` points in `[0,1]^d`, one per stratum on every axis, uniform within
/// each stratum.
pub fn random_lhs<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    lhs_in_box(n, &vec![0.0; d], &vec![1.0; d], rng)
}

/// Latin hypercube inside the box `[lower, upper]`.
pub fn lhs_in_box<R: Rng + ?Sized>(
    n: usize,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let d = lower.len();
    let mut pts = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..d {
        perm.shuffle(rng);
        let width = upper[k] - lower[k];
        for (p, &stratum) in pts.iter_mut().zip(&perm) {
            let u: f64 = rng.gen();
            let v = lower[k] + width * (stratum as f64 + u) / n as f64;
            p[k] = v.clamp(lower[k], upper[k]);
        }
    }
    pts
}

pub fn min_pairwise_distance(pts: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(sq_dist(&pts[i], &pts[j]));
        }
    }
    best.sqrt()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of `n_candidates` random Latin hypercubes under the maximin
/// (largest minimum pairwise distance) criterion.
pub fn maximin_lhd<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    n_candidates: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut best = random_lhs(n, d, rng);
    let mut best_dist = min_pairwise_distance(&best);
    for _ in 1..n_candidates {
        let cand = random_lhs(n, d, rng);
        let dist = min_pairwise_distance(&cand);
        if dist > best_dist {
            best = cand;
            best_dist = dist;
        }
    }
    best
}
