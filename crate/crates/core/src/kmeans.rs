//! Seeded Lloyd's k-means with k-means++ initialization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sbm::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(points) {
            let (c, _) = nearest(p, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // empty cluster: move it onto the point farthest from its centroid
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        sq_dist(&points[i], &centroids[assignment[i]]).total_cmp(&sq_dist(&points[j], &centroids[assignment[j]]))
                    })
                    .unwrap_or(0);
                centroids[c] = points[far].clone();
                assignment[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = assignment.iter().zip(points).map(|(&a, p)| sq_dist(p, &centroids[a])).sum();
    KMeansResult { assignment, centroids, inertia }
}

/// Best of `restarts` runs by within-cluster sum of squares.
pub fn kmeans(points: &[Vec<f64>], config: &KMeansConfig) -> KMeansResult {
    let k = config.k.max(1).min(points.len().max(1));
    if points.is_empty() {
        return KMeansResult { assignment: vec![], centroids: vec![], inertia: 0.0 };
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..config.restarts.max(1) {
        let mut rng = keyed_rng(config.seed, r as u64);
        let init = plus_plus_init(points, k, &mut rng);
        let run = lloyd(points, init, config.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push(vec![0.0 + 0.01 * i as f64, 0.0]);
            pts.push(vec![5.0, 5.0 + 0.01 * i as f64]);
        }
        let res = kmeans(&pts, &KMeansConfig { k: 2, restarts: 3, max_iter: 50, seed: 1 });
        for i in 0..20 {
            assert_eq!(res.assignment[2 * i], res.assignment[0]);
            assert_eq!(res.assignment[2 * i + 1], res.assignment[1]);
        }
        assert_ne!(res.assignment[0], res.assignment[1]);
    }

    #[test]
    fn identical_points_do_not_leave_empty_clusters() {
        let pts = vec![vec![1.0]; 6];
        let res = kmeans(&pts, &KMeansConfig { k: 3, restarts: 2, max_iter: 10, seed: 4 });
        assert_eq!(res.assignment.len(), 6);
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 37 % 11) as f64, (i * 13 % 7) as f64]).collect();
        let cfg = KMeansConfig { k: 3, restarts: 4, max_iter: 30, seed: 9 };
        assert_eq!(kmeans(&pts, &cfg), kmeans(&pts, &cfg));
    }
}
