//! Seeded spherical k-means (cosine similarity on unit vectors).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::vectorize::SparseVec;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;
/// Independent seedings per run; the one with the highest total cosine wins.
pub const DEFAULT_RESTARTS: usize = 10;

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// k-means++ seeding with `1 - cos` as the distance.
fn seed_centroids(points: &[&SparseVec], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.gen_range(0..points.len())];
    let mut best_sim: Vec<f64> = points.iter().map(|p| p.dot(points[chosen[0]])).collect();
    while chosen.len() < k {
        let weights: Vec<f64> = best_sim
            .iter()
            .enumerate()
            .map(|(i, s)| if chosen.contains(&i) { 0.0 } else { (1.0 - s).max(0.0).powi(2) })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                if *w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < *w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total weight has a positive entry")
        } else {
            // every remaining point duplicates a chosen centre
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (s, p) in best_sim.iter_mut().zip(points) {
            *s = s.max(p.dot(points[next]));
        }
    }
    chosen.iter().map(|&i| points[i].to_dense()).collect()
}

fn nearest(point: &SparseVec, centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let s = point.dot_dense(c);
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

fn recompute(points: &[&SparseVec], assign: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut centroids = vec![vec![0.0; dim]; k];
    for (p, &a) in points.iter().zip(assign) {
        p.add_to(&mut centroids[a]);
    }
    centroids.iter_mut().for_each(|c| normalize(c));
    centroids
}

/// Moves the worst-fitting point of a multi-member cluster into each empty cluster.
fn repair_empty(points: &[&SparseVec], assign: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        assign.iter().for_each(|&a| sizes[a] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let worst = (0..points.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .min_by(|&a, &b| {
                let sa = points[a].dot_dense(&centroids[assign[a]]);
                let sb = points[b].dot_dense(&centroids[assign[b]]);
                sa.total_cmp(&sb).then(a.cmp(&b))
            })
            .expect("k <= number of points");
        assign[worst] = empty;
    }
}

fn run_once(points: &[&SparseVec], k: usize, rng: &mut ChaCha8Rng, max_iter: usize) -> (Vec<usize>, f64) {
    let dim = points[0].dim();
    let mut centroids = seed_centroids(points, k, rng);
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    for _ in 0..max_iter.max(1) {
        let mut next: Vec<usize> = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
        repair_empty(points, &mut next, &centroids, k);
        if next == assign {
            break;
        }
        assign = next;
        centroids = recompute(points, &assign, k, dim);
    }
    let objective = points
        .iter()
        .zip(&assign)
        .map(|(p, &a)| p.dot_dense(&centroids[a]))
        .sum();
    (assign, objective)
}

/// Clusters unit vectors into `k` groups. Returns one cluster index per point.
///
/// Deterministic for a given `(points, k, seed)`; assignment ties go to the
/// lower cluster index, restart ties to the earlier restart.
pub fn spherical_kmeans(points: &[&SparseVec], k: usize, seed: u64, max_iter: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the {} users with usable text",
            points.len()
        )));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Config("vectors have mixed dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..DEFAULT_RESTARTS {
        let (assign, objective) = run_once(points, k, &mut rng, max_iter);
        if best.as_ref().is_none_or(|(_, b)| objective > *b + 1e-12) {
            best = Some((assign, objective));
        }
    }
    Ok(best.expect("at least one restart").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(pairs: &[(u32, f64)]) -> SparseVec {
        SparseVec::from_pairs(32, pairs.iter().copied()).normalized()
    }

    #[test]
    fn k_one_puts_everything_together() {
        let pts = [unit(&[(0, 1.0)]), unit(&[(5, 1.0)]), unit(&[(9, 1.0), (1, 2.0)])];
        let refs: Vec<_> = pts.iter().collect();
        assert_eq!(spherical_kmeans(&refs, 1, 7, 100).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn duplicate_points_still_fill_all_clusters() {
        let pts = [unit(&[(0, 1.0)]), unit(&[(0, 1.0)]), unit(&[(0, 1.0)])];
        let refs: Vec<_> = pts.iter().collect();
        let mut a = spherical_kmeans(&refs, 3, 1, 100).unwrap();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn too_many_clusters_is_config_error() {
        let pts = [unit(&[(0, 1.0)])];
        let refs: Vec<_> = pts.iter().collect();
        assert!(matches!(spherical_kmeans(&refs, 2, 0, 10), Err(Error::Config(_))));
        assert!(matches!(spherical_kmeans(&refs, 0, 0, 10), Err(Error::Config(_))));
    }

    #[test]
    fn orthogonal_groups_separate() {
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(unit(&[(0, 3.0), (1, 1.0 + i as f64 * 0.1)]));
            pts.push(unit(&[(20, 3.0), (21, 1.0 + i as f64 * 0.1)]));
        }
        let refs: Vec<_> = pts.iter().collect();
        let a = spherical_kmeans(&refs, 2, 11, 100).unwrap();
        for i in 0..6 {
            assert_eq!(a[2 * i], a[0]);
            assert_eq!(a[2 * i + 1], a[1]);
        }
        assert_ne!(a[0], a[1]);
    }
}
