use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::sq_dist;

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia: Vec<f64>,
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(x, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centroids(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.push(data[pick].clone());
        for (v, x) in d2.iter_mut().zip(data) {
            *v = v.min(sq_dist(x, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeds; stops when no centroid moves
/// more than 1e-8 or after 300 iterations. An empty cluster is reseeded
/// at the point farthest from its centroid.
pub fn kmeans(data: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    let n = data.len();
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    if n < k {
        return Err(Error::Data(format!("{n} points cannot form {k} clusters")));
    }
    let d = data[0].len();
    if data.iter().any(|x| x.len() != d) {
        return Err(Error::Shape("rows differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(data, k, &mut rng);
    let mut labels = vec![0; n];
    let mut inertia = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut dist = vec![0.0; n];
        for (i, x) in data.iter().enumerate() {
            let (c, dd) = nearest(x, &centroids);
            labels[i] = c;
            dist[i] = dd;
        }
        inertia.push(dist.iter().sum());
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] == 0 {
                let far = (0..n).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap_or(0);
                dist[far] = 0.0;
                data[far].clone()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift = shift.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift < KMEANS_TOL {
            break;
        }
    }
    for (i, x) in data.iter().enumerate() {
        labels[i] = nearest(x, &centroids).0;
    }
    Ok(KMeansResult {
        labels,
        centroids,
        inertia,
    })
}

/// Best of `restarts` seeded runs by final within-cluster sum of squares;
/// the earliest run wins ties.
pub fn kmeans_restarts(data: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    let mut best: Option<(f64, KMeansResult)> = None;
    for r in 0..restarts.max(1) as u64 {
        let run = kmeans(data, k, seed.wrapping_add(r.wrapping_mul(0x9e37_79b9_7f4a_7c15)))?;
        let cost = objective(data, &run);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, run));
        }
    }
    Ok(best.expect("at least one run").1)
}

fn objective(data: &[Vec<f64>], r: &KMeansResult) -> f64 {
    data.iter().zip(&r.labels).map(|(x, &l)| sq_dist(x, &r.centroids[l])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_groups_recover_means() {
        let data = vec![vec![0.0, 0.0], vec![0.2, 0.0], vec![10.0, 10.0], vec![10.0, 10.4], vec![-9.0, 5.0]];
        let r = kmeans(&data, 3, 1).unwrap();
        let mut c = r.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, vec![vec![-9.0, 5.0], vec![0.1, 0.0], vec![10.0, 10.2]]);
    }

    #[test]
    fn single_cluster_is_mean() {
        let data = vec![vec![1.0], vec![2.0], vec![6.0]];
        let r = kmeans(&data, 1, 0).unwrap();
        assert!((r.centroids[0][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_gap() {
        let data: Vec<Vec<f64>> = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0].iter().map(|v| vec![*v]).collect();
        // exhaustive oracle: the best 2-partition of sorted 1-D data is a split point
        let mut best = (f64::INFINITY, 0);
        for s in 1..6 {
            let cost = |xs: &[Vec<f64>]| {
                let m = xs.iter().map(|x| x[0]).sum::<f64>() / xs.len() as f64;
                xs.iter().map(|x| (x[0] - m).powi(2)).sum::<f64>()
            };
            let c = cost(&data[..s]) + cost(&data[s..]);
            if c < best.0 {
                best = (c, s);
            }
        }
        assert_eq!(best.1, 3);
        let r = kmeans(&data, 2, 4).unwrap();
        assert!(r.labels[..3].iter().all(|l| *l == r.labels[0]));
        assert!(r.labels[3..].iter().all(|l| *l == r.labels[3]));
        assert_ne!(r.labels[0], r.labels[3]);
        let mut c: Vec<f64> = r.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
    }

    #[test]
    fn inertia_never_increases() {
        let data: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64 * 0.77).sin() * 3.0, (i as f64 * 0.31).cos()]).collect();
        let r = kmeans(&data, 5, 2).unwrap();
        assert!(r.inertia.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn restarts_never_worse_than_first_run() {
        let data: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 * 1.3).sin() * 5.0, (i as f64 * 0.7).cos() * 3.0]).collect();
        let one = kmeans(&data, 5, 11).unwrap();
        let many = kmeans_restarts(&data, 5, 11, 8).unwrap();
        assert!(objective(&data, &many) <= objective(&data, &one));
        assert_eq!(kmeans_restarts(&data, 5, 11, 1).unwrap(), one);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(kmeans(&[vec![1.0]], 2, 0), Err(Error::Data(_))));
    }
}
