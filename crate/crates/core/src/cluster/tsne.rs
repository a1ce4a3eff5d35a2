use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::sq_dist;

pub const TSNE_MAX_POINTS: usize = 5000;
const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MIN_LEARNING_RATE: f64 = 50.0;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

/// Row-conditional probabilities for one point, found by bisection on the
/// Gaussian precision until the entropy matches `ln(perplexity)`.
fn conditional_row(d2: &[f64], i: usize, target: f64, row: &mut [f64]) {
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let dmin = d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    for _ in 0..200 {
        // Sums run over every index and then drop the self term, so two
        // identical points get bitwise identical rows.
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (&d, p) in d2.iter().zip(row.iter_mut()) {
            *p = (-(d - dmin) * beta).exp();
            sum += *p;
            weighted += *p * (d - dmin);
        }
        let own = row[i];
        sum -= own;
        weighted -= own * (d2[i] - dmin);
        row[i] = 0.0;
        let entropy = sum.ln() + beta * weighted / sum;
        row.iter_mut().for_each(|p| *p /= sum);
        let diff = entropy - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
}

/// Seeded Gaussian projection of the centred data, rescaled to a small
/// spread. Identical rows start, and therefore stay, at the same place.
fn random_projection(data: &[Vec<f64>], seed: u64) -> Vec<[f64; 2]> {
    let n = data.len();
    let d = data[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r: Vec<[f64; 2]> = (0..d).map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]).collect();
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
    let mut y: Vec<[f64; 2]> = data
        .iter()
        .map(|x| {
            let mut p = [0.0; 2];
            for ((v, m), w) in x.iter().zip(&mean).zip(&r) {
                p[0] += (v - m) * w[0];
                p[1] += (v - m) * w[1];
            }
            p
        })
        .collect();
    let var = y.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / (2 * n) as f64;
    if var > 0.0 {
        let scale = INIT_STD / var.sqrt();
        y.iter_mut().for_each(|p| {
            p[0] *= scale;
            p[1] *= scale;
        });
    }
    y
}

/// Exact t-SNE into two dimensions.
pub fn tsne_embed(data: &[Vec<f64>], perplexity: f64, iters: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Data("t-SNE needs at least two points".into()));
    }
    if n > TSNE_MAX_POINTS {
        return Err(Error::Parameter(format!("{n} points exceed the exact t-SNE limit of {TSNE_MAX_POINTS}")));
    }
    if !(perplexity > 0.0 && perplexity * 3.0 < n as f64) {
        return Err(Error::Parameter(format!("perplexity {perplexity} infeasible for {n} points")));
    }
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        for (j, v) in d2.iter_mut().enumerate() {
            *v = sq_dist(&data[i], &data[j]);
        }
        conditional_row(&d2, i, target, &mut p[i * n..(i + 1) * n]);
    }
    for i in 0..n {
        for j in 0..i {
            let v = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
        p[i * n + i] = 0.0;
    }

    let y = random_projection(data, seed);
    let mut y = y;
    let learning_rate = (n as f64 / EXAGGERATION / 4.0).max(MIN_LEARNING_RATE);
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    let mut q = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];
    for it in 0..iters {
        let exaggeration = if it < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if it < EXAGGERATION_ITERS { 0.5 } else { 0.8 };
        let mut qsum = 0.0;
        for i in 0..n {
            for j in 0..i {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                qsum += 2.0 * w;
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = q[i * n + j];
                let coef = (exaggeration * p[i * n + j] - w / qsum) * w;
                g[0] += coef * (y[i][0] - y[j][0]);
                g[1] += coef * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for a in 0..2 {
                let same = (grad[i][a] > 0.0) == (velocity[i][a] > 0.0);
                gains[i][a] = if same { (gains[i][a] * 0.8).max(MIN_GAIN) } else { gains[i][a] + 0.2 };
                velocity[i][a] = momentum * velocity[i][a] - learning_rate * gains[i][a] * grad[i][a];
                y[i][a] += velocity[i][a];
            }
        }
        let mean = [y.iter().map(|v| v[0]).sum::<f64>() / n as f64, y.iter().map(|v| v[1]).sum::<f64>() / n as f64];
        for v in y.iter_mut() {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::kmeans::kmeans;

    fn blobs(per: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for c in [0.0, 20.0] {
            for _ in 0..per {
                out.push((0..5).map(|_| c + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect());
            }
        }
        out
    }

    #[test]
    fn separated_blobs_split_cleanly() {
        let data = blobs(50, 3);
        let y = tsne_embed(&data, 15.0, 500, 1).unwrap();
        let pts: Vec<Vec<f64>> = y.iter().map(|v| v.to_vec()).collect();
        let km = kmeans(&pts, 2, 0).unwrap();
        let first = km.labels[0];
        assert!(km.labels[..50].iter().all(|&l| l == first));
        assert!(km.labels[50..].iter().all(|&l| l != first));
    }

    #[test]
    fn duplicates_coincide() {
        let mut data = blobs(30, 4);
        data.push(data[7].clone());
        let y = tsne_embed(&data, 10.0, 600, 2).unwrap();
        let d = sq_dist(&y[7], &y[60]).sqrt();
        assert!(d < 1e-3, "{d}");
    }

    #[test]
    fn seeded_runs_repeat() {
        let data = blobs(20, 5);
        assert_eq!(tsne_embed(&data, 5.0, 100, 9).unwrap(), tsne_embed(&data, 5.0, 100, 9).unwrap());
    }

    #[test]
    fn perplexity_bound() {
        let data = blobs(15, 6);
        assert!(matches!(tsne_embed(&data, 10.0, 10, 0), Err(Error::Parameter(_))));
        assert!(tsne_embed(&data, 9.9, 10, 0).is_ok());
    }

    #[test]
    fn conditional_row_hits_target_entropy() {
        let d2: Vec<f64> = (0..40).map(|j| (j as f64 * 0.7).powi(2)).collect();
        let mut row = vec![0.0; 40];
        conditional_row(&d2, 3, 8f64.ln(), &mut row);
        let h: f64 = -row.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        assert!((h.exp() - 8.0).abs() < 1e-3);
        assert_eq!(row[3], 0.0);
    }
}
