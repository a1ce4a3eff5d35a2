use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::kmeans::kmeans_restarts;
use crate::error::{Error, Result};
use crate::numeric::{dot, norm};
use crate::spectral::{HyperCube, LabelMap};

pub const DEFAULT_MAX_SAMPLES: usize = 4096;
/// Largest graph solved by a full dense eigendecomposition.
const DENSE_LIMIT: usize = 600;
/// Seeded k-means runs on the embedding; the lowest objective wins.
pub const KMEANS_RESTARTS: usize = 10;

/// Symmetric pairwise affinities in `[0, 1]` with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl AffinityMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!("affinity of order {n} given {} entries", data.len())));
        }
        for i in 0..n {
            if (data[i * n + i] - 1.0).abs() > 1e-12 {
                return Err(Error::Data(format!("affinity diagonal at {i} is not 1")));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                    return Err(Error::Data(format!("affinity ({i}, {j}) outside [0, 1]")));
                }
                if (a - b).abs() > 1e-12 {
                    return Err(Error::Data(format!("affinity not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn unit_rows(spectra: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let b = spectra.first().map_or(0, Vec::len);
    spectra
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != b {
                return Err(Error::Shape(format!("spectrum {i} has {} bands, expected {b}", x.len())));
            }
            let n = norm(x);
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Data(format!("spectrum {i} has zero or non-finite norm")));
            }
            Ok(x.iter().map(|v| v / n).collect())
        })
        .collect()
}

/// `(1 + cos)/2` between every pair of spectra.
pub fn cosine_affinity(spectra: &[Vec<f64>]) -> Result<AffinityMatrix> {
    let u = unit_rows(spectra)?;
    let n = u.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
        for j in 0..i {
            let a = (0.5 * (1.0 + dot(&u[i], &u[j]))).clamp(0.0, 1.0);
            data[i * n + j] = a;
            data[j * n + i] = a;
        }
    }
    Ok(AffinityMatrix { n, data })
}

/// Rows of the top-`k` eigenvectors, each scaled to unit length.
fn embed_rows(vectors: &DMatrix<f64>) -> Vec<Vec<f64>> {
    vectors
        .row_iter()
        .map(|r| {
            let v: Vec<f64> = r.iter().copied().collect();
            let n = norm(&v);
            if n > 0.0 {
                v.iter().map(|x| x / n).collect()
            } else {
                v
            }
        })
        .collect()
}

fn top_k_columns(values: &[f64], vectors: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    DMatrix::from_fn(vectors.nrows(), k, |r, c| vectors[(r, order[c])])
}

/// Leading eigenvectors of a symmetric `m` whose spectrum lies in `[-1, 1]`,
/// by orthogonal iteration on `m + I`.
fn subspace_iteration(m: &DMatrix<f64>, k: usize, seed: u64) -> DMatrix<f64> {
    let n = m.nrows();
    let block = (k + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    q = q.qr().q();
    let mut prev = vec![f64::INFINITY; k];
    for _ in 0..2000 {
        let z = m * &q + &q;
        q = z.qr().q();
        let small = q.transpose() * m * &q;
        let eig = SymmetricEigen::new(small);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let moved = vals.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev.copy_from_slice(&vals[..k]);
        if moved < 1e-12 {
            let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            return top_k_columns(&vals, &(&q * eig.eigenvectors), k);
        }
    }
    let small = q.transpose() * m * &q;
    let eig = SymmetricEigen::new(small);
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    top_k_columns(&vals, &(&q * eig.eigenvectors), k)
}

/// Normalized-Laplacian spectral clustering: the `k` eigenvectors of
/// `L = I - D^-1/2 A D^-1/2` with smallest eigenvalues, rows normalized,
/// then k-means.
pub fn spectral_cluster(affinity: &AffinityMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = affinity.len();
    if k == 0 || n < k {
        return Err(Error::Data(format!("{n} nodes cannot form {k} clusters")));
    }
    let deg: Vec<f64> = (0..n).map(|i| affinity.data[i * n..(i + 1) * n].iter().sum()).collect();
    if let Some(i) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Data(format!("node {i} has zero degree")));
    }
    let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| s[i] * affinity.data[i * n + j] * s[j]);
    let vectors = if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(m);
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        top_k_columns(&vals, &eig.eigenvectors, k)
    } else {
        subspace_iteration(&m, k, seed)
    };
    Ok(kmeans_restarts(&embed_rows(&vectors), k, seed, KMEANS_RESTARTS)?.labels)
}

/// Spectral clustering on the cosine affinity without forming it.
///
/// With unit rows `X`, the affinity is `C Cᵀ` for `C = [1, X] / √2`, so the
/// normalized matrix is `B Bᵀ` with `B = D^-1/2 C` and its leading
/// eigenvectors follow from the small `BᵀB` problem.
pub fn spectral_cluster_cosine(spectra: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = spectra.len();
    if k == 0 || n < k {
        return Err(Error::Data(format!("{n} spectra cannot form {k} clusters")));
    }
    let u = unit_rows(spectra)?;
    let b = u[0].len() + 1;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = DMatrix::from_fn(n, b, |i, j| if j == 0 { h } else { h * u[i][j - 1] });
    let col_sums = c.row_sum();
    let deg = &c * col_sums.transpose();
    let bm = DMatrix::from_fn(n, b, |i, j| c[(i, j)] / deg[i].sqrt());
    let eig = SymmetricEigen::new(bm.transpose() * &bm);
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]).then(x.cmp(&y)));
    let top = vals[order[0]];
    let mut vectors = DMatrix::zeros(n, k);
    for (col, &o) in order.iter().take(k).enumerate() {
        let lambda = vals[o];
        if lambda > 1e-12 * top {
            let v = eig.eigenvectors.column(o);
            let uvec = (&bm * v) / lambda.sqrt();
            vectors.set_column(col, &uvec);
        }
    }
    Ok(kmeans_restarts(&embed_rows(&vectors), k, seed, KMEANS_RESTARTS)?.labels)
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - dot(a, b) / (norm(a) * norm(b)).max(f64::MIN_POSITIVE)
}

/// Cluster unmasked pixels of a (band-selected) cube.
///
/// Up to `max_n` pixels are clustered directly. Larger images are
/// clustered on a seeded uniform subsample; every pixel is then labeled
/// by the nearest cluster mean of unit spectra under cosine distance.
pub fn subsample_and_extend(cube: &HyperCube, max_n: usize, k: usize, seed: u64) -> Result<LabelMap> {
    if k == 0 || k >= crate::spectral::LABEL_MASKED as usize {
        return Err(Error::Parameter(format!("invalid cluster count {k}")));
    }
    if max_n < k {
        return Err(Error::Parameter(format!("max_n {max_n} below k = {k}")));
    }
    let pixels: Vec<usize> = cube.tissue_pixels().collect();
    let spectra: Vec<Vec<f64>> = pixels.iter().map(|&p| cube.spectrum(p).to_vec()).collect();
    let n = spectra.len();
    if n < k {
        return Err(Error::Data(format!("{n} unmasked pixels cannot form {k} clusters")));
    }
    let mut labels = vec![0u16; cube.pixels()];
    if n <= max_n {
        for (&p, l) in pixels.iter().zip(spectral_cluster_cosine(&spectra, k, seed)?) {
            labels[p] = l as u16;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = index::sample(&mut rng, n, max_n).into_vec();
        pick.sort_unstable();
        let sample: Vec<Vec<f64>> = pick.iter().map(|&i| spectra[i].clone()).collect();
        let sample_labels = spectral_cluster_cosine(&sample, k, seed)?;
        let unit = unit_rows(&sample)?;
        let b = unit[0].len();
        let mut means = vec![vec![0.0; b]; k];
        for (x, &l) in unit.iter().zip(&sample_labels) {
            for (m, v) in means[l].iter_mut().zip(x) {
                *m += v;
            }
        }
        for (&p, x) in pixels.iter().zip(&spectra) {
            let mut best = (0, f64::INFINITY);
            for (c, m) in means.iter().enumerate() {
                let d = cosine_distance(x, m);
                if d < best.1 {
                    best = (c, d);
                }
            }
            labels[p] = best.0 as u16;
        }
    }
    LabelMap::new(cube.rows(), cube.cols(), labels, cube.mask().to_vec(), k as u16)
}
