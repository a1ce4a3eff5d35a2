use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal axes of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `p × d`, row-major, orthonormal rows.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub mean: Vec<f64>,
}

fn to_matrix(data: &[Vec<f64>]) -> Result<(usize, usize, DMatrix<f64>)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Data(format!("PCA needs at least 2 samples, got {n}")));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("rows differ in length".into()));
    }
    Ok((n, d, DMatrix::from_fn(n, d, |i, j| data[i][j])))
}

/// Fits up to `max_components` principal components (all of `min(n, d)` if
/// `None`). Each component's largest-magnitude entry is positive.
pub fn pca_fit(data: &[Vec<f64>], max_components: Option<usize>) -> Result<PcaModel> {
    let (n, d, mut x) = to_matrix(data)?;
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    for j in 0..d {
        let m = mean[j];
        x.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let total: f64 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let rank = (n - 1).min(d);
    let p = max_components.unwrap_or(rank).min(rank);

    // eigenvectors of the smaller Gram/covariance matrix
    let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let cov = (x.transpose() * &x) / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        order
            .iter()
            .take(p)
            .map(|&i| (eig.eigenvalues[i].max(0.0), eig.eigenvectors.column(i).iter().copied().collect()))
            .unzip()
    } else {
        let gram = (&x * x.transpose()) / n as f64;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        order
            .iter()
            .take(p)
            .map(|&i| {
                let lam = eig.eigenvalues[i].max(0.0);
                let u = eig.eigenvectors.column(i);
                let mut v: Vec<f64> = (x.transpose() * u).iter().copied().collect();
                let nv = crate::numeric::norm(&v);
                if nv > 0.0 {
                    v.iter_mut().for_each(|c| *c /= nv);
                }
                (lam, v)
            })
            .unzip()
    };
    let components = vectors
        .into_iter()
        .map(|mut v| {
            let big = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
            if big < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            v
        })
        .collect();
    let ratio = values.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect();
    Ok(PcaModel {
        components,
        explained_variance: values,
        explained_variance_ratio: ratio,
        mean,
    })
}

impl PcaModel {
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.components.iter().map(|v| crate::numeric::dot(v, &c)).collect()
    }

    /// Reconstruction from the first `p` components.
    pub fn reconstruct(&self, x: &[f64], p: usize) -> Vec<f64> {
        let s = self.transform(x);
        let mut out = self.mean.clone();
        for (comp, score) in self.components.iter().zip(s).take(p) {
            for (o, c) in out.iter_mut().zip(comp) {
                *o += score * c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn collinear_data_has_one_component() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| {
            let t = i as f64 * 0.3 - 2.0;
            vec![1.0 + t, 2.0 - 2.0 * t, 0.5 * t]
        }).collect();
        let m = pca_fit(&data, None).unwrap();
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        assert!(m.explained_variance_ratio[1..].iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn isotropic_gaussian_splits_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Vec<f64>> = (0..20_000).map(|_| vec![StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]).collect();
        let m = pca_fit(&data, None).unwrap();
        for r in &m.explained_variance_ratio {
            assert!((r - 0.5).abs() < 0.02, "{r}");
        }
    }

    fn random_data(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|j| { let z: f64 = StandardNormal.sample(&mut rng); z } * (1.0 + j as f64)).collect()).collect()
    }

    #[test]
    fn full_rank_ratios_sum_to_one_and_reconstruct() {
        for (n, d) in [(40, 6), (5, 9)] {
            let data = random_data(n, d, 3);
            let m = pca_fit(&data, None).unwrap();
            let s: f64 = m.explained_variance_ratio.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            for (i, a) in m.components.iter().enumerate() {
                for (j, b) in m.components.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((crate::numeric::dot(a, b) - want).abs() < 1e-8);
                }
            }
            for x in &data {
                let r = m.reconstruct(x, m.components.len());
                for (a, b) in r.iter().zip(x) {
                    assert!((a - b).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn sign_convention() {
        let m = pca_fit(&random_data(30, 4, 8), None).unwrap();
        for c in &m.components {
            let big = c.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn single_sample_is_error() {
        assert!(matches!(pca_fit(&[vec![1.0, 2.0]], None), Err(Error::Data(_))));
    }
}
