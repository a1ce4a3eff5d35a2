use nalgebra::{Cholesky, DMatrix, DVector};

use super::kmeans::kmeans;
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

pub const GMM_RIDGE: f64 = 1e-6;
pub const GMM_MAX_ITER: usize = 200;
pub const GMM_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmResult {
    /// `n × k`.
    pub responsibilities: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Full covariances including the diagonal ridge.
    pub covariances: Vec<DMatrix<f64>>,
    /// Mean log-likelihood per sample, one entry per E-step.
    pub log_likelihood: Vec<f64>,
}

impl GmmResult {
    pub fn labels(&self) -> Vec<usize> {
        self.responsibilities.iter().map(|r| crate::numeric::argmax(r)).collect()
    }
}

struct Component {
    log_norm: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
    mean: DVector<f64>,
}

fn component(mean: &[f64], cov: &DMatrix<f64>) -> Result<Component> {
    let d = mean.len();
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| Error::Numeric("GMM covariance is not positive definite".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !log_det.is_finite() {
        return Err(Error::Numeric("GMM covariance is degenerate".into()));
    }
    Ok(Component {
        log_norm: -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
        chol,
        mean: DVector::from_column_slice(mean),
    })
}

fn log_density(c: &Component, x: &[f64]) -> f64 {
    let diff = DVector::from_column_slice(x) - &c.mean;
    let y = c.chol.l().solve_lower_triangular(&diff).expect("non-singular factor");
    c.log_norm - 0.5 * y.norm_squared()
}

/// EM for a full-covariance Gaussian mixture started from k-means.
pub fn gmm_em(data: &[Vec<f64>], k: usize, seed: u64) -> Result<GmmResult> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Data("no samples".into()));
    }
    let d = data[0].len();
    if n < k * (d + 1) {
        return Err(Error::Data(format!("{n} samples too few for {k} components in {d} dimensions")));
    }
    let init = kmeans(data, k, seed)?;
    let mut resp = vec![vec![0.0; k]; n];
    for (r, &l) in resp.iter_mut().zip(&init.labels) {
        r[l] = 1.0;
    }
    let mut weights = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    let mut covs = vec![DMatrix::zeros(d, d); k];
    let mut trace = Vec::new();
    for _ in 0..GMM_MAX_ITER {
        // M-step
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk <= 0.0 {
                return Err(Error::Numeric(format!("GMM component {c} lost all support")));
            }
            weights[c] = nk / n as f64;
            let mut m = vec![0.0; d];
            for (x, r) in data.iter().zip(&resp) {
                for (mj, xj) in m.iter_mut().zip(x) {
                    *mj += r[c] * xj;
                }
            }
            m.iter_mut().for_each(|v| *v /= nk);
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for (x, r) in data.iter().zip(&resp) {
                let w = r[c];
                for a in 0..d {
                    let da = x[a] - m[a];
                    for b in 0..=a {
                        cov[(a, b)] += w * da * (x[b] - m[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..=a {
                    let v = cov[(a, b)] / nk;
                    cov[(a, b)] = v;
                    cov[(b, a)] = v;
                }
                cov[(a, a)] += GMM_RIDGE;
            }
            means[c] = m;
            covs[c] = cov;
        }
        // E-step
        let comps = (0..k).map(|c| component(&means[c], &covs[c])).collect::<Result<Vec<_>>>()?;
        let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let mut ll = 0.0;
        let mut lp = vec![0.0; k];
        for (x, r) in data.iter().zip(resp.iter_mut()) {
            for c in 0..k {
                lp[c] = log_w[c] + log_density(&comps[c], x);
            }
            let lse = log_sum_exp(&lp);
            ll += lse;
            for c in 0..k {
                r[c] = (lp[c] - lse).exp();
            }
        }
        let ll = ll / n as f64;
        let done = trace.last().is_some_and(|prev: &f64| ll - prev < GMM_TOL);
        trace.push(ll);
        if done {
            break;
        }
    }
    Ok(GmmResult {
        responsibilities: resp,
        weights,
        means,
        covariances: covs,
        log_likelihood: trace,
    })
}
