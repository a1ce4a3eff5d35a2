use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `g = −ln(−ln u)`.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Standard Gumbel draws as `−ln E` with `E ~ Exp(1)`, which equals
/// `−ln(−ln u)` in distribution and needs one logarithm instead of two.
pub(crate) fn fill_gumbel<R: Rng>(out: &mut [f64], rng: &mut R) {
    for v in out {
        let e: f64 = Exp1.sample(rng);
        *v = -e.ln();
    }
}

/// `len` standard Gumbel draws from a seeded generator.
pub fn sample_gumbel(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; len];
    fill_gumbel(&mut out, &mut rng);
    out
}

/// Concrete (Gumbel–softmax) selection layer: `k` neurons over `d` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteSelector {
    pub k: usize,
    pub d: usize,
    /// `k × d`, row-major.
    pub logits: Vec<f64>,
    pub temperature: f64,
}

impl ConcreteSelector {
    pub fn new(k: usize, d: usize, logits: Vec<f64>, temperature: f64) -> Result<Self> {
        if k == 0 || d == 0 || logits.len() != k * d {
            return Err(Error::Shape(format!("{} logits for {k} x {d} selector", logits.len())));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite selector logit".into()));
        }
        if !(temperature > 0.0) {
            return Err(Error::Parameter(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self {
            k,
            d,
            logits,
            temperature,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.d..(i + 1) * self.d]
    }

    /// Index of the largest logit of each neuron (first on ties).
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.k).map(|i| crate::numeric::argmax(self.row(i))).collect()
    }
}

/// Softmax of `(logits + noise) / t` into `z`; returns nothing, `z` is
/// normalized in place.
pub(crate) fn softmax_into(logits: &[f64], noise: Option<&[f64]>, t: f64, z: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for j in 0..logits.len() {
        let a = (logits[j] + noise.map_or(0.0, |g| g[j])) / t;
        z[j] = a;
        if a > max {
            max = a;
        }
    }
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in z.iter_mut() {
        *v *= inv;
    }
}

/// One selector pass over a single spectrum.
///
/// Training: `z_i = softmax((log α_i + g_i)/T)` and `u_i = z_i · x`.
/// Inference: `z_i` is one-hot at the argmax logit and `u_i = x[argmax]`.
/// Returns `(u, z)` with `z` laid out `k × d`.
pub fn concrete_forward(
    x: &[f64],
    selector: &ConcreteSelector,
    noise: Option<&[f64]>,
    train: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k, d) = (selector.k, selector.d);
    if x.len() != d {
        return Err(Error::Shape(format!("input has {} values, selector expects {d}", x.len())));
    }
    if let Some(g) = noise {
        if g.len() != k * d {
            return Err(Error::Shape(format!("noise has {} values, expected {}", g.len(), k * d)));
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite selector input".into()));
    }
    let mut z = vec![0.0; k * d];
    let mut u = vec![0.0; k];
    for i in 0..k {
        let zi = &mut z[i * d..(i + 1) * d];
        if train {
            softmax_into(selector.row(i), noise.map(|g| &g[i * d..(i + 1) * d]), selector.temperature, zi);
            u[i] = crate::numeric::dot(zi, x);
        } else {
            let j = crate::numeric::argmax(selector.row(i));
            zi[j] = 1.0;
            u[i] = x[j];
        }
    }
    Ok((u, z))
}
