use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::selector::{softmax_into, ConcreteSelector};
use crate::error::{Error, Result};

/// Selector neurons per model.
pub const SELECTED_PER_MODEL: usize = 5;
/// Units in the decoder's hidden layer.
pub const HIDDEN_UNITS: usize = 5;

/// Concrete autoencoder: selector (`k` of `d` inputs) → dense(`h`, LeakyReLU)
/// → dense(`d`, LeakyReLU).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeModel {
    pub selector: ConcreteSelector,
    pub hidden: usize,
    /// `hidden × k`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `d × hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub slope: f64,
}

/// Gradients of the loss, laid out like [`CaeModel::params`].
pub type Gradients = Vec<f64>;

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// Glorot-uniform limit for a dense layer.
fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl CaeModel {
    /// Zero-bias model with Glorot-initialized weights and logits.
    pub fn init<R: Rng>(d: usize, k: usize, hidden: usize, slope: f64, temperature: f64, rng: &mut R) -> Result<Self> {
        if d < k {
            return Err(Error::Data(format!("{d} inputs cannot feed {k} selector neurons")));
        }
        let ln = Normal::new(0.0, (2.0 / (k + d) as f64).sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
        let logits = (0..k * d).map(|_| ln.sample(rng)).collect();
        let a1 = glorot(k, hidden);
        let w1 = (0..hidden * k).map(|_| rng.random_range(-a1..a1)).collect();
        let a2 = glorot(hidden, d);
        let w2 = (0..d * hidden).map(|_| rng.random_range(-a2..a2)).collect();
        Self::new(ConcreteSelector::new(k, d, logits, temperature)?, hidden, w1, vec![0.0; hidden], w2, vec![0.0; d], slope)
    }

    pub fn new(
        selector: ConcreteSelector,
        hidden: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
        slope: f64,
    ) -> Result<Self> {
        let (k, d) = (selector.k, selector.d);
        if w1.len() != hidden * k || b1.len() != hidden || w2.len() != d * hidden || b2.len() != d {
            return Err(Error::Shape("decoder shapes do not match selector".into()));
        }
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::Parameter(format!("LeakyReLU slope {slope} outside [0, 1)")));
        }
        Ok(Self {
            selector,
            hidden,
            w1,
            b1,
            w2,
            b2,
            slope,
        })
    }

    pub fn d(&self) -> usize {
        self.selector.d
    }

    pub fn k(&self) -> usize {
        self.selector.k
    }

    pub fn param_count(&self) -> usize {
        self.selector.logits.len() + self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flat parameter vector: logits, w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        [&self.selector.logits[..], &self.w1, &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Shape(format!("{} params, model has {}", p.len(), self.param_count())));
        }
        let mut off = 0;
        for seg in [&mut self.selector.logits, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let n = seg.len();
            seg.copy_from_slice(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn check_batch(&self, batch: &[f64], noise: Option<&[f64]>) -> Result<usize> {
        let d = self.d();
        if !batch.len().is_multiple_of(d) || batch.is_empty() {
            return Err(Error::Shape(format!("batch of {} values is not a multiple of {d}", batch.len())));
        }
        let b = batch.len() / d;
        if let Some(g) = noise {
            if g.len() != b * self.k() * d {
                return Err(Error::Shape(format!(
                    "noise has {} values, batch needs {}",
                    g.len(),
                    b * self.k() * d
                )));
            }
        }
        Ok(b)
    }

    /// Decoder pass from selected values `u` into `h_pre`, `h`, `o_pre`, `out`.
    fn decode(&self, u: &[f64], h_pre: &mut [f64], h: &mut [f64], o_pre: &mut [f64], out: &mut [f64]) {
        let k = self.k();
        for a in 0..self.hidden {
            let s = self.b1[a] + crate::numeric::dot(&self.w1[a * k..(a + 1) * k], u);
            h_pre[a] = s;
            h[a] = leaky(s, self.slope);
        }
        let hd = self.hidden;
        for j in 0..self.d() {
            let s = self.b2[j] + crate::numeric::dot(&self.w2[j * hd..(j + 1) * hd], h);
            o_pre[j] = s;
            out[j] = leaky(s, self.slope);
        }
    }

    /// Selector output for example `e`; fills `z` (`k × d`) when training.
    fn select(&self, x: &[f64], noise: Option<&[f64]>, train: bool, z: &mut [f64], u: &mut [f64]) {
        let (k, d) = (self.k(), self.d());
        for i in 0..k {
            if train {
                let zi = &mut z[i * d..(i + 1) * d];
                softmax_into(self.selector.row(i), noise.map(|g| &g[i * d..(i + 1) * d]), self.selector.temperature, zi);
                u[i] = crate::numeric::dot(zi, x);
            } else {
                u[i] = x[crate::numeric::argmax(self.selector.row(i))];
            }
        }
    }

    /// Reconstructs a row-major batch. `noise` (`batch × k × d`) is used only
    /// when `train` is set; `None` means zero noise.
    pub fn forward(&self, batch: &[f64], noise: Option<&[f64]>, train: bool) -> Result<Vec<f64>> {
        let b = self.check_batch(batch, noise)?;
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite model input".into()));
        }
        let (k, d) = (self.k(), self.d());
        let mut out = vec![0.0; b * d];
        let mut z = vec![0.0; if train { k * d } else { 0 }];
        let mut u = vec![0.0; k];
        let (mut hp, mut h, mut op) = (vec![0.0; self.hidden], vec![0.0; self.hidden], vec![0.0; d]);
        for e in 0..b {
            let x = &batch[e * d..(e + 1) * d];
            let g = noise.map(|g| &g[e * k * d..(e + 1) * k * d]);
            self.select(x, g, train, &mut z, &mut u);
            self.decode(&u, &mut hp, &mut h, &mut op, &mut out[e * d..(e + 1) * d]);
        }
        Ok(out)
    }

    /// Training-mode MSE of reconstructing `batch` and its exact gradient.
    /// Noise and temperature are treated as constants.
    pub fn loss_and_grad(&self, batch: &[f64], noise: Option<&[f64]>) -> Result<(f64, Gradients)> {
        let b = self.check_batch(batch, noise)?;
        let (k, d, hd) = (self.k(), self.d(), self.hidden);
        let n_logits = k * d;
        let (o_w1, o_b1) = (n_logits, n_logits + hd * k);
        let o_w2 = o_b1 + hd;
        let o_b2 = o_w2 + d * hd;
        let mut grad = vec![0.0; self.param_count()];
        let scale = 2.0 / (b * d) as f64;
        let t = self.selector.temperature;

        let mut z = vec![0.0; k * d];
        let mut u = vec![0.0; k];
        let (mut hp, mut h, mut op, mut out) = (vec![0.0; hd], vec![0.0; hd], vec![0.0; d], vec![0.0; d]);
        let mut d_op = vec![0.0; d];
        let mut d_h = vec![0.0; hd];
        let mut d_u = vec![0.0; k];
        let mut sse = 0.0;
        for e in 0..b {
            let x = &batch[e * d..(e + 1) * d];
            let g = noise.map(|g| &g[e * k * d..(e + 1) * k * d]);
            self.select(x, g, true, &mut z, &mut u);
            self.decode(&u, &mut hp, &mut h, &mut op, &mut out);

            d_h.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..d {
                let r = out[j] - x[j];
                sse += r * r;
                let dj = scale * r * leaky_grad(op[j], self.slope);
                d_op[j] = dj;
                grad[o_b2 + j] += dj;
                let w = &self.w2[j * hd..(j + 1) * hd];
                let gw = &mut grad[o_w2 + j * hd..o_w2 + (j + 1) * hd];
                for a in 0..hd {
                    gw[a] += dj * h[a];
                    d_h[a] += dj * w[a];
                }
            }
            d_u.iter_mut().for_each(|v| *v = 0.0);
            for a in 0..hd {
                let da = d_h[a] * leaky_grad(hp[a], self.slope);
                grad[o_b1 + a] += da;
                for i in 0..k {
                    grad[o_w1 + a * k + i] += da * u[i];
                    d_u[i] += da * self.w1[a * k + i];
                }
            }
            // softmax Jacobian: ∂u_i/∂logit_ij = z_ij (x_j − u_i) / T
            for i in 0..k {
                let c = d_u[i] / t;
                let ui = u[i];
                let zi = &z[i * d..(i + 1) * d];
                let gl = &mut grad[i * d..(i + 1) * d];
                for j in 0..d {
                    gl[j] += c * zi[j] * (x[j] - ui);
                }
            }
        }
        Ok((sse / (b * d) as f64, grad))
    }
}

/// Mean of squared element differences.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    let sq: Vec<f64> = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).collect();
    Ok(crate::numeric::pairwise_sum(&sq) / sq.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_model(slope: f64) -> CaeModel {
        // d = 5, each neuron strongly prefers its own band
        let mut logits = vec![0.0; 25];
        for i in 0..5 {
            logits[i * 5 + i] = 50.0;
        }
        let sel = ConcreteSelector::new(5, 5, logits, 0.1).unwrap();
        let mut eye = vec![0.0; 25];
        for i in 0..5 {
            eye[i * 5 + i] = 1.0;
        }
        CaeModel::new(sel, 5, eye.clone(), vec![0.0; 5], eye, vec![0.0; 5], slope).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let sel = ConcreteSelector::new(2, 4, vec![0.1; 8], 1.0).unwrap();
        let m = CaeModel::new(sel, 3, vec![0.0; 6], vec![0.0; 3], vec![0.0; 12], vec![0.0; 4], 0.01).unwrap();
        let out = m.forward(&[1.0, -2.0, 3.0, 4.0], None, true).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_set_identity_reproduces_positive_input() {
        let m = identity_model(0.01);
        let x = [0.5, 1.0, 2.0, 0.25, 3.0];
        for train in [true, false] {
            let out = m.forward(&x, None, train).unwrap();
            for (o, v) in out.iter().zip(x) {
                assert!((o - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_residual_has_zero_gradient() {
        let m = identity_model(0.01);
        let (loss, g) = m.loss_and_grad(&[0.5, 1.0, 2.0, 0.25, 3.0], None).unwrap();
        assert!(loss < 1e-24);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_scales_with_residual_at_output_bias() {
        // identity decoder on positive data: doubling the output bias shift doubles its gradient
        let x = [0.5, 1.0, 2.0, 0.25, 3.0];
        let mut a = identity_model(0.01);
        a.b2 = vec![0.1; 5];
        let mut b = identity_model(0.01);
        b.b2 = vec![0.2; 5];
        let ga = a.loss_and_grad(&x, None).unwrap().1;
        let gb = b.loss_and_grad(&x, None).unwrap().1;
        let o = ga.len() - 5;
        for j in 0..5 {
            assert!((gb[o + j] - 2.0 * ga[o + j]).abs() < 1e-12);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = CaeModel::init(12, 5, 5, 0.01, 10.0, &mut rng).unwrap();
        let mut m2 = m.clone();
        m2.set_params(&m.params()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(m.param_count(), 60 + 25 + 5 + 60 + 12);
    }

    #[test]
    fn inference_is_noise_free_and_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = CaeModel::init(12, 5, 5, 0.01, 1.0, &mut rng).unwrap();
        let x: Vec<f64> = (0..24).map(|v| (v as f64 * 0.37).sin()).collect();
        let a = m.forward(&x, None, false).unwrap();
        let b = m.forward(&x, None, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mse_oracles() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[3.0, 4.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), 4.0);
        let p: Vec<f64> = (0..37).map(|v| (v as f64 * 1.3).cos()).collect();
        let t: Vec<f64> = (0..37).map(|v| (v as f64 * 0.7).sin()).collect();
        let mut naive = 0.0;
        for i in 0..37 {
            naive += (p[i] - t[i]) * (p[i] - t[i]);
        }
        assert!((mse_loss(&p, &t).unwrap() - naive / 37.0).abs() < 1e-15);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for draw in 0..20 {
            let d = rng.random_range(5..14);
            let b = rng.random_range(1..5);
            let slope = if draw % 2 == 0 { 0.01 } else { 0.3 };
            let t = rng.random_range(0.5..5.0);
            let mut m = CaeModel::init(d, 5, 5, slope, t, &mut rng).unwrap();
            for v in m.b1.iter_mut().chain(m.b2.iter_mut()) {
                *v = rng.random_range(-0.5..0.5);
            }
            let x: Vec<f64> = (0..b * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = crate::cae::sample_gumbel(b * 5 * d, draw);
            let (_, grad) = m.loss_and_grad(&x, Some(&g)).unwrap();
            let p0 = m.params();
            for i in 0..p0.len() {
                let mut p = p0.clone();
                p[i] = p0[i] + h;
                m.set_params(&p).unwrap();
                let lp = mse_loss(&m.forward(&x, Some(&g), true).unwrap(), &x).unwrap();
                p[i] = p0[i] - h;
                m.set_params(&p).unwrap();
                let lm = mse_loss(&m.forward(&x, Some(&g), true).unwrap(), &x).unwrap();
                let num = (lp - lm) / (2.0 * h);
                let rel = (grad[i] - num).abs() / grad[i].abs().max(num.abs()).max(1e-6);
                worst = worst.max(rel);
            }
            m.set_params(&p0).unwrap();
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = CaeModel::init(6, 5, 5, 0.01, 1.0, &mut rng).unwrap();
        assert!(matches!(m.forward(&[0.0; 7], None, false), Err(Error::Shape(_))));
    }
}
