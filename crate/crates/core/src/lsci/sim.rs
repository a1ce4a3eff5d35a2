use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FrameStack;
use crate::error::{Error, Result};

/// Per-pixel relative flow (decorrelation rate of the speckle field, 1/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FlowMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Shape(format!("{} flow values for {rows}x{cols}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("flow {v} must be finite and non-negative")));
        }
        Ok(Self { rows, cols, values })
    }

    /// Vertical bands of equal width, one per level.
    pub fn bands(rows: usize, cols: usize, levels: &[f64]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Parameter("no flow levels".into()));
        }
        let values = (0..rows * cols).map(|i| levels[(i % cols) * levels.len() / cols]).collect();
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Camera timing of the simulated acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleSim {
    pub exposure_s: f64,
    pub rate_hz: f64,
    /// Field samples integrated per exposure.
    pub substeps: usize,
}

impl Default for SpeckleSim {
    fn default() -> Self {
        Self {
            exposure_s: 0.005,
            rate_hz: 25.0,
            substeps: 64,
        }
    }
}

impl SpeckleSim {
    /// Each pixel carries a complex Gaussian field evolving as an AR(1)
    /// process with correlation `exp(−flow·dt)`. Frame intensity is the
    /// exposure-averaged `|E|²` times a static per-pixel speckle gain.
    pub fn simulate(&self, flow: &FlowMap, frames: usize, seed: u64) -> Result<FrameStack> {
        if frames < 2 {
            return Err(Error::Parameter(format!("need at least 2 frames, got {frames}")));
        }
        if self.substeps == 0 || !(self.exposure_s > 0.0) || !(self.rate_hz > 0.0) {
            return Err(Error::Parameter("invalid speckle timing".into()));
        }
        let period = 1.0 / self.rate_hz;
        if self.exposure_s > period {
            return Err(Error::Parameter(format!(
                "exposure {} s exceeds frame period {period} s",
                self.exposure_s
            )));
        }
        let dt = self.exposure_s / self.substeps as f64;
        let gap = period - self.exposure_s + dt;
        let n = flow.rows * flow.cols;
        let mut data = vec![0.0; frames * n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cn = |rng: &mut ChaCha8Rng| -> (f64, f64) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
        };
        for p in 0..n {
            let rate = flow.values[p];
            let gain: f64 = Exp1.sample(&mut rng);
            let step = |dt: f64| {
                let rho = (-rate * dt).exp();
                (rho, (1.0 - rho * rho).max(0.0).sqrt())
            };
            let (rho_in, s_in) = step(dt);
            let (rho_gap, s_gap) = step(gap);
            let mut e = cn(&mut rng);
            for f in 0..frames {
                let mut acc = 0.0;
                for m in 0..self.substeps {
                    if f > 0 || m > 0 {
                        let (rho, s) = if m == 0 { (rho_gap, s_gap) } else { (rho_in, s_in) };
                        let w = cn(&mut rng);
                        e = (rho * e.0 + s * w.0, rho * e.1 + s * w.1);
                    }
                    acc += e.0 * e.0 + e.1 * e.1;
                }
                data[f * n + p] = gain * acc / self.substeps as f64;
            }
        }
        FrameStack::new(frames, flow.rows, flow.cols, data, self.exposure_s, self.rate_hz)
    }
}

/// [`SpeckleSim::simulate`] with default camera timing.
pub fn simulate_speckle(flow: &FlowMap, frames: usize, seed: u64) -> Result<FrameStack> {
    SpeckleSim::default().simulate(flow, frames, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsci::temporal_contrast;

    fn region_means(k: &[f64], cols: usize, levels: usize) -> Vec<f64> {
        let mut sum = vec![0.0; levels];
        let mut n = vec![0usize; levels];
        for (i, v) in k.iter().enumerate() {
            let l = (i % cols) * levels / cols;
            sum[l] += v;
            n[l] += 1;
        }
        sum.iter().zip(&n).map(|(s, c)| s / *c as f64).collect()
    }

    #[test]
    fn zero_flow_is_static() {
        let flow = FlowMap::new(4, 4, vec![0.0; 16]).unwrap();
        let s = simulate_speckle(&flow, 8, 1).unwrap();
        assert_eq!(s.frame(0), s.frame(7));
        let k = temporal_contrast(&s).unwrap();
        assert!(k.values().iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn faster_flow_lowers_contrast() {
        let flow = FlowMap::bands(8, 16, &[50.0, 5000.0]).unwrap();
        let s = simulate_speckle(&flow, 64, 3).unwrap();
        let m = region_means(temporal_contrast(&s).unwrap().values(), 16, 2);
        assert!(m[0] > m[1], "{m:?}");
    }

    #[test]
    fn seeded_reproducibility() {
        let flow = FlowMap::bands(3, 5, &[10.0, 100.0]).unwrap();
        assert_eq!(simulate_speckle(&flow, 4, 9).unwrap(), simulate_speckle(&flow, 4, 9).unwrap());
        assert_ne!(simulate_speckle(&flow, 4, 9).unwrap(), simulate_speckle(&flow, 4, 10).unwrap());
    }

    #[test]
    fn flow_map_rejects_negative() {
        assert!(FlowMap::new(1, 2, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn five_levels_monotone() {
        let levels = [100.0, 300.0, 1000.0, 3000.0, 10000.0];
        let flow = FlowMap::bands(10, 20, &levels).unwrap();
        let s = simulate_speckle(&flow, 64, 7).unwrap();
        let m = region_means(temporal_contrast(&s).unwrap().values(), 20, 5);
        assert!(m.windows(2).all(|w| w[0] > w[1]), "{m:?}");
    }
}
