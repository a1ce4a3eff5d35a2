use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::model::{CaeModel, HIDDEN_UNITS, SELECTED_PER_MODEL};
use super::selector::fill_gumbel;
use crate::error::{Error, Result};
use crate::preprocess::zscore_columns;
use crate::spectral::io::{read_json, write_json};

/// Smallest number of training pixels accepted.
pub const MIN_PIXELS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub val_fraction: f64,
    pub leaky_slope: f64,
    pub selected: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            learning_rate: 1e-3,
            batch_size: 256,
            t_start: 10.0,
            t_end: 0.1,
            val_fraction: 0.2,
            leaky_slope: 0.3,
            selected: SELECTED_PER_MODEL,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.t_end > 0.0 && self.t_end < self.t_start) {
            return bad(format!("need 0 < t_end < t_start, got {} and {}", self.t_end, self.t_start));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.selected == 0 {
            return bad("learning rate, batch size and selected count must be positive".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("validation fraction {} outside (0, 1)", self.val_fraction));
        }
        Ok(())
    }
}

/// `T(e) = T₀ (T_end/T₀)^(e/(epochs−1))`; a single-epoch run stays at `T₀`.
pub fn anneal_temperature(epoch: f64, cfg: &TrainConfig) -> f64 {
    if cfg.epochs < 2 {
        return cfg.t_start;
    }
    let last = (cfg.epochs - 1) as f64;
    if epoch >= last {
        return cfg.t_end;
    }
    if epoch <= 0.0 {
        return cfg.t_start;
    }
    cfg.t_start * (cfg.t_end / cfg.t_start).powf(epoch / last)
}

/// Per-epoch losses; validation loss uses the deterministic selector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub temperature: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// A trained model with the Z-score statistics of its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedCae {
    pub model: CaeModel,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub config: TrainConfig,
    pub history: TrainHistory,
}

impl TrainedCae {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Deterministic reconstruction of raw spectra, in Z-score units.
    pub fn reconstruct_standardized(&self, pixels: &[Vec<f64>]) -> Result<Vec<f64>> {
        let flat: Vec<f64> = pixels.iter().flat_map(|p| self.standardize(p)).collect();
        self.model.forward(&flat, None, false)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        if m.input_mean.len() != m.model.d() || m.input_std.len() != m.model.d() {
            return Err(Error::format(path, "normalization length does not match model"));
        }
        Ok(m)
    }
}

fn flatten(rows: &[Vec<f64>], idx: &[usize], d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        out.extend_from_slice(&rows[i]);
    }
    out
}

/// Trains one concrete autoencoder on `pixels` (`n × d`).
///
/// Inputs are Z-scored per band, shuffled and split into training and
/// validation sets. Each epoch reshuffles the training set, anneals the
/// temperature and draws fresh Gumbel noise for every example.
pub fn train(pixels: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainedCae> {
    cfg.validate()?;
    let n = pixels.len();
    if n < MIN_PIXELS {
        return Err(Error::Data(format!("{n} pixels, need at least {MIN_PIXELS}")));
    }
    let d = pixels[0].len();
    if pixels.iter().any(|p| p.len() != d) {
        return Err(Error::Shape("pixels differ in band count".into()));
    }
    if pixels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite training input".into()));
    }
    let mut rows = pixels.to_vec();
    let (input_mean, input_std) = zscore_columns(&mut rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64) * cfg.val_fraction).round() as usize;
    let n_val = n_val.clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val = flatten(&rows, val_idx, d);
    let mut train_idx = train_idx.to_vec();

    let mut model = CaeModel::init(d, cfg.selected, HIDDEN_UNITS, cfg.leaky_slope, cfg.t_start, &mut rng)?;
    let mut adam = AdamState::new(model.param_count());
    let mut params = model.params();
    let mut history = TrainHistory::default();
    let k = cfg.selected;
    let mut noise = vec![0.0; cfg.batch_size.min(train_idx.len()) * k * d];

    for epoch in 0..cfg.epochs {
        let t = anneal_temperature(epoch as f64, cfg);
        model.selector.temperature = t;
        train_idx.shuffle(&mut rng);
        let mut sse = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch = flatten(&rows, chunk, d);
            let g = &mut noise[..chunk.len() * k * d];
            fill_gumbel(g, &mut rng);
            let (loss, grad) = model.loss_and_grad(&batch, Some(g))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training loss diverged at epoch {epoch}")));
            }
            sse += loss * chunk.len() as f64;
            adam_step(&mut adam, &mut params, &grad, cfg.learning_rate)?;
            model.set_params(&params)?;
        }
        history.temperature.push(t);
        history.train_loss.push(sse / train_idx.len() as f64);
        history.val_loss.push(super::mse_loss(&model.forward(&val, None, false)?, &val)?);
    }
    Ok(TrainedCae {
        model,
        input_mean,
        input_std,
        config: cfg.clone(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_are_exact() {
        let cfg = TrainConfig::default();
        assert_eq!(anneal_temperature(0.0, &cfg), 10.0);
        assert_eq!(anneal_temperature(149.0, &cfg), 0.1);
        assert!((anneal_temperature(74.5, &cfg) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_decreasing() {
        let cfg = TrainConfig::default();
        let t: Vec<f64> = (0..150).map(|e| anneal_temperature(e as f64, &cfg)).collect();
        assert!(t.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn config_checks() {
        let mut cfg = TrainConfig::default();
        cfg.t_end = 20.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn too_few_pixels() {
        let px = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; 9];
        assert!(matches!(train(&px, &TrainConfig::default()), Err(Error::Data(_))));
    }

    fn toy(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let a = (i as f64 * 0.61).sin();
                let b = (i as f64 * 0.23).cos();
                (0..12).map(|j| a * (j as f64 * 0.3).cos() + b * (j as f64 * 0.2).sin()).collect()
            })
            .collect()
    }

    #[test]
    fn seeded_training_is_bit_identical() {
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 16,
            seed: 4,
            ..TrainConfig::default()
        };
        let px = toy(60);
        let a = train(&px, &cfg).unwrap();
        let b = train(&px, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.val_loss.len(), 5);
    }

    #[test]
    fn validation_loss_falls() {
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 16,
            learning_rate: 0.01,
            seed: 1,
            ..TrainConfig::default()
        };
        let m = train(&toy(200), &cfg).unwrap();
        let h = &m.history.val_loss;
        assert!(h[h.len() - 1] < h[0], "{h:?}");
    }

    #[test]
    fn model_file_round_trip() {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let m = train(&toy(30), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(TrainedCae::load(&p).unwrap(), m);
    }
}
