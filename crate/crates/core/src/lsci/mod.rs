//! Laser speckle contrast analysis and a seeded speckle simulator.

mod io;
mod sim;

pub use io::{read_frame_stack, read_frame_stack_with_header, write_frame_stack, FrameStackHeader};
pub use sim::{simulate_speckle, FlowMap, SpeckleSim};

use crate::error::{Error, Result};
use crate::spectral::ScalarMap;

/// Contrast below which the perfusion index saturates.
pub const K_FLOOR: f64 = 1e-3;

/// `frames × rows × cols` speckle intensities, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frames: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    exposure_s: f64,
    rate_hz: f64,
}

impl FrameStack {
    pub fn new(frames: usize, rows: usize, cols: usize, data: Vec<f64>, exposure_s: f64, rate_hz: f64) -> Result<Self> {
        if frames < 2 {
            return Err(Error::Parameter(format!("a frame stack needs at least 2 frames, got {frames}")));
        }
        if rows == 0 || cols == 0 || data.len() != frames * rows * cols {
            return Err(Error::Shape(format!(
                "{} intensities for {frames}x{rows}x{cols} stack",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Data(format!("speckle intensity {v} is not finite and non-negative")));
        }
        if !(exposure_s > 0.0) || !(rate_hz > 0.0) {
            return Err(Error::Parameter("exposure and frame rate must be positive".into()));
        }
        Ok(Self {
            frames,
            rows,
            cols,
            data,
            exposure_s,
            rate_hz,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn exposure_s(&self) -> f64 {
        self.exposure_s
    }
    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[f * n..(f + 1) * n]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let data = self.data.iter().map(|v| v * c).collect();
        Self::new(self.frames, self.rows, self.cols, data, self.exposure_s, self.rate_hz)
    }
}

/// `K_t = σ_t / ⟨I_t⟩` per pixel with population σ over the frames.
/// Pixels with mean below 1e-9 are masked.
pub fn temporal_contrast(stack: &FrameStack) -> Result<ScalarMap> {
    let n = stack.rows * stack.cols;
    let nf = stack.frames as f64;
    let mut values = vec![f64::NAN; n];
    let mut mask = vec![true; n];
    for p in 0..n {
        let mean = (0..stack.frames).map(|f| stack.data[f * n + p]).sum::<f64>() / nf;
        if mean < 1e-9 {
            mask[p] = false;
            continue;
        }
        let var = (0..stack.frames).map(|f| (stack.data[f * n + p] - mean).powi(2)).sum::<f64>() / nf;
        values[p] = var.sqrt() / mean;
    }
    ScalarMap::new(stack.rows, stack.cols, values, mask, "speckle_contrast_temporal", "")
}

/// Per-frame sliding-window `K_s = σ/μ` (windows shrink at the borders),
/// averaged over frames. Windows with zero mean contribute 0.
pub fn spatial_contrast(stack: &FrameStack, window: usize) -> Result<ScalarMap> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!("window must be odd and >= 3, got {window}")));
    }
    if window > stack.rows || window > stack.cols {
        return Err(Error::Parameter(format!(
            "window {window} larger than {}x{} image",
            stack.rows, stack.cols
        )));
    }
    let (rows, cols) = (stack.rows, stack.cols);
    let h = window / 2;
    let mut acc = vec![0.0; rows * cols];
    for f in 0..stack.frames {
        let img = stack.frame(f);
        for r in 0..rows {
            let (r0, r1) = (r.saturating_sub(h), (r + h).min(rows - 1));
            for c in 0..cols {
                let (c0, c1) = (c.saturating_sub(h), (c + h).min(cols - 1));
                let count = ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
                let mut sum = 0.0;
                for rr in r0..=r1 {
                    sum += img[rr * cols + c0..=rr * cols + c1].iter().sum::<f64>();
                }
                let mean = sum / count;
                if mean <= 0.0 {
                    continue;
                }
                let mut ss = 0.0;
                for rr in r0..=r1 {
                    ss += img[rr * cols + c0..=rr * cols + c1].iter().map(|v| (v - mean).powi(2)).sum::<f64>();
                }
                acc[r * cols + c] += (ss / count).sqrt() / mean;
            }
        }
    }
    let nf = stack.frames as f64;
    let values = acc.into_iter().map(|v| v / nf).collect();
    ScalarMap::new(rows, cols, values, vec![true; rows * cols], "speckle_contrast_spatial", "")
}

/// `1/K²`, saturating at `1/K_FLOOR²` for `K ≤ K_FLOOR`.
pub fn perfusion_value(k: f64) -> f64 {
    let k = if k > K_FLOOR { k } else { K_FLOOR };
    1.0 / (k * k)
}

pub fn perfusion_index(contrast: &ScalarMap) -> Result<ScalarMap> {
    if let Some(k) = contrast.valid_values().into_iter().find(|k| *k < 0.0) {
        return Err(Error::Data(format!("negative speckle contrast {k}")));
    }
    contrast.map_values("perfusion_index", "a.u.", perfusion_value)
}
