use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instrument envelope for band centers, in nm.
pub const ENVELOPE_NM: (f64, f64) = (350.0, 2500.0);

/// Ordered band-center wavelengths (nm) of a cube's spectral axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WavelengthGrid(Vec<f64>);

impl WavelengthGrid {
    pub fn new(wavelengths_nm: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.is_empty() {
            return Err(Error::Range("wavelength grid is empty".into()));
        }
        for (i, &w) in wavelengths_nm.iter().enumerate() {
            if !w.is_finite() || w < ENVELOPE_NM.0 || w > ENVELOPE_NM.1 {
                return Err(Error::Range(format!(
                    "band {i} at {w} nm outside [{}, {}] nm",
                    ENVELOPE_NM.0, ENVELOPE_NM.1
                )));
            }
        }
        if let Some(i) = wavelengths_nm.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::Range(format!(
                "wavelengths not strictly increasing at band {}",
                i + 1
            )));
        }
        Ok(Self(wavelengths_nm))
    }

    /// `n` evenly spaced centers from `start` to `end` inclusive.
    pub fn linspace(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter("linspace needs at least 2 points".into()));
        }
        let step = (end - start) / (n - 1) as f64;
        let mut w: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
        w[n - 1] = end;
        Self::new(w)
    }

    /// Centers `start, start + step, ...` up to and including `end` (within
    /// a small tolerance).
    pub fn stepped(start: f64, end: f64, step: f64) -> Result<Self> {
        if step <= 0.0 || end <= start {
            return Err(Error::Parameter(format!(
                "invalid stepped grid {start}..{end} by {step}"
            )));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| start + step * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Indices of bands whose centers lie in `[lo, hi]`.
    pub fn indices_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.0.partition_point(|&w| w < lo);
        let end = self.0.partition_point(|&w| w <= hi);
        start..end.max(start)
    }

    /// Index of the band center closest to `nm` (lower index on ties).
    pub fn nearest(&self, nm: f64) -> usize {
        let i = self.0.partition_point(|&w| w < nm);
        if i == 0 {
            0
        } else if i == self.0.len() {
            i - 1
        } else if (self.0[i] - nm) < (nm - self.0[i - 1]) {
            i
        } else {
            i - 1
        }
    }

    /// Spacing between `index` and its closest neighbor band.
    pub fn local_step(&self, index: usize) -> f64 {
        let w = &self.0;
        if w.len() < 2 {
            return f64::INFINITY;
        }
        let left = if index > 0 { w[index] - w[index - 1] } else { f64::INFINITY };
        let right = if index + 1 < w.len() { w[index + 1] - w[index] } else { f64::INFINITY };
        left.min(right)
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.0[i]).collect())
    }
}

impl TryFrom<Vec<f64>> for WavelengthGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WavelengthGrid> for Vec<f64> {
    fn from(g: WavelengthGrid) -> Self {
        g.0
    }
}
