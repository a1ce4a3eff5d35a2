use crate::error::{Error, Result};

/// Label value stored for masked pixels.
pub const LABEL_MASKED: u16 = u16::MAX;

/// Per-pixel real-valued map (DTWI, StO2, speckle contrast, perfusion).
///
/// Masked pixels always hold NaN; unmasked pixels are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    name: String,
    units: String,
}

impl ScalarMap {
    /// Builds a map; non-finite values become masked.
    pub fn new(
        rows: usize,
        cols: usize,
        mut values: Vec<f64>,
        mut mask: Vec<bool>,
        name: impl Into<String>,
        units: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != rows * cols || mask.len() != rows * cols {
            return Err(Error::Shape(format!(
                "scalar map {rows}x{cols} given {} values and {} mask entries",
                values.len(),
                mask.len()
            )));
        }
        for (v, m) in values.iter_mut().zip(mask.iter_mut()) {
            if !v.is_finite() {
                *m = false;
            }
            if !*m {
                *v = f64::NAN;
            }
        }
        Ok(Self {
            rows,
            cols,
            values,
            mask,
            name: name.into(),
            units: units.into(),
        })
    }

    /// All-tissue map from values (non-finite entries become masked).
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        Self::new(rows, cols, values, vec![true; rows * cols], name, "")
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

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols + col;
        self.mask[i].then(|| self.values[i])
    }

    /// Unmasked values in pixel order.
    pub fn valid_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn map_values(&self, name: impl Into<String>, units: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(v, m)| if *m { f(*v) } else { f64::NAN })
            .collect();
        Self::new(self.rows, self.cols, values, self.mask.clone(), name, units)
    }
}

/// Per-pixel cluster / class labels in `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<u16>,
    mask: Vec<bool>,
    k: u16,
}

impl LabelMap {
    pub fn new(rows: usize, cols: usize, mut labels: Vec<u16>, mask: Vec<bool>, k: u16) -> Result<Self> {
        if labels.len() != rows * cols || mask.len() != rows * cols {
            return Err(Error::Shape(format!(
                "label map {rows}x{cols} given {} labels and {} mask entries",
                labels.len(),
                mask.len()
            )));
        }
        if k == 0 || k == LABEL_MASKED {
            return Err(Error::Parameter(format!("invalid class count {k}")));
        }
        for (i, (l, m)) in labels.iter_mut().zip(&mask).enumerate() {
            if *m {
                if *l >= k {
                    return Err(Error::Data(format!("label {l} at pixel {i} not below k = {k}")));
                }
            } else {
                *l = LABEL_MASKED;
            }
        }
        Ok(Self {
            rows,
            cols,
            labels,
            mask,
            k,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u16> {
        let i = row * self.cols + col;
        self.mask[i].then(|| self.labels[i])
    }

    /// Pixel counts per class over unmasked pixels.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.k as usize];
        for (l, m) in self.labels.iter().zip(&self.mask) {
            if *m {
                h[*l as usize] += 1;
            }
        }
        h
    }

    pub fn with_mask(&self, mask: &[bool]) -> Result<Self> {
        let m: Vec<bool> = self.mask.iter().zip(mask).map(|(a, b)| *a && *b).collect();
        Self::new(self.rows, self.cols, self.labels.clone(), m, self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_scalar_pixels_hold_nan() {
        let m = ScalarMap::new(1, 3, vec![1.0, 0.0, f64::INFINITY], vec![true, false, true], "x", "").unwrap();
        assert_eq!(m.values()[0], 1.0);
        assert!(m.values()[1].is_nan());
        assert!(!m.mask()[2]);
        assert_eq!(m.valid_values(), vec![1.0]);
    }

    #[test]
    fn labels_must_be_below_k() {
        assert!(LabelMap::new(1, 2, vec![0, 4], vec![true, true], 4).is_err());
        let l = LabelMap::new(1, 2, vec![0, 4], vec![true, false], 4).unwrap();
        assert_eq!(l.labels()[1], LABEL_MASKED);
        assert_eq!(l.histogram(), vec![1, 0, 0, 0]);
    }
}
