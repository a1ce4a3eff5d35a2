use std::path::Path;

use crate::error::{Error, Result};

const BUILTIN_CSV: &str = include_str!("../../assets/extinction_v1.csv");

/// Molar extinction coefficients of oxy- and deoxyhemoglobin (cm⁻¹/M).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionTable {
    wavelengths_nm: Vec<f64>,
    hbo2: Vec<f64>,
    hb: Vec<f64>,
}

impl ExtinctionTable {
    pub fn new(wavelengths_nm: Vec<f64>, hbo2: Vec<f64>, hb: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.len() < 2 || hbo2.len() != wavelengths_nm.len() || hb.len() != wavelengths_nm.len() {
            return Err(Error::Shape("extinction table columns differ in length".into()));
        }
        if wavelengths_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("extinction wavelengths not strictly increasing".into()));
        }
        if hbo2.iter().chain(&hb).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Data("extinction coefficients must be positive".into()));
        }
        Ok(Self {
            wavelengths_nm,
            hbo2,
            hb,
        })
    }

    /// The versioned table shipped with the crate (450–1000 nm).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CSV.as_bytes(), Path::new("extinction_v1.csv")).expect("bundled extinction table is valid")
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, path)
    }

    fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
        let (mut w, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.deserialize::<(f64, f64, f64)>() {
            let (x, y, z) = rec.map_err(|e| Error::format(path, e.to_string()))?;
            w.push(x);
            a.push(y);
            b.push(z);
        }
        Self::new(w, a, b)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelengths_nm[0], self.wavelengths_nm[self.wavelengths_nm.len() - 1])
    }

    /// Linearly interpolated `(ε_HbO2, ε_Hb)` at `nm` (must be in range).
    pub fn at(&self, nm: f64) -> (f64, f64) {
        let w = &self.wavelengths_nm;
        let j = w.partition_point(|&x| x < nm).clamp(1, w.len() - 1);
        let t = (nm - w[j - 1]) / (w[j] - w[j - 1]);
        (
            self.hbo2[j - 1] + t * (self.hbo2[j] - self.hbo2[j - 1]),
            self.hb[j - 1] + t * (self.hb[j] - self.hb[j - 1]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Chromophore;

    #[test]
    fn builtin_covers_visible_nir() {
        let t = ExtinctionTable::builtin();
        let (lo, hi) = t.range();
        assert!(lo <= 500.0 && hi >= 1000.0);
    }

    #[test]
    fn builtin_tracks_phantom_hemoglobin_lobes() {
        let t = ExtinctionTable::builtin();
        for nm in [500.0, 540.0, 576.0, 700.0, 760.0, 900.0] {
            let (o, d) = t.at(nm);
            let want_o = 1e5 * Chromophore::Oxyhemoglobin.absorption(nm) + 50.0;
            let want_d = 1e5 * Chromophore::Deoxyhemoglobin.absorption(nm) + 50.0;
            assert!((o - want_o).abs() < 1e-5 && (d - want_d).abs() < 1e-5, "{nm}");
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(ExtinctionTable::new(vec![500.0, 510.0], vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
