use serde::{Deserialize, Serialize};

use super::grid::WavelengthGrid;
use crate::error::{Error, Result};

/// Physical meaning of the values stored in a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Counts,
    Reflectance,
    Absorbance,
    Normalized,
    FirstDerivative,
    SecondDerivative,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Counts => "counts",
            Quantity::Reflectance => "reflectance",
            Quantity::Absorbance => "absorbance",
            Quantity::Normalized => "normalized",
            Quantity::FirstDerivative => "first_derivative",
            Quantity::SecondDerivative => "second_derivative",
        }
    }
}

/// A rows × cols × bands volume stored band-interleaved-by-pixel.
///
/// Cubes are immutable once built; every operation returns a new cube with
/// the operation name appended to `provenance`. Pixels with `mask == false`
/// keep their values but are skipped by all statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    rows: usize,
    cols: usize,
    grid: WavelengthGrid,
    data: Vec<f64>,
    mask: Vec<bool>,
    quantity: Quantity,
    provenance: Vec<String>,
}

impl HyperCube {
    pub fn new(
        rows: usize,
        cols: usize,
        grid: WavelengthGrid,
        data: Vec<f64>,
        quantity: Quantity,
    ) -> Result<Self> {
        let mask = vec![true; rows * cols];
        Self::with_mask(rows, cols, grid, data, mask, quantity, Vec::new())
    }

    pub fn with_mask(
        rows: usize,
        cols: usize,
        grid: WavelengthGrid,
        data: Vec<f64>,
        mask: Vec<bool>,
        quantity: Quantity,
        provenance: Vec<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("cube dims {rows}x{cols} must be positive")));
        }
        if data.len() != rows * cols * grid.len() {
            return Err(Error::Shape(format!(
                "data length {} != {rows}x{cols}x{}",
                data.len(),
                grid.len()
            )));
        }
        if mask.len() != rows * cols {
            return Err(Error::Shape(format!(
                "mask length {} != {} pixels",
                mask.len(),
                rows * cols
            )));
        }
        if quantity == Quantity::Reflectance {
            if let Some(i) = data.iter().position(|v| *v < 0.0) {
                return Err(Error::Data(format!(
                    "negative reflectance at pixel {} band {}",
                    i / grid.len(),
                    i % grid.len()
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            grid,
            data,
            mask,
            quantity,
            provenance,
        })
    }

    /// Uniform cube where every pixel carries `spectrum`.
    pub fn filled(rows: usize, cols: usize, grid: WavelengthGrid, spectrum: &[f64], quantity: Quantity) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::Shape("spectrum length != grid length".into()));
        }
        let data = spectrum.repeat(rows * cols);
        Self::new(rows, cols, grid, data, quantity)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.grid.len()
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn spectrum(&self, pixel: usize) -> &[f64] {
        let b = self.bands();
        &self.data[pixel * b..(pixel + 1) * b]
    }

    pub fn value(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(row * self.cols + col) * self.bands() + band]
    }

    pub fn is_tissue(&self, pixel: usize) -> bool {
        self.mask[pixel]
    }

    pub fn tissue_pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i)
    }

    pub fn tissue_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Spectra of unmasked pixels as rows of an n × bands matrix.
    pub fn tissue_matrix(&self) -> Vec<Vec<f64>> {
        self.tissue_pixels().map(|p| self.spectrum(p).to_vec()).collect()
    }

    /// Values of one band over unmasked pixels, in pixel order.
    pub fn band_values(&self, band: usize) -> Vec<f64> {
        let b = self.bands();
        self.tissue_pixels().map(|p| self.data[p * b + band]).collect()
    }

    /// Builds a derived cube: same geometry and mask, new spectral axis,
    /// quantity and data, with `step` appended to the provenance.
    pub(crate) fn derive(
        &self,
        grid: WavelengthGrid,
        data: Vec<f64>,
        mask: Vec<bool>,
        quantity: Quantity,
        step: impl Into<String>,
    ) -> Result<Self> {
        let mut provenance = self.provenance.clone();
        provenance.push(step.into());
        Self::with_mask(self.rows, self.cols, grid, data, mask, quantity, provenance)
    }

    /// Applies `f(input_spectrum, output_spectrum)` to every pixel.
    pub(crate) fn map_spectra<F>(&self, out_bands: usize, mut f: F) -> Vec<f64>
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        let mut out = vec![0.0; self.pixels() * out_bands];
        for p in 0..self.pixels() {
            f(p, self.spectrum(p), &mut out[p * out_bands..(p + 1) * out_bands]);
        }
        out
    }

    pub fn with_provenance_step(mut self, step: impl Into<String>) -> Self {
        self.provenance.push(step.into());
        self
    }

    /// Replaces the mask (intersected with nothing; caller decides).
    pub fn with_mask_replaced(&self, mask: Vec<bool>, step: impl Into<String>) -> Result<Self> {
        self.derive(self.grid.clone(), self.data.clone(), mask, self.quantity, step)
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<bool>) {
        (self.data, self.mask)
    }
}
