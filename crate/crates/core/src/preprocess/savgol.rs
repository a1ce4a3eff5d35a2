//! Savitzky–Golay smoothing and differentiation along the spectral axis.
//!
//! Each band gets its own local least-squares polynomial fit in true
//! wavelength units, so non-uniform grids are handled exactly. Near the
//! ends the window is truncated, but never below `polyorder + 1` points.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{HyperCube, Quantity, WavelengthGrid};

/// Per-band convolution weights.
#[derive(Debug, Clone)]
pub struct SgFilter {
    taps: Vec<(usize, Vec<f64>)>,
}

/// Wavelength-dependent window: bands below `below_nm` use `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRegion {
    pub below_nm: f64,
    pub window: usize,
}

fn check(window: usize, polyorder: usize, bands: usize) -> Result<()> {
    if window.is_multiple_of(2) || window <= polyorder || window > bands {
        return Err(Error::Parameter(format!(
            "Savitzky-Golay window {window} must be odd, > polyorder {polyorder} and <= {bands} bands"
        )));
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl SgFilter {
    pub fn new(grid: &WavelengthGrid, window: usize, polyorder: usize, deriv: usize) -> Result<Self> {
        Self::with_windows(grid, &vec![window; grid.len()], polyorder, deriv)
    }

    /// Window chosen per band from `regions` (first match), else `default`.
    pub fn regional(
        grid: &WavelengthGrid,
        default: usize,
        regions: &[WindowRegion],
        polyorder: usize,
        deriv: usize,
    ) -> Result<Self> {
        let windows: Vec<usize> = grid
            .as_slice()
            .iter()
            .map(|w| regions.iter().find(|r| *w < r.below_nm).map_or(default, |r| r.window))
            .collect();
        Self::with_windows(grid, &windows, polyorder, deriv)
    }

    fn with_windows(grid: &WavelengthGrid, windows: &[usize], polyorder: usize, deriv: usize) -> Result<Self> {
        let n = grid.len();
        if deriv > polyorder {
            return Err(Error::Parameter(format!("derivative order {deriv} exceeds polyorder {polyorder}")));
        }
        let wl = grid.as_slice();
        let mut taps = Vec::with_capacity(n);
        for (i, &window) in windows.iter().enumerate() {
            check(window, polyorder, n)?;
            let h = window / 2;
            let mut a = i.saturating_sub(h);
            let mut b = (i + h).min(n - 1);
            if b - a < polyorder {
                if a == 0 {
                    b = polyorder.min(n - 1);
                } else {
                    a = n - 1 - polyorder;
                }
            }
            let scale = (wl[b] - wl[a]).max(f64::EPSILON) / 2.0;
            let len = b - a + 1;
            let v = DMatrix::from_fn(len, polyorder + 1, |r, c| ((wl[a + r] - wl[i]) / scale).powi(c as i32));
            let pinv = v
                .svd(true, true)
                .pseudo_inverse(1e-13)
                .map_err(|e| Error::Numeric(e.to_string()))?;
            let k = factorial(deriv) / scale.powi(deriv as i32);
            let w: Vec<f64> = (0..len).map(|j| k * pinv[(deriv, j)]).collect();
            taps.push((a, w));
        }
        Ok(Self { taps })
    }

    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        for (o, (start, w)) in out.iter_mut().zip(&self.taps) {
            *o = w.iter().zip(&spectrum[*start..]).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_cube(&self, cube: &HyperCube, quantity: Quantity, step: String) -> Result<HyperCube> {
        let data = cube.map_spectra(cube.bands(), |_, s, out| self.apply(s, out));
        cube.derive(cube.grid().clone(), data, cube.mask().to_vec(), quantity, step)
    }
}

/// Per-pixel Savitzky–Golay smoothing with a uniform window.
pub fn smooth_spectra(cube: &HyperCube, window: usize, polyorder: usize) -> Result<HyperCube> {
    let f = SgFilter::new(cube.grid(), window, polyorder, 0)?;
    f.apply_cube(cube, cube.quantity(), format!("smooth_spectra({window},{polyorder})"))
}

/// Smoothing with a wavelength-dependent window table.
pub fn smooth_spectra_regional(
    cube: &HyperCube,
    default_window: usize,
    regions: &[WindowRegion],
    polyorder: usize,
) -> Result<HyperCube> {
    let f = SgFilter::regional(cube.grid(), default_window, regions, polyorder, 0)?;
    f.apply_cube(
        cube,
        cube.quantity(),
        format!("smooth_spectra({default_window},{polyorder},regional)"),
    )
}

/// Savitzky–Golay derivative along the spectral axis, per nm.
pub(crate) fn derivative(cube: &HyperCube, order: usize, window: usize, polyorder: usize) -> Result<HyperCube> {
    let quantity = match order {
        1 => Quantity::FirstDerivative,
        2 => Quantity::SecondDerivative,
        _ => return Err(Error::Parameter(format!("derivative order {order} not in {{1, 2}}"))),
    };
    let f = SgFilter::new(cube.grid(), window, polyorder, order)?;
    f.apply_cube(cube, quantity, format!("spectral_derivative({order},{window},{polyorder})"))
}
