//! Per-pixel physiological parameters from calibrated cubes: absorbance,
//! the deep-tissue water index, oxygen saturation and spectral derivatives.

mod extinction;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use extinction::ExtinctionTable;

use crate::error::{Error, Result};
use crate::preprocess::sg_derivative;
use crate::spectral::{HyperCube, LabelMap, Quantity, ScalarMap};

/// Reflectance floor applied before taking the logarithm.
pub const ABSORBANCE_FLOOR: f64 = 1e-6;

/// `A = −log10(max(R, 1e-6))`.
pub fn absorbance(cube: &HyperCube) -> Result<HyperCube> {
    if cube.quantity() != Quantity::Reflectance {
        return Err(Error::Data(format!(
            "absorbance needs reflectance, got {}",
            cube.quantity().as_str()
        )));
    }
    let data = cube.data().iter().map(|r| -r.max(ABSORBANCE_FLOOR).log10()).collect();
    cube.derive(cube.grid().clone(), data, cube.mask().to_vec(), Quantity::Absorbance, "absorbance")
}

/// Band windows and normalization anchors of the deep-tissue water index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwiParams {
    pub numerator_nm: (f64, f64),
    pub denominator_nm: (f64, f64),
    /// Ratio mapped to 1 (unburned anchor).
    pub s1: f64,
    /// Ratio mapped to 0 (full-thickness anchor).
    pub s2: f64,
}

impl DtwiParams {
    pub fn new(s1: f64, s2: f64) -> Result<Self> {
        let p = Self {
            numerator_nm: (1150.0, 1230.0),
            denominator_nm: (1250.0, 1350.0),
            s1,
            s2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s1 > self.s2) || !self.s1.is_finite() || !self.s2.is_finite() {
            return Err(Error::Parameter(format!(
                "DTWI anchors need s1 > s2, got s1 = {}, s2 = {}",
                self.s1, self.s2
            )));
        }
        Ok(())
    }

    /// `(r − s2) / (s1 − s2)` clipped to `[0, 1]`.
    pub fn normalize(&self, ratio: f64) -> f64 {
        ((ratio - self.s2) / (self.s1 - self.s2)).clamp(0.0, 1.0)
    }
}

fn window_mean(spectrum: &[f64], range: &std::ops::Range<usize>) -> f64 {
    spectrum[range.clone()].iter().sum::<f64>() / range.len() as f64
}

fn window_bands(cube: &HyperCube, (lo, hi): (f64, f64)) -> Result<std::ops::Range<usize>> {
    let g = cube.grid();
    if lo < g.first() || hi > g.last() {
        return Err(Error::Range(format!(
            "window {lo}-{hi} nm outside grid {}-{} nm",
            g.first(),
            g.last()
        )));
    }
    let r = g.indices_in(lo, hi);
    if r.is_empty() {
        return Err(Error::Range(format!("no bands in {lo}-{hi} nm")));
    }
    Ok(r)
}

/// Raw band ratio `mean A[numerator] / mean A[denominator]`. Pixels whose
/// denominator mean is below 1e-9 are masked.
pub fn dtwi_ratio(cube: &HyperCube, params: &DtwiParams) -> Result<ScalarMap> {
    if cube.quantity() != Quantity::Absorbance {
        return Err(Error::Data("DTWI needs an absorbance cube".into()));
    }
    let num = window_bands(cube, params.numerator_nm)?;
    let den = window_bands(cube, params.denominator_nm)?;
    let mut mask = cube.mask().to_vec();
    let values = (0..cube.pixels())
        .map(|p| {
            let s = cube.spectrum(p);
            let d = window_mean(s, &den);
            if d < 1e-9 {
                mask[p] = false;
                f64::NAN
            } else {
                window_mean(s, &num) / d
            }
        })
        .collect();
    ScalarMap::new(cube.rows(), cube.cols(), values, mask, "dtwi_ratio", "")
}

/// Deep-tissue water index, clipped to `[0, 1]`.
pub fn dtwi(cube: &HyperCube, params: &DtwiParams) -> Result<ScalarMap> {
    params.validate()?;
    dtwi_ratio(cube, params)?.map_values("dtwi", "", |r| params.normalize(r))
}

/// Anchors from a labeled reference: `s1` = mean ratio of `high_class`
/// pixels, `s2` = mean ratio of `low_class` pixels.
pub fn calibrate_dtwi(cube: &HyperCube, labels: &LabelMap, high_class: u16, low_class: u16) -> Result<DtwiParams> {
    let mut p = DtwiParams {
        numerator_nm: (1150.0, 1230.0),
        denominator_nm: (1250.0, 1350.0),
        s1: 1.0,
        s2: 0.0,
    };
    let ratio = dtwi_ratio(cube, &p)?;
    let means = class_means(&ratio, labels)?;
    let pick = |c: u16| {
        means
            .get(c as usize)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Data(format!("class {c} has no valid DTWI pixels")))
    };
    p.s1 = pick(high_class)?;
    p.s2 = pick(low_class)?;
    p.validate()?;
    Ok(p)
}

/// Mean of unmasked map values per label class (None for empty classes).
pub fn class_means(map: &ScalarMap, labels: &LabelMap) -> Result<Vec<Option<f64>>> {
    if map.rows() != labels.rows() || map.cols() != labels.cols() {
        return Err(Error::Shape("map and labels differ in size".into()));
    }
    let k = labels.k() as usize;
    let mut sum = vec![0.0; k];
    let mut n = vec![0usize; k];
    for i in 0..map.values().len() {
        if map.mask()[i] && labels.mask()[i] {
            let l = labels.labels()[i] as usize;
            sum[l] += map.values()[i];
            n[l] += 1;
        }
    }
    Ok(sum.iter().zip(&n).map(|(s, c)| (*c > 0).then(|| s / *c as f64)).collect())
}

/// Result of fitting `A ≈ c₁ε_HbO2 + c₂ε_Hb + c₃` at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HemoglobinFit {
    pub oxy: f64,
    pub deoxy: f64,
    pub offset: f64,
}

/// Non-negative (in `c₁, c₂`) least squares with a free flat offset.
/// Solved exactly by enumerating the four active sets.
#[derive(Debug, Clone)]
pub struct HemoglobinSolver {
    bands: std::ops::Range<usize>,
    design: DMatrix<f64>,
    /// Pseudo-inverses for free sets {oxy, deoxy}, {deoxy}, {oxy}, {}.
    pinvs: Vec<(Vec<usize>, DMatrix<f64>)>,
}

impl HemoglobinSolver {
    pub fn new(cube: &HyperCube, table: &ExtinctionTable, window_nm: (f64, f64)) -> Result<Self> {
        let (tlo, thi) = table.range();
        if window_nm.0 < tlo || window_nm.1 > thi {
            return Err(Error::Range(format!(
                "StO2 window {:?} outside extinction table {tlo}-{thi} nm",
                window_nm
            )));
        }
        let bands = window_bands(cube, window_nm)?;
        if bands.len() < 3 {
            return Err(Error::Range(format!("StO2 window {:?} holds fewer than 3 bands", window_nm)));
        }
        let wl = cube.grid().as_slice();
        let eps: Vec<(f64, f64)> = bands.clone().map(|i| table.at(wl[i])).collect();
        let n = eps.len();
        let design = DMatrix::from_fn(n, 3, |r, c| match c {
            0 => eps[r].0,
            1 => eps[r].1,
            _ => 1.0,
        });
        let norms: Vec<f64> = (0..3).map(|c| design.column(c).norm()).collect();
        let scaled = DMatrix::from_fn(n, 3, |r, c| design[(r, c)] / norms[c]);
        let sv = scaled.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-10 * smax) {
            return Err(Error::Numeric(format!(
                "hemoglobin design is rank deficient on {:?} nm",
                window_nm
            )));
        }
        let mut pinvs = Vec::new();
        for free in [vec![0, 1, 2], vec![1, 2], vec![0, 2], vec![2]] {
            let sub = DMatrix::from_fn(n, free.len(), |r, c| scaled[(r, free[c])]);
            let p = sub
                .svd(true, true)
                .pseudo_inverse(1e-14)
                .map_err(|e| Error::Numeric(e.to_string()))?;
            // undo column scaling so the solution is in design units
            let p = DMatrix::from_fn(p.nrows(), p.ncols(), |r, c| p[(r, c)] / norms[free[r]]);
            pinvs.push((free, p));
        }
        Ok(Self { bands, design, pinvs })
    }

    pub fn fit(&self, spectrum: &[f64]) -> HemoglobinFit {
        let y = DVector::from_iterator(self.bands.len(), spectrum[self.bands.clone()].iter().copied());
        let mut best: Option<(f64, [f64; 3])> = None;
        for (free, pinv) in &self.pinvs {
            let sol = pinv * &y;
            let mut c = [0.0; 3];
            for (k, &j) in free.iter().enumerate() {
                c[j] = sol[k];
            }
            if c[0] < 0.0 || c[1] < 0.0 {
                continue;
            }
            let resid = (&self.design * DVector::from_column_slice(&c) - &y).norm_squared();
            if best.is_none_or(|(r, _)| resid < r) {
                best = Some((resid, c));
            }
        }
        // the all-zero hemoglobin set is always feasible
        let c = best.map(|b| b.1).unwrap_or([0.0; 3]);
        HemoglobinFit {
            oxy: c[0],
            deoxy: c[1],
            offset: c[2],
        }
    }
}

/// Tissue oxygen saturation `c₁ / (c₁ + c₂)` from a per-pixel hemoglobin
/// fit over `window_nm`, clipped to `[0, 1]`; pixels with `c₁ + c₂ < 1e-9`
/// are masked.
pub fn sto2(cube: &HyperCube, table: &ExtinctionTable, window_nm: (f64, f64)) -> Result<ScalarMap> {
    if cube.quantity() != Quantity::Absorbance {
        return Err(Error::Data("StO2 needs an absorbance cube".into()));
    }
    let solver = HemoglobinSolver::new(cube, table, window_nm)?;
    let mut mask = cube.mask().to_vec();
    let values = (0..cube.pixels())
        .map(|p| {
            if !mask[p] {
                return f64::NAN;
            }
            let f = solver.fit(cube.spectrum(p));
            let total = f.oxy + f.deoxy;
            if total < 1e-9 {
                mask[p] = false;
                f64::NAN
            } else {
                (f.oxy / total).clamp(0.0, 1.0)
            }
        })
        .collect();
    ScalarMap::new(cube.rows(), cube.cols(), values, mask, "sto2", "fraction")
}

/// Savitzky–Golay derivative (`order` 1 or 2) in units per nm.
pub fn spectral_derivative(cube: &HyperCube, order: usize, window: usize, polyorder: usize) -> Result<HyperCube> {
    if polyorder < order {
        return Err(Error::Parameter(format!("polyorder {polyorder} below derivative order {order}")));
    }
    sg_derivative(cube, order, window, polyorder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{generate_phantom, PhantomSpec};
    use crate::spectral::WavelengthGrid;

    fn refl(values: Vec<f64>) -> HyperCube {
        let g = WavelengthGrid::linspace(500.0, 600.0, values.len()).unwrap();
        HyperCube::new(1, 1, g, values, Quantity::Reflectance).unwrap()
    }

    #[test]
    fn absorbance_anchors() {
        let a = absorbance(&refl(vec![1.0, 0.1, 0.0])).unwrap();
        assert_eq!(a.data()[0], 0.0);
        assert!((a.data()[1] - 1.0).abs() < 1e-15);
        assert!((a.data()[2] - 6.0).abs() < 1e-12);
        assert_eq!(a.quantity(), Quantity::Absorbance);
    }

    /// Absorbance cube whose DTWI windows have means `num` and `den`.
    fn ratio_cube(pairs: &[(f64, f64)]) -> HyperCube {
        let g = WavelengthGrid::stepped(1100.0, 1400.0, 10.0).unwrap();
        let mut data = Vec::new();
        for (num, den) in pairs {
            for &w in g.as_slice() {
                data.push(if (1150.0..=1230.0).contains(&w) {
                    *num
                } else if (1250.0..=1350.0).contains(&w) {
                    *den
                } else {
                    0.7
                });
            }
        }
        HyperCube::new(1, pairs.len(), g, data, Quantity::Absorbance).unwrap()
    }

    #[test]
    fn dtwi_anchor_points() {
        let p = DtwiParams::new(2.5, 1.5).unwrap();
        let c = ratio_cube(&[(2.5, 1.0), (1.5, 1.0), (2.0, 1.0)]);
        let d = dtwi(&c, &p).unwrap();
        assert!((d.values()[0] - 1.0).abs() < 1e-12);
        assert!(d.values()[1].abs() < 1e-12);
        assert!((d.values()[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dtwi_clips_and_masks() {
        let p = DtwiParams::new(2.0, 1.0).unwrap();
        let c = ratio_cube(&[(5.0, 1.0), (0.1, 1.0), (1.0, 0.0)]);
        let d = dtwi(&c, &p).unwrap();
        assert_eq!(d.values()[0], 1.0);
        assert_eq!(d.values()[1], 0.0);
        assert!(!d.mask()[2]);
    }

    #[test]
    fn dtwi_is_scale_invariant() {
        let p = DtwiParams::new(2.0, 1.0).unwrap();
        let c = ratio_cube(&[(1.3, 0.8), (1.7, 1.1)]);
        let scaled = HyperCube::new(1, 2, c.grid().clone(), c.data().iter().map(|v| v * 3.7).collect(), Quantity::Absorbance)
            .unwrap();
        let a = dtwi(&c, &p).unwrap();
        let b = dtwi(&scaled, &p).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn dtwi_window_outside_grid() {
        let g = WavelengthGrid::stepped(400.0, 1200.0, 10.0).unwrap();
        let c = HyperCube::filled(1, 1, g.clone(), &vec![0.5; g.len()], Quantity::Absorbance).unwrap();
        assert!(matches!(dtwi(&c, &DtwiParams::new(2.0, 1.0).unwrap()), Err(Error::Range(_))));
    }

    #[test]
    fn dtwi_anchors_must_be_ordered() {
        assert!(DtwiParams::new(1.0, 2.0).is_err());
    }

    #[test]
    fn phantom_dtwi_orders_classes_by_water() {
        let spec = PhantomSpec::reference(24, 24, 5);
        let g = WavelengthGrid::stepped(400.0, 2100.0, 5.0).unwrap();
        let (cube, labels) = generate_phantom(&spec, &g).unwrap();
        let a = absorbance(&cube).unwrap();
        let p = calibrate_dtwi(&a, &labels, 0, 3).unwrap();
        let means = class_means(&dtwi(&a, &p).unwrap(), &labels).unwrap();
        let m: Vec<f64> = means.into_iter().map(|x| x.unwrap()).collect();
        assert!(m[0] > m[1] && m[1] > m[2] && m[2] > m[3], "{m:?}");
    }

    fn forward(table: &ExtinctionTable, g: &WavelengthGrid, oxy: f64, deoxy: f64, off: f64) -> Vec<f64> {
        g.as_slice()
            .iter()
            .map(|w| {
                let (e1, e2) = table.at(*w);
                oxy * e1 + deoxy * e2 + off
            })
            .collect()
    }

    fn abs_cube(g: &WavelengthGrid, spectra: Vec<Vec<f64>>) -> HyperCube {
        let n = spectra.len();
        HyperCube::new(1, n, g.clone(), spectra.concat(), Quantity::Absorbance).unwrap()
    }

    #[test]
    fn sto2_pure_and_mixed() {
        let t = ExtinctionTable::builtin();
        let g = WavelengthGrid::stepped(500.0, 800.0, 4.0).unwrap();
        let c = abs_cube(
            &g,
            vec![
                forward(&t, &g, 1e-5, 0.0, 0.0),
                forward(&t, &g, 0.0, 1e-5, 0.0),
                forward(&t, &g, 0.7e-5, 0.3e-5, 0.05),
            ],
        );
        let s = sto2(&c, &t, (500.0, 800.0)).unwrap();
        assert!((s.values()[0] - 1.0).abs() < 1e-9);
        assert!(s.values()[1].abs() < 1e-9);
        assert!((s.values()[2] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn sto2_masks_hemoglobin_free_pixels() {
        let t = ExtinctionTable::builtin();
        let g = WavelengthGrid::stepped(500.0, 800.0, 4.0).unwrap();
        let c = abs_cube(&g, vec![vec![0.3; g.len()]]);
        let s = sto2(&c, &t, (500.0, 800.0)).unwrap();
        assert!(!s.mask()[0]);
    }

    #[test]
    fn sto2_degenerate_table_is_fit_error() {
        let t = ExtinctionTable::new(vec![400.0, 1000.0], vec![1.0, 1.0], vec![2.0, 2.0]).unwrap();
        let g = WavelengthGrid::stepped(500.0, 800.0, 4.0).unwrap();
        let c = abs_cube(&g, vec![vec![0.3; g.len()]]);
        assert!(matches!(sto2(&c, &t, (500.0, 800.0)), Err(Error::Numeric(_))));
    }

    #[test]
    fn sto2_window_checks() {
        let t = ExtinctionTable::builtin();
        let g = WavelengthGrid::stepped(500.0, 800.0, 4.0).unwrap();
        let c = abs_cube(&g, vec![vec![0.3; g.len()]]);
        assert!(matches!(sto2(&c, &t, (420.0, 800.0)), Err(Error::Range(_))));
        assert!(matches!(sto2(&c, &t, (600.0, 605.0)), Err(Error::Range(_))));
    }

    #[test]
    fn derivative_of_polynomials() {
        let g = WavelengthGrid::stepped(900.0, 1700.0, 4.0).unwrap();
        let lin: Vec<f64> = g.as_slice().iter().map(|w| 0.002 * w + 0.1).collect();
        let c = HyperCube::filled(1, 1, g.clone(), &lin, Quantity::Absorbance).unwrap();
        let d = spectral_derivative(&c, 1, 9, 2).unwrap();
        assert!(d.data().iter().all(|v| (v - 0.002).abs() < 1e-9));
        let flat = HyperCube::filled(1, 1, g.clone(), &vec![0.4; g.len()], Quantity::Absorbance).unwrap();
        let d0 = spectral_derivative(&flat, 1, 9, 2).unwrap();
        assert!(d0.data().iter().all(|v| v.abs() < 1e-12));
        let a = 3e-6;
        let quad: Vec<f64> = g.as_slice().iter().map(|w| a * w * w).collect();
        let c = HyperCube::filled(1, 1, g.clone(), &quad, Quantity::Absorbance).unwrap();
        let d2 = spectral_derivative(&c, 2, 11, 3).unwrap();
        assert!(d2.data().iter().all(|v| (v - 2.0 * a).abs() < 1e-9), "{:?}", &d2.data()[..3]);
        assert_eq!(d2.quantity(), Quantity::SecondDerivative);
    }

    #[test]
    fn derivative_ignores_added_constant() {
        let g = WavelengthGrid::stepped(900.0, 1300.0, 5.0).unwrap();
        let s: Vec<f64> = g.as_slice().iter().map(|w| (w / 40.0).sin()).collect();
        let s2: Vec<f64> = s.iter().map(|v| v + 2.5).collect();
        let a = spectral_derivative(&HyperCube::filled(1, 1, g.clone(), &s, Quantity::Absorbance).unwrap(), 1, 7, 3).unwrap();
        let b = spectral_derivative(&HyperCube::filled(1, 1, g.clone(), &s2, Quantity::Absorbance).unwrap(), 1, 7, 3).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_order_checks() {
        let g = WavelengthGrid::stepped(900.0, 1300.0, 5.0).unwrap();
        let c = HyperCube::filled(1, 1, g.clone(), &vec![1.0; g.len()], Quantity::Absorbance).unwrap();
        assert!(spectral_derivative(&c, 2, 7, 1).is_err());
        assert!(spectral_derivative(&c, 3, 7, 3).is_err());
    }
}
