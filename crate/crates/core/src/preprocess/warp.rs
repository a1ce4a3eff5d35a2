//! Inverse-mapped resampling of 2-D maps under an affine transform.

use super::affine::AffineTransform2D;
use crate::error::Result;
use crate::spectral::{LabelMap, ScalarMap};

/// Bilinear resampling of a scalar map. Each output pixel samples the input
/// at `T⁻¹(col, row)`; samples touching masked or out-of-bounds pixels
/// with non-zero weight become masked.
pub fn warp_scalar(map: &ScalarMap, t: &AffineTransform2D) -> Result<ScalarMap> {
    if t.is_identity() {
        return Ok(map.clone());
    }
    let inv = t.inverse()?;
    let (rows, cols) = (map.rows(), map.cols());
    let mut values = vec![f64::NAN; rows * cols];
    let mut mask = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = inv.apply(c as f64, r as f64);
            if let Some(v) = bilinear(map, x, y) {
                values[r * cols + c] = v;
                mask[r * cols + c] = true;
            }
        }
    }
    ScalarMap::new(rows, cols, values, mask, map.name(), map.units())
}

/// Coordinates within this distance of a pixel center snap onto it, so
/// round-off in `T⁻¹` does not drag in neighbors with ~1e-16 weight.
const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

fn bilinear(map: &ScalarMap, x: f64, y: f64) -> Option<f64> {
    let (rows, cols) = (map.rows() as isize, map.cols() as isize);
    let (x, y) = (snap(x), snap(y));
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let mut acc = 0.0;
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let (rr, cc) = (y0 + dy, x0 + dx);
            if rr < 0 || cc < 0 || rr >= rows || cc >= cols {
                return None;
            }
            let v = map.get(rr as usize, cc as usize)?;
            acc += w * v;
        }
    }
    Some(acc)
}

/// Nearest-neighbor resampling of a label map.
pub fn warp_labels(map: &LabelMap, t: &AffineTransform2D) -> Result<LabelMap> {
    if t.is_identity() {
        return Ok(map.clone());
    }
    let inv = t.inverse()?;
    let (rows, cols) = (map.rows(), map.cols());
    let mut labels = vec![0u16; rows * cols];
    let mut mask = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = inv.apply(c as f64, r as f64);
            let (xr, yr) = (x.round(), y.round());
            if xr < 0.0 || yr < 0.0 || xr >= cols as f64 || yr >= rows as f64 {
                continue;
            }
            if let Some(l) = map.get(yr as usize, xr as usize) {
                labels[r * cols + c] = l;
                mask[r * cols + c] = true;
            }
        }
    }
    LabelMap::new(rows, cols, labels, mask, map.k())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: usize) -> ScalarMap {
        // asymmetric: value encodes position
        let v = (0..n * n).map(|i| (i / n) as f64 * 10.0 + (i % n) as f64 * 0.7 + 1.0).collect();
        ScalarMap::from_values(n, n, v, "p").unwrap()
    }

    #[test]
    fn identity_is_bit_equal() {
        let m = pattern(6);
        assert_eq!(warp_scalar(&m, &AffineTransform2D::identity()).unwrap(), m);
    }

    #[test]
    fn integer_shift_moves_delta() {
        let mut v = vec![0.0; 49];
        v[2 * 7 + 3] = 1.0;
        let m = ScalarMap::from_values(7, 7, v, "d").unwrap();
        let w = warp_scalar(&m, &AffineTransform2D::translation(2.0, 1.0)).unwrap();
        assert_eq!(w.get(3, 5), Some(1.0));
        let total: f64 = w.valid_values().iter().sum();
        assert_eq!(total, 1.0);
        // columns 0..2 and row 0 have no source
        assert_eq!(w.get(0, 4), None);
        assert_eq!(w.get(4, 1), None);
    }

    #[test]
    fn rotation_90_matches_index_remap() {
        let n = 5;
        let m = pattern(n);
        let c = (n as f64 - 1.0) / 2.0;
        let t = AffineTransform2D::rotation_about(90.0, c, c, 0.0, 0.0);
        let w = warp_scalar(&m, &t).unwrap();
        // brute force: output (r, c) came from source T^-1(c, r) = (x=r, y=n-1-c)
        for r in 0..n {
            for col in 0..n {
                let want = m.get(n - 1 - col, r).unwrap();
                let got = w.get(r, col).unwrap();
                assert!((got - want).abs() < 1e-9, "({r},{col}) {got} vs {want}");
            }
        }
        let labels = LabelMap::new(n, n, (0..n * n).map(|i| (i % 3) as u16).collect(), vec![true; n * n], 3).unwrap();
        let wl = warp_labels(&labels, &t).unwrap();
        for r in 0..n {
            for col in 0..n {
                assert_eq!(wl.get(r, col), labels.get(n - 1 - col, r));
            }
        }
    }
}
