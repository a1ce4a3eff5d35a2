use std::path::Path;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `p' = A·p + t` in pixel coordinates (x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform2D {
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

pub type PointPair = ((f64, f64), (f64, f64));

impl AffineTransform2D {
    pub fn new(linear: [[f64; 2]; 2], translation: [f64; 2]) -> Result<Self> {
        let t = Self { linear, translation };
        if !(t.det().abs() > 1e-9) {
            return Err(Error::Numeric(format!("singular affine transform (det {})", t.det())));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [dx, dy],
        }
    }

    /// Rotation by `degrees` about `(cx, cy)` followed by a shift.
    pub fn rotation_about(degrees: f64, cx: f64, cy: f64, dx: f64, dy: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let linear = [[c, -s], [s, c]];
        let tx = cx - (c * cx - s * cy) + dx;
        let ty = cy - (s * cx + c * cy) + dy;
        Self {
            linear,
            translation: [tx, ty],
        }
    }

    pub fn det(&self) -> f64 {
        self.linear[0][0] * self.linear[1][1] - self.linear[0][1] * self.linear[1][0]
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let a = &self.linear;
        (
            a[0][0] * x + a[0][1] * y + self.translation[0],
            a[1][0] * x + a[1][1] * y + self.translation[1],
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = Matrix2::new(self.linear[0][0], self.linear[0][1], self.linear[1][0], self.linear[1][1]);
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Numeric("affine transform is not invertible".into()))?;
        let t = -(inv * nalgebra::Vector2::new(self.translation[0], self.translation[1]));
        Self::new([[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]]], [t[0], t[1]])
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}

/// Least-squares affine map taking `src` points onto `dst` points.
pub fn fit_affine(pairs: &[PointPair]) -> Result<AffineTransform2D> {
    if pairs.len() < 3 {
        return Err(Error::Data(format!("affine fit needs 3 point pairs, got {}", pairs.len())));
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), ((x, y), _)| (a + x / n, b + y / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), _) in pairs {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    // smallest/largest eigenvalue of the 2x2 scatter matrix
    let tr = sxx + syy;
    let disc = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    let (lo, hi) = ((tr - disc) / 2.0, (tr + disc) / 2.0);
    if !(hi > 0.0) || lo <= 1e-10 * hi {
        return Err(Error::Data("degenerate fit: source points are collinear".into()));
    }
    // centered design keeps the solve well conditioned
    let design = DMatrix::from_fn(pairs.len(), 3, |i, j| match j {
        0 => pairs[i].0 .0 - mx,
        1 => pairs[i].0 .1 - my,
        _ => 1.0,
    });
    let rhs = DMatrix::from_fn(pairs.len(), 2, |i, j| if j == 0 { pairs[i].1 .0 } else { pairs[i].1 .1 });
    let sol = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let linear = [[sol[(0, 0)], sol[(1, 0)]], [sol[(0, 1)], sol[(1, 1)]]];
    let translation = [
        sol[(2, 0)] - linear[0][0] * mx - linear[0][1] * my,
        sol[(2, 1)] - linear[1][0] * mx - linear[1][1] * my,
    ];
    AffineTransform2D::new(linear, translation)
}

/// Reads `src_x,src_y,dst_x,dst_y` rows.
pub fn read_point_pairs(path: &Path) -> Result<Vec<PointPair>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.deserialize::<(f64, f64, f64, f64)>() {
        let (sx, sy, dx, dy) = rec.map_err(|e| Error::format(path, e.to_string()))?;
        out.push(((sx, sy), (dx, dy)));
    }
    Ok(out)
}
