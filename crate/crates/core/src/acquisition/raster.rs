use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traversal {
    /// Rows alternate direction: even rows left→right, odd rows right→left.
    Serpentine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPosition {
    pub x_mm: f64,
    pub y_mm: f64,
    pub row: usize,
    pub col: usize,
}

/// Gantry raster plan: the scanned rectangle decomposed into spot positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterPlan {
    pub origin_mm: (f64, f64),
    pub width_mm: f64,
    pub height_mm: f64,
    pub spot_mm: f64,
    pub overlap: f64,
    pub dwell_s: f64,
    pub step_mm: f64,
    pub nx: usize,
    pub ny: usize,
    pub order: Traversal,
    pub positions: Vec<ScanPosition>,
}

fn axis_count(extent: f64, spot: f64, step: f64) -> usize {
    if spot >= extent {
        1
    } else {
        // guard against 9.0 / 0.9 = 10.000000000000002
        ((extent / step) - 1e-9).ceil().max(1.0) as usize
    }
}

fn axis_coord(origin: f64, extent: f64, spot: f64, step: f64, n: usize, i: usize) -> f64 {
    if n == 1 && spot >= extent {
        origin + extent / 2.0
    } else {
        origin + spot / 2.0 + step * i as f64
    }
}

/// Serpentine raster over a `width × height` mm region.
pub fn plan_raster(
    origin_mm: (f64, f64),
    width_mm: f64,
    height_mm: f64,
    spot_mm: f64,
    overlap: f64,
    dwell_s: f64,
) -> Result<RasterPlan> {
    for (name, v) in [("width", width_mm), ("height", height_mm), ("spot", spot_mm), ("dwell", dwell_s)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(0.0..0.5).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap {overlap} outside [0, 0.5)")));
    }
    let step = spot_mm * (1.0 - overlap);
    let nx = axis_count(width_mm, spot_mm, step);
    let ny = axis_count(height_mm, spot_mm, step);
    let mut positions = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let y = axis_coord(origin_mm.1, height_mm, spot_mm, step, ny, row);
        for k in 0..nx {
            let col = if row % 2 == 0 { k } else { nx - 1 - k };
            let x = axis_coord(origin_mm.0, width_mm, spot_mm, step, nx, col);
            positions.push(ScanPosition { x_mm: x, y_mm: y, row, col });
        }
    }
    Ok(RasterPlan {
        origin_mm,
        width_mm,
        height_mm,
        spot_mm,
        overlap,
        dwell_s,
        step_mm: step,
        nx,
        ny,
        order: Traversal::Serpentine,
        positions,
    })
}

impl RasterPlan {
    /// Plan whose lattice is exactly `rows × cols` spots.
    pub fn for_grid(rows: usize, cols: usize, spot_mm: f64, overlap: f64, dwell_s: f64) -> Result<Self> {
        let step = spot_mm * (1.0 - overlap);
        // half a step of slack keeps the ceil on the intended count
        let w = step * (cols as f64 - 0.5);
        let h = step * (rows as f64 - 0.5);
        let plan = plan_raster((0.0, 0.0), w.max(spot_mm * 0.5), h.max(spot_mm * 0.5), spot_mm, overlap, dwell_s)?;
        if plan.nx != cols || plan.ny != rows {
            return Err(Error::Parameter(format!(
                "cannot build a {rows}x{cols} raster with spot {spot_mm} mm and overlap {overlap}"
            )));
        }
        Ok(plan)
    }

    /// Dwell midpoint (s from scan start) of the position at `index` in
    /// traversal order.
    pub fn dwell_midpoint(&self, index: usize) -> f64 {
        (index as f64 + 0.5) * self.dwell_s
    }

    pub fn duration_s(&self) -> f64 {
        self.positions.len() as f64 * self.dwell_s
    }

    /// Dwell midpoint for every pixel, indexed row-major.
    pub fn pixel_times(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.nx * self.ny];
        for (k, p) in self.positions.iter().enumerate() {
            t[p.row * self.nx + p.col] = self.dwell_midpoint(k);
        }
        t
    }
}
