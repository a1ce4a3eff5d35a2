//! Spectral-axis operations: resampling, dual-spectrometer merge, cropping.

use super::cube::HyperCube;
use super::grid::WavelengthGrid;
use crate::error::{Error, Result};

/// Modeling range shared by both spectrometers (nm).
pub const MERGED_RANGE_NM: (f64, f64) = (400.0, 2100.0);

/// Per-pixel linear interpolation onto `target`.
pub fn resample_to_grid(cube: &HyperCube, target: &WavelengthGrid) -> Result<HyperCube> {
    let src = cube.grid().as_slice();
    if target.first() < src[0] || target.last() > src[src.len() - 1] {
        return Err(Error::Range(format!(
            "target {}..{} nm extends beyond source {}..{} nm",
            target.first(),
            target.last(),
            src[0],
            src[src.len() - 1]
        )));
    }
    // (left index, fraction); fraction None means an exact hit.
    let plan: Vec<(usize, Option<f64>)> = target
        .as_slice()
        .iter()
        .map(|&w| {
            let j = src.partition_point(|&s| s < w);
            if j < src.len() && src[j] == w {
                (j, None)
            } else {
                let lo = j - 1;
                (lo, Some((w - src[lo]) / (src[lo + 1] - src[lo])))
            }
        })
        .collect();
    let data = cube.map_spectra(target.len(), |_, s, out| {
        for (o, &(j, t)) in out.iter_mut().zip(&plan) {
            *o = match t {
                None => s[j],
                Some(t) => s[j] + t * (s[j + 1] - s[j]),
            };
        }
    });
    cube.derive(
        target.clone(),
        data,
        cube.mask().to_vec(),
        cube.quantity(),
        "resample_to_grid",
    )
}

/// Joins VNIR and SWIR cubes of the same scene onto one spectral axis.
///
/// VNIR bands at or above the first SWIR center are dropped, so SWIR wins
/// in any overlap. The result is restricted to [`MERGED_RANGE_NM`].
pub fn merge_cubes(vnir: &HyperCube, swir: &HyperCube) -> Result<HyperCube> {
    if vnir.rows() != swir.rows() || vnir.cols() != swir.cols() {
        return Err(Error::Shape(format!(
            "VNIR {}x{} vs SWIR {}x{}",
            vnir.rows(),
            vnir.cols(),
            swir.rows(),
            swir.cols()
        )));
    }
    if vnir.mask() != swir.mask() {
        return Err(Error::Shape("VNIR and SWIR masks differ".into()));
    }
    if vnir.quantity() != swir.quantity() {
        return Err(Error::Data(format!(
            "cannot merge {} with {}",
            vnir.quantity().as_str(),
            swir.quantity().as_str()
        )));
    }
    let vg = vnir.grid().as_slice();
    let sg = swir.grid().as_slice();
    if vg[0] >= sg[0] {
        return Err(Error::Range("VNIR grid must start below the SWIR grid".into()));
    }
    let seam_gap = sg[0] - vg[vg.len() - 1];
    if seam_gap > 0.0 {
        let tol = 2.0 * vnir.grid().local_step(vg.len() - 1).max(swir.grid().local_step(0));
        if seam_gap > tol {
            return Err(Error::Range(format!(
                "gap of {seam_gap} nm between VNIR and SWIR grids"
            )));
        }
    }
    let (lo, hi) = MERGED_RANGE_NM;
    let v_idx: Vec<usize> = (0..vg.len()).filter(|&i| vg[i] >= lo && vg[i] < sg[0]).collect();
    let s_idx: Vec<usize> = (0..sg.len()).filter(|&i| sg[i] >= lo && sg[i] <= hi).collect();
    let mut wl: Vec<f64> = v_idx.iter().map(|&i| vg[i]).collect();
    wl.extend(s_idx.iter().map(|&i| sg[i]));
    let grid = WavelengthGrid::new(wl)?;
    let bands = grid.len();
    let data = vnir.map_spectra(bands, |p, v, out| {
        let s = swir.spectrum(p);
        for (o, &i) in out.iter_mut().zip(&v_idx) {
            *o = v[i];
        }
        for (o, &i) in out[v_idx.len()..].iter_mut().zip(&s_idx) {
            *o = s[i];
        }
    });
    vnir.derive(grid, data, vnir.mask().to_vec(), vnir.quantity(), "merge_cubes")
}

/// Keeps only the bands with centers in `[min_nm, max_nm]`.
pub fn crop_bands(cube: &HyperCube, min_nm: f64, max_nm: f64) -> Result<HyperCube> {
    if !(min_nm < max_nm) {
        return Err(Error::Range(format!("crop window {min_nm}..{max_nm} nm is empty")));
    }
    let keep = cube.grid().indices_in(min_nm, max_nm);
    if keep.is_empty() {
        return Err(Error::Range(format!(
            "crop window {min_nm}..{max_nm} nm misses grid {}..{} nm",
            cube.grid().first(),
            cube.grid().last()
        )));
    }
    let indices: Vec<usize> = keep.collect();
    select_bands(cube, &indices, format!("crop_bands({min_nm},{max_nm})"))
}

pub(crate) fn select_bands(cube: &HyperCube, indices: &[usize], step: String) -> Result<HyperCube> {
    let grid = cube.grid().select(indices)?;
    let data = cube.map_spectra(indices.len(), |_, s, out| {
        for (o, &i) in out.iter_mut().zip(indices) {
            *o = s[i];
        }
    });
    cube.derive(grid, data, cube.mask().to_vec(), cube.quantity(), step)
}
