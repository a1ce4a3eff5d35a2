use super::model::CaeModel;
use crate::error::{Error, Result};
use crate::spectral::{select_bands, HyperCube, WavelengthGrid};

/// Published ten-band selection for burn assessment (nm).
pub const REFERENCE_BANDS_NM: [f64; 10] = [528.0, 617.0, 762.0, 837.0, 954.0, 1119.0, 1324.0, 1567.0, 1775.0, 2005.0];

/// Input index chosen by each selector neuron. A neuron whose best band is
/// already taken falls back to its next-highest logit.
pub fn selected_indices(model: &CaeModel) -> Result<Vec<usize>> {
    let sel = &model.selector;
    if sel.d < sel.k {
        return Err(Error::Data(format!("{} bands cannot yield {} distinct selections", sel.d, sel.k)));
    }
    let mut taken: Vec<usize> = Vec::with_capacity(sel.k);
    for i in 0..sel.k {
        let row = sel.row(i);
        let mut order: Vec<usize> = (0..sel.d).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        let pick = order.into_iter().find(|j| !taken.contains(j)).expect("d >= k leaves a free band");
        taken.push(pick);
    }
    Ok(taken)
}

/// Union of both models' selections as sorted wavelengths.
pub fn selected_bands(a: &CaeModel, grid_a: &WavelengthGrid, b: &CaeModel, grid_b: &WavelengthGrid) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (m, g) in [(a, grid_a), (b, grid_b)] {
        if m.d() != g.len() {
            return Err(Error::Shape(format!("model has {} inputs, grid has {} bands", m.d(), g.len())));
        }
        out.extend(selected_indices(m)?.into_iter().map(|i| g.as_slice()[i]));
    }
    out.sort_by(f64::total_cmp);
    if out.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Data("both models selected the same wavelength".into()));
    }
    Ok(out)
}

/// Keeps the band nearest to each requested wavelength (within one local
/// grid step), preserving mask and spatial shape.
pub fn downsample_to_bands(cube: &HyperCube, bands_nm: &[f64]) -> Result<HyperCube> {
    if bands_nm.is_empty() {
        return Err(Error::Parameter("no bands requested".into()));
    }
    let g = cube.grid();
    let mut idx = Vec::with_capacity(bands_nm.len());
    for &nm in bands_nm {
        let i = g.nearest(nm);
        let tol = if g.len() > 1 { g.local_step(i) } else { 0.0 };
        if (g.as_slice()[i] - nm).abs() > tol + 1e-9 {
            return Err(Error::Range(format!("{nm} nm is not within one band of the grid")));
        }
        idx.push(i);
    }
    idx.sort_unstable();
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Range("two requested bands map to the same grid band".into()));
    }
    select_bands(cube, &idx, format!("downsample_to_bands({})", bands_nm.len()))
}
