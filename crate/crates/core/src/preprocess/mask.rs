use crate::error::{Error, Result};
use crate::spectral::{HyperCube, Quantity};

/// Window over which mean reflectance decides tissue vs background (nm).
pub const MASK_WINDOW_NM: (f64, f64) = (400.0, 900.0);

/// Masks pixels whose mean reflectance over [`MASK_WINDOW_NM`] falls
/// outside `[low, high]`. The result is intersected with the existing mask.
pub fn mask_background(cube: &HyperCube, low: f64, high: f64) -> Result<HyperCube> {
    if cube.quantity() != Quantity::Reflectance {
        return Err(Error::Data(format!(
            "background masking needs reflectance, got {}",
            cube.quantity().as_str()
        )));
    }
    if !(low <= high) {
        return Err(Error::Parameter(format!("mask thresholds {low} > {high}")));
    }
    let window = cube.grid().indices_in(MASK_WINDOW_NM.0, MASK_WINDOW_NM.1);
    if window.is_empty() {
        return Err(Error::Range("cube has no bands in 400-900 nm".into()));
    }
    let mask: Vec<bool> = (0..cube.pixels())
        .map(|p| {
            let s = &cube.spectrum(p)[window.clone()];
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            cube.is_tissue(p) && mean >= low && mean <= high
        })
        .collect();
    if !mask.iter().any(|m| *m) {
        return Err(Error::Data("background mask removed every pixel".into()));
    }
    cube.with_mask_replaced(mask, format!("mask_background({low},{high})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{generate_phantom, Fiducial, PhantomSpec};
    use crate::spectral::WavelengthGrid;

    fn grid() -> WavelengthGrid {
        WavelengthGrid::stepped(400.0, 1000.0, 20.0).unwrap()
    }

    #[test]
    fn uniform_cube_keeps_everything() {
        let c = HyperCube::filled(3, 3, grid(), &vec![0.5; grid().len()], Quantity::Reflectance).unwrap();
        let m = mask_background(&c, 0.01, 1.5).unwrap();
        assert!(m.mask().iter().all(|x| *x));
    }

    #[test]
    fn zero_pixel_is_masked() {
        let b = grid().len();
        let mut data = vec![0.5; 9 * b];
        for v in &mut data[4 * b..5 * b] {
            *v = 0.0;
        }
        let c = HyperCube::new(3, 3, grid(), data, Quantity::Reflectance).unwrap();
        let m = mask_background(&c, 0.01, 1.5).unwrap();
        let masked: Vec<usize> = (0..9).filter(|p| !m.mask()[*p]).collect();
        assert_eq!(masked, vec![4]);
    }

    #[test]
    fn fiducials_are_masked_exactly() {
        let mut spec = PhantomSpec::reference(16, 16, 3);
        spec.fiducials = vec![
            Fiducial { row: 1, col: 1, size: 3 },
            Fiducial { row: 11, col: 12, size: 2 },
        ];
        let g = WavelengthGrid::stepped(400.0, 2100.0, 10.0).unwrap();
        let (cube, _) = generate_phantom(&spec, &g).unwrap();
        let m = mask_background(&cube, 0.08, 1.5).unwrap();
        let layout = spec.fiducial_mask();
        for p in 0..cube.pixels() {
            assert_eq!(m.mask()[p], !layout[p], "pixel {p}");
        }
    }

    #[test]
    fn all_masked_is_error() {
        let c = HyperCube::filled(2, 2, grid(), &vec![0.0; grid().len()], Quantity::Reflectance).unwrap();
        assert!(matches!(mask_background(&c, 0.01, 1.5), Err(Error::Data(_))));
    }
}
