use crate::error::Result;
use crate::spectral::WavelengthGrid;

pub const VNIR_BANDS: usize = 1502;
pub const SWIR_BANDS: usize = 255;
pub const VNIR_RANGE_NM: (f64, f64) = (400.0, 1100.0);
pub const SWIR_RANGE_NM: (f64, f64) = (1100.0, 2100.0);

/// Visible/near-infrared spectrometer axis, evenly spaced over 400–1100 nm.
pub fn vnir_grid() -> Result<WavelengthGrid> {
    WavelengthGrid::linspace(VNIR_RANGE_NM.0, VNIR_RANGE_NM.1, VNIR_BANDS)
}

/// Shortwave-infrared axis; its first band sits one step above 1100 nm so
/// the two spectrometers never share a band.
pub fn swir_grid() -> Result<WavelengthGrid> {
    let (lo, hi) = SWIR_RANGE_NM;
    let step = (hi - lo) / SWIR_BANDS as f64;
    WavelengthGrid::linspace(lo + step, hi, SWIR_BANDS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_disjoint_and_sized() {
        let v = vnir_grid().unwrap();
        let s = swir_grid().unwrap();
        assert_eq!(v.len(), VNIR_BANDS);
        assert_eq!(s.len(), SWIR_BANDS);
        assert!(v.last() < s.first());
        assert_eq!(v.first(), 400.0);
        assert!((s.last() - 2100.0).abs() < 1e-9);
    }

    #[test]
    fn merged_axis_covers_shared_range() {
        use crate::spectral::{merge_cubes, HyperCube, Quantity};
        let v = vnir_grid().unwrap();
        let s = swir_grid().unwrap();
        let a = HyperCube::filled(1, 1, v, &vec![0.5; VNIR_BANDS], Quantity::Reflectance).unwrap();
        let b = HyperCube::filled(1, 1, s, &vec![0.4; SWIR_BANDS], Quantity::Reflectance).unwrap();
        let m = merge_cubes(&a, &b).unwrap();
        assert_eq!(m.bands(), VNIR_BANDS + SWIR_BANDS);
    }
}
