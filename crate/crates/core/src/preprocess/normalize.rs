use crate::error::{Error, Result};
use crate::numeric::{mean_std, norm};
use crate::spectral::{HyperCube, Quantity};

/// Clips reflectance to `[0, max]`; values above unity survive calibration
/// and are only removed here.
pub fn clip_reflectance(cube: &HyperCube, max: f64) -> Result<HyperCube> {
    if cube.quantity() != Quantity::Reflectance {
        return Err(Error::Data("clip_reflectance expects reflectance".into()));
    }
    let data = cube.data().iter().map(|v| v.clamp(0.0, max)).collect();
    cube.derive(
        cube.grid().clone(),
        data,
        cube.mask().to_vec(),
        Quantity::Reflectance,
        format!("clip_reflectance({max})"),
    )
}

/// Divides every unmasked spectrum by its Euclidean norm. Zero-norm pixels
/// carry no direction and are masked.
pub fn l2_normalize(cube: &HyperCube) -> Result<HyperCube> {
    let mut mask = cube.mask().to_vec();
    let data = cube.map_spectra(cube.bands(), |p, s, out| {
        if !mask[p] {
            out.copy_from_slice(s);
            return;
        }
        let n = norm(s);
        if n > 0.0 && n.is_finite() {
            for (o, v) in out.iter_mut().zip(s) {
                *o = v / n;
            }
        } else {
            mask[p] = false;
            out.copy_from_slice(s);
        }
    });
    cube.derive(cube.grid().clone(), data, mask, Quantity::Normalized, "l2_normalize")
}

/// Relative threshold below which a band's spread counts as zero.
const ZERO_STD_REL: f64 = 1e-12;

/// Population mean/std per band over unmasked pixels.
pub fn band_statistics(cube: &HyperCube) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = cube.tissue_count();
    if n < 2 {
        return Err(Error::Data(format!("band statistics need 2 unmasked pixels, have {n}")));
    }
    Ok((0..cube.bands()).map(|b| mean_std(&cube.band_values(b))).unzip())
}

/// Per-band Z-score over unmasked pixels (population std). Bands with no
/// spread become all zeros.
pub fn zscore_bands(cube: &HyperCube) -> Result<HyperCube> {
    let (means, stds) = band_statistics(cube)?;
    let data = cube.map_spectra(cube.bands(), |_, s, out| {
        for b in 0..out.len() {
            out[b] = if is_flat(means[b], stds[b]) {
                0.0
            } else {
                (s[b] - means[b]) / stds[b]
            };
        }
    });
    cube.derive(cube.grid().clone(), data, cube.mask().to_vec(), Quantity::Normalized, "zscore_bands")
}

pub(crate) fn is_flat(mean: f64, std: f64) -> bool {
    !(std > ZERO_STD_REL * mean.abs()) || std == 0.0
}

/// Column-wise Z-scoring of a row-major `n × d` matrix in place; returns
/// the `(means, stds)` used (flat columns get std 1 and become zero).
pub fn zscore_columns(rows: &mut [Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if rows.len() < 2 {
        return Err(Error::Data("Z-score needs at least 2 rows".into()));
    }
    let d = rows[0].len();
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    let mut col = vec![0.0; rows.len()];
    for j in 0..d {
        for (c, r) in col.iter_mut().zip(rows.iter()) {
            *c = r[j];
        }
        let (m, s) = mean_std(&col);
        means.push(m);
        stds.push(if is_flat(m, s) { f64::INFINITY } else { s });
    }
    for r in rows.iter_mut() {
        for j in 0..d {
            r[j] = (r[j] - means[j]) / stds[j];
        }
    }
    Ok((means, stds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::WavelengthGrid;
    use proptest::prelude::*;

    fn grid(n: usize) -> WavelengthGrid {
        WavelengthGrid::linspace(500.0, 900.0, n).unwrap()
    }

    #[test]
    fn unit_norm_unchanged_and_scale_invariant() {
        let s = [0.6, 0.8, 0.0];
        let c = HyperCube::filled(1, 1, grid(3), &s, Quantity::Reflectance).unwrap();
        let n = l2_normalize(&c).unwrap();
        assert_eq!(n.data(), &s);
        let c10 = HyperCube::filled(1, 1, grid(3), &[6.0, 8.0, 0.0], Quantity::Reflectance).unwrap();
        assert_eq!(l2_normalize(&c10).unwrap().data(), &s);
    }

    #[test]
    fn zero_norm_pixel_masked() {
        let c = HyperCube::new(1, 2, grid(2), vec![0.0, 0.0, 1.0, 1.0], Quantity::Reflectance).unwrap();
        let n = l2_normalize(&c).unwrap();
        assert_eq!(n.mask(), &[false, true]);
    }

    #[test]
    fn two_pixel_zscore() {
        let c = HyperCube::new(1, 2, grid(2), vec![1.0, 5.0, 3.0, 5.0], Quantity::Reflectance).unwrap();
        let z = zscore_bands(&c).unwrap();
        // band 0: mean 2, population std 1; band 1 constant
        assert_eq!(z.data(), &[-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn zscore_needs_two_pixels() {
        let c = HyperCube::with_mask(1, 2, grid(2), vec![1.0; 4], vec![true, false], Quantity::Reflectance, vec![])
            .unwrap();
        assert!(matches!(zscore_bands(&c), Err(Error::Data(_))));
    }

    #[test]
    fn masked_pixels_ignored_by_statistics() {
        let c = HyperCube::with_mask(
            1,
            3,
            grid(2),
            vec![1.0, 0.0, 3.0, 1.0, 100.0, 7.0],
            vec![true, true, false],
            Quantity::Reflectance,
            vec![],
        )
        .unwrap();
        let z = zscore_bands(&c).unwrap();
        assert_eq!(&z.data()[..4], &[-1.0, -1.0, 1.0, 1.0]);
    }

    fn cube_strategy() -> impl Strategy<Value = HyperCube> {
        (2usize..6, 2usize..6, 2usize..8).prop_flat_map(|(r, c, b)| {
            proptest::collection::vec(0.0f64..2.0, r * c * b)
                .prop_map(move |d| HyperCube::new(r, c, grid(b), d, Quantity::Reflectance).unwrap())
        })
    }

    proptest! {
        #[test]
        fn l2_is_idempotent(c in cube_strategy()) {
            let once = l2_normalize(&c).unwrap();
            let twice = l2_normalize(&once).unwrap();
            prop_assert_eq!(once.mask(), twice.mask());
            for p in once.tissue_pixels() {
                prop_assert!((norm(once.spectrum(p)) - 1.0).abs() < 1e-9);
                for (a, b) in once.spectrum(p).iter().zip(twice.spectrum(p)) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn zscore_moments_and_affine_invariance(c in cube_strategy(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let z = zscore_bands(&c).unwrap();
            for b in 0..z.bands() {
                let (m, s) = mean_std(&z.band_values(b));
                prop_assert!(m.abs() < 1e-9);
                prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
            }
            let data: Vec<f64> = c.data().iter().enumerate()
                .map(|(i, v)| v * scale * (1.0 + (i % c.bands()) as f64) + shift).collect();
            let c2 = HyperCube::new(c.rows(), c.cols(), c.grid().clone(), data, Quantity::Normalized).unwrap();
            let z2 = zscore_bands(&c2).unwrap();
            for (a, b) in z.data().iter().zip(z2.data()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
