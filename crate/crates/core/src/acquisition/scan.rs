//! Sensor-pod simulation, distance compensation and reflectance calibration.

use std::f64::consts::PI;
use std::path::Path;

use super::phantom::PhantomSpec;
use super::raster::RasterPlan;
use crate::error::{Error, Result};
use crate::spectral::io::write_bytes;
use crate::spectral::{HyperCube, Quantity, WavelengthGrid};

/// Range of the pod's z rail around the reference distance (mm).
pub const RAIL_HALF_TRAVEL_MM: f64 = 20.0;
/// ToF sampling rate (Hz).
pub const TOF_RATE_HZ: f64 = 10.0;
/// Largest tolerated spacing between ToF samples during a scan (s).
pub const MAX_TOF_GAP_S: f64 = 0.2;

/// Dark and white reference spectra in detector counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePair {
    pub wavelengths_nm: Vec<f64>,
    pub dark: Vec<f64>,
    pub white: Vec<f64>,
}

impl ReferencePair {
    pub fn new(wavelengths_nm: Vec<f64>, dark: Vec<f64>, white: Vec<f64>) -> Result<Self> {
        if dark.len() != wavelengths_nm.len() || white.len() != wavelengths_nm.len() {
            return Err(Error::Shape("reference spectra length mismatch".into()));
        }
        Ok(Self {
            wavelengths_nm,
            dark,
            white,
        })
    }

    /// Default lamp/detector model: a dark floor plus a broad white response.
    pub fn simulated(grid: &WavelengthGrid) -> Self {
        let dark: Vec<f64> = grid.as_slice().iter().map(|w| 200.0 + 0.05 * w).collect();
        let white = grid
            .as_slice()
            .iter()
            .zip(&dark)
            .map(|(w, d)| d + 20_000.0 + 30_000.0 * (-0.5 * ((w - 1100.0) / 600.0).powi(2)).exp())
            .collect();
        Self {
            wavelengths_nm: grid.as_slice().to_vec(),
            dark,
            white,
        }
    }

    /// First band where the white reference does not exceed the dark one.
    pub fn first_unusable_band(&self) -> Option<usize> {
        self.dark.iter().zip(&self.white).position(|(d, w)| !(w > d))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::format(path, e.to_string());
        w.write_record(["wavelength_nm", "dark", "white"]).map_err(err)?;
        for i in 0..self.dark.len() {
            w.write_record([
                self.wavelengths_nm[i].to_string(),
                self.dark[i].to_string(),
                self.white[i].to_string(),
            ])
            .map_err(err)?;
        }
        write_bytes(path, &w.into_inner().map_err(|e| Error::format(path, e.to_string()))?)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let (mut wl, mut dark, mut white) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.deserialize::<(f64, f64, f64)>() {
            let (a, b, c) = rec.map_err(|e| Error::format(path, e.to_string()))?;
            wl.push(a);
            dark.push(b);
            white.push(c);
        }
        Self::new(wl, dark, white)
    }
}

/// Time-of-flight distance log.
#[derive(Debug, Clone, PartialEq)]
pub struct TofLog {
    pub reference_mm: f64,
    /// `(timestamp_s, distance_mm)`, sorted by time.
    pub samples: Vec<(f64, f64)>,
}

impl TofLog {
    pub fn new(reference_mm: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::DataQuality("ToF timestamps not strictly increasing".into()));
        }
        if let Some((t, d)) = samples
            .iter()
            .find(|(_, d)| !((d - reference_mm).abs() <= RAIL_HALF_TRAVEL_MM))
        {
            return Err(Error::DataQuality(format!(
                "ToF distance {d} mm at {t} s outside {reference_mm} ± {RAIL_HALF_TRAVEL_MM} mm"
            )));
        }
        Ok(Self { reference_mm, samples })
    }

    /// Distance of the sample closest in time to `t` (earlier one on ties).
    pub fn nearest(&self, t: f64) -> f64 {
        let i = self.samples.partition_point(|s| s.0 < t);
        if i == 0 {
            self.samples[0].1
        } else if i == self.samples.len() {
            self.samples[i - 1].1
        } else if (self.samples[i].0 - t) < (t - self.samples[i - 1].0) {
            self.samples[i].1
        } else {
            self.samples[i - 1].1
        }
    }

    /// Verifies the log covers `[0, duration]` without gaps above
    /// [`MAX_TOF_GAP_S`].
    pub fn check_coverage(&self, duration_s: f64) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Err(Error::DataQuality("ToF log is empty".into()));
        };
        let last = self.samples[self.samples.len() - 1];
        let eps = 1e-9;
        if first.0 > MAX_TOF_GAP_S + eps || duration_s - last.0 > MAX_TOF_GAP_S + eps {
            return Err(Error::DataQuality(format!(
                "ToF log {}..{} s does not span the {duration_s} s scan",
                first.0, last.0
            )));
        }
        for w in self.samples.windows(2) {
            if w[1].0 - w[0].0 > MAX_TOF_GAP_S + eps && w[0].0 < duration_s {
                return Err(Error::DataQuality(format!(
                    "ToF gap of {:.3} s at {:.3} s",
                    w[1].0 - w[0].0,
                    w[0].0
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::format(path, e.to_string());
        w.write_record(["timestamp_s", "distance_mm"]).map_err(err)?;
        for (t, d) in &self.samples {
            w.write_record([t.to_string(), d.to_string()]).map_err(err)?;
        }
        let mut bytes = format!("# reference_mm={}\n", self.reference_mm).into_bytes();
        bytes.extend(w.into_inner().map_err(|e| Error::format(path, e.to_string()))?);
        write_bytes(path, &bytes)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let reference_mm = text
            .lines()
            .find_map(|l| l.strip_prefix("# reference_mm="))
            .ok_or_else(|| Error::format(path, "missing '# reference_mm=' line"))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::format(path, e.to_string()))?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for rec in r.deserialize::<(f64, f64)>() {
            samples.push(rec.map_err(|e| Error::format(path, e.to_string()))?);
        }
        Self::new(reference_mm, samples)
    }
}

fn breathing_distance(spec: &PhantomSpec, t: f64) -> f64 {
    spec.reference_distance_mm + spec.breathing_amplitude_mm * (2.0 * PI * t / spec.breathing_period_s).sin()
}

fn check_plan(cube: &HyperCube, plan: &RasterPlan) -> Result<()> {
    if plan.nx != cube.cols() || plan.ny != cube.rows() {
        return Err(Error::Shape(format!(
            "raster {}x{} does not cover cube {}x{}",
            plan.ny,
            plan.nx,
            cube.rows(),
            cube.cols()
        )));
    }
    Ok(())
}

/// Simulates the gantry scan of a reflectance cube.
///
/// Each pixel is observed at its dwell midpoint while the specimen breathes,
/// so the collected signal scales with `(d_ref / d(t))²`.
pub fn simulate_scan(truth: &HyperCube, plan: &RasterPlan, spec: &PhantomSpec) -> Result<(HyperCube, ReferencePair, TofLog)> {
    check_plan(truth, plan)?;
    if truth.quantity() != Quantity::Reflectance {
        return Err(Error::Data("simulate_scan expects a reflectance cube".into()));
    }
    if spec.breathing_amplitude_mm > RAIL_HALF_TRAVEL_MM {
        return Err(Error::Parameter(format!(
            "breathing amplitude {} mm exceeds the rail travel",
            spec.breathing_amplitude_mm
        )));
    }
    let refs = ReferencePair::simulated(truth.grid());
    let times = plan.pixel_times();
    let d_ref = spec.reference_distance_mm;
    let data = truth.map_spectra(truth.bands(), |p, r, out| {
        let d = breathing_distance(spec, times[p]);
        let scale = (d_ref / d) * (d_ref / d);
        for i in 0..out.len() {
            out[i] = refs.dark[i] + r[i] * (refs.white[i] - refs.dark[i]) * scale;
        }
    });
    let raw = truth.derive(
        truth.grid().clone(),
        data,
        truth.mask().to_vec(),
        Quantity::Counts,
        "simulate_scan",
    )?;
    let n = (plan.duration_s() * TOF_RATE_HZ).ceil() as usize;
    let samples = (0..=n)
        .map(|i| {
            let t = i as f64 / TOF_RATE_HZ;
            (t, breathing_distance(spec, t))
        })
        .collect();
    let tof = TofLog::new(d_ref, samples)?;
    Ok((raw, refs, tof))
}

/// Undoes distance attenuation: counts above dark are multiplied by
/// `(d(t_p)/d_ref)²` using the log sample nearest each dwell midpoint.
pub fn tof_compensate(raw: &HyperCube, tof: &TofLog, plan: &RasterPlan, refs: &ReferencePair) -> Result<HyperCube> {
    check_plan(raw, plan)?;
    check_reference_grid(raw, refs)?;
    tof.check_coverage(plan.duration_s())?;
    let times = plan.pixel_times();
    let d_ref = tof.reference_mm;
    let data = raw.map_spectra(raw.bands(), |p, c, out| {
        let d = tof.nearest(times[p]);
        let scale = (d / d_ref) * (d / d_ref);
        for i in 0..out.len() {
            out[i] = refs.dark[i] + (c[i] - refs.dark[i]) * scale;
        }
    });
    raw.derive(raw.grid().clone(), data, raw.mask().to_vec(), raw.quantity(), "tof_compensate")
}

fn check_reference_grid(cube: &HyperCube, refs: &ReferencePair) -> Result<()> {
    if refs.wavelengths_nm.as_slice() != cube.grid().as_slice() {
        return Err(Error::Shape("reference spectra are on a different grid".into()));
    }
    Ok(())
}

/// `R = (raw − dark) / (white − dark)` per band. Slightly negative results
/// from detector noise are clipped to zero.
pub fn counts_to_reflectance(raw: &HyperCube, refs: &ReferencePair) -> Result<HyperCube> {
    check_reference_grid(raw, refs)?;
    if let Some(band) = refs.first_unusable_band() {
        return Err(Error::Calibration {
            band,
            wavelength_nm: refs.wavelengths_nm[band],
        });
    }
    let data = raw.map_spectra(raw.bands(), |_, c, out| {
        for i in 0..out.len() {
            out[i] = ((c[i] - refs.dark[i]) / (refs.white[i] - refs.dark[i])).max(0.0);
        }
    });
    raw.derive(
        raw.grid().clone(),
        data,
        raw.mask().to_vec(),
        Quantity::Reflectance,
        "counts_to_reflectance",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::phantom::generate_phantom;

    fn setup(amplitude: f64) -> (HyperCube, RasterPlan, PhantomSpec) {
        let mut spec = PhantomSpec::reference(12, 10, 7);
        spec.breathing_amplitude_mm = amplitude;
        let grid = WavelengthGrid::stepped(400.0, 2100.0, 20.0).unwrap();
        let (truth, _) = generate_phantom(&spec, &grid).unwrap();
        let plan = RasterPlan::for_grid(12, 10, 1.0, 0.1, 0.2).unwrap();
        (truth, plan, spec)
    }

    fn max_rel_err(a: &HyperCube, b: &HyperCube) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| ((x - y) / y.abs().max(1e-12)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn calibration_anchors() {
        let g = WavelengthGrid::new(vec![500.0, 600.0]).unwrap();
        let refs = ReferencePair::new(g.as_slice().to_vec(), vec![10.0, 20.0], vec![110.0, 220.0]).unwrap();
        let mk = |d: Vec<f64>| HyperCube::new(1, 1, g.clone(), d, Quantity::Counts).unwrap();
        let r = counts_to_reflectance(&mk(vec![110.0, 220.0]), &refs).unwrap();
        assert_eq!(r.data(), &[1.0, 1.0]);
        let r = counts_to_reflectance(&mk(vec![10.0, 20.0]), &refs).unwrap();
        assert_eq!(r.data(), &[0.0, 0.0]);
        let r = counts_to_reflectance(&mk(vec![60.0, 120.0]), &refs).unwrap();
        assert_eq!(r.data(), &[0.5, 0.5]);
        assert_eq!(r.quantity(), Quantity::Reflectance);
    }

    #[test]
    fn inverted_reference_names_band() {
        let g = WavelengthGrid::new(vec![500.0, 600.0]).unwrap();
        let refs = ReferencePair::new(g.as_slice().to_vec(), vec![10.0, 20.0], vec![110.0, 20.0]).unwrap();
        let c = HyperCube::new(1, 1, g, vec![50.0, 50.0], Quantity::Counts).unwrap();
        match counts_to_reflectance(&c, &refs) {
            Err(Error::Calibration { band, wavelength_nm }) => {
                assert_eq!(band, 1);
                assert_eq!(wavelength_nm, 600.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_breathing_round_trip() {
        let (truth, plan, spec) = setup(0.0);
        let (raw, refs, _) = simulate_scan(&truth, &plan, &spec).unwrap();
        let r = counts_to_reflectance(&raw, &refs).unwrap();
        assert!(max_rel_err(&r, &truth) <= 1e-6);
    }

    #[test]
    fn white_target_reads_white() {
        let (truth, plan, mut spec) = setup(0.0);
        spec.noise_std = 0.0;
        let ones = HyperCube::filled(12, 10, truth.grid().clone(), &vec![1.0; truth.bands()], Quantity::Reflectance).unwrap();
        let (raw, refs, _) = simulate_scan(&ones, &plan, &spec).unwrap();
        for p in 0..raw.pixels() {
            for (i, v) in raw.spectrum(p).iter().enumerate() {
                assert!((v - refs.white[i]).abs() <= 1e-9 * refs.white[i]);
            }
        }
    }

    #[test]
    fn breathing_scale_matches_timeline_replay() {
        let (truth, plan, spec) = setup(5.0);
        let (raw, refs, _) = simulate_scan(&truth, &plan, &spec).unwrap();
        // replay: walk the serpentine order with a running clock
        let mut clock = 0.0;
        for pos in &plan.positions {
            let t = clock + plan.dwell_s / 2.0;
            clock += plan.dwell_s;
            let d = 100.0 + 5.0 * (2.0 * PI * t / 4.0).sin();
            let want = (100.0 / d).powi(2);
            let p = pos.row * plan.nx + pos.col;
            let b = 10;
            let got = (raw.spectrum(p)[b] - refs.dark[b]) / ((refs.white[b] - refs.dark[b]) * truth.spectrum(p)[b]);
            assert!((got - want).abs() < 1e-9, "pixel {p}: {got} vs {want}");
        }
    }

    #[test]
    fn compensation_with_constant_distance_is_identity() {
        let (truth, plan, spec) = setup(0.0);
        let (raw, refs, tof) = simulate_scan(&truth, &plan, &spec).unwrap();
        let c = tof_compensate(&raw, &tof, &plan, &refs).unwrap();
        assert_eq!(c.data(), raw.data());
    }

    #[test]
    fn compensation_inverts_breathing() {
        let (truth, plan, spec) = setup(5.0);
        let (raw, refs, tof) = simulate_scan(&truth, &plan, &spec).unwrap();
        let naive = counts_to_reflectance(&raw, &refs).unwrap();
        let fixed = counts_to_reflectance(&tof_compensate(&raw, &tof, &plan, &refs).unwrap(), &refs).unwrap();
        assert!(max_rel_err(&fixed, &truth) < 0.01);
        assert!(max_rel_err(&naive, &truth) > 0.05);
        assert_eq!(
            fixed.provenance(),
            &["generate_phantom", "simulate_scan", "tof_compensate", "counts_to_reflectance"]
        );
    }

    #[test]
    fn missing_or_gappy_log_is_rejected() {
        let (truth, plan, spec) = setup(5.0);
        let (raw, refs, tof) = simulate_scan(&truth, &plan, &spec).unwrap();
        let empty = TofLog::new(100.0, vec![]).unwrap();
        assert!(matches!(tof_compensate(&raw, &empty, &plan, &refs), Err(Error::DataQuality(_))));
        let mut gappy = tof.clone();
        gappy.samples.drain(20..24);
        assert!(matches!(tof_compensate(&raw, &gappy, &plan, &refs), Err(Error::DataQuality(_))));
        let mut short = tof.clone();
        short.samples.truncate(tof.samples.len() / 2);
        assert!(tof_compensate(&raw, &short, &plan, &refs).is_err());
    }

    #[test]
    fn distances_outside_rail_are_rejected() {
        assert!(TofLog::new(100.0, vec![(0.0, 125.0)]).is_err());
        assert!(TofLog::new(100.0, vec![(0.0, 119.0)]).is_ok());
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (truth, plan, spec) = setup(3.0);
        let (_, refs, tof) = simulate_scan(&truth, &plan, &spec).unwrap();
        let p = dir.path().join("refs.csv");
        refs.write_csv(&p).unwrap();
        assert_eq!(ReferencePair::read_csv(&p).unwrap(), refs);
        let p = dir.path().join("tof.csv");
        tof.write_csv(&p).unwrap();
        assert_eq!(TofLog::read_csv(&p).unwrap(), tof);
    }
}
