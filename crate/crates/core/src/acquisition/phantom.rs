//! Synthetic burn phantoms with known class labels.
//!
//! Reflectance follows a Beer–Lambert-style model
//! `R(λ) = exp(−Σ_c w_c · G_c(λ))` where each chromophore `c` absorbs
//! through a sum of Gaussian lobes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{HyperCube, LabelMap, Quantity, WavelengthGrid};

/// One Gaussian absorption lobe: center (nm), standard deviation (nm),
/// peak absorbance per unit weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lobe {
    pub center_nm: f64,
    pub width_nm: f64,
    pub amplitude: f64,
}

const fn lobe(center_nm: f64, width_nm: f64, amplitude: f64) -> Lobe {
    Lobe {
        center_nm,
        width_nm,
        amplitude,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chromophore {
    Water,
    Oxyhemoglobin,
    Deoxyhemoglobin,
    Lipid,
    Collagen,
}

impl Chromophore {
    pub const ALL: [Chromophore; 5] = [
        Chromophore::Water,
        Chromophore::Oxyhemoglobin,
        Chromophore::Deoxyhemoglobin,
        Chromophore::Lipid,
        Chromophore::Collagen,
    ];

    pub fn lobes(self) -> &'static [Lobe] {
        match self {
            Chromophore::Water => &WATER,
            Chromophore::Oxyhemoglobin => &OXYHEMOGLOBIN,
            Chromophore::Deoxyhemoglobin => &DEOXYHEMOGLOBIN,
            Chromophore::Lipid => &LIPID,
            Chromophore::Collagen => &COLLAGEN,
        }
    }

    /// Absorbance per unit weight at `nm` (natural-log units).
    pub fn absorption(self, nm: f64) -> f64 {
        self.lobes()
            .iter()
            .map(|l| l.amplitude * (-0.5 * ((nm - l.center_nm) / l.width_nm).powi(2)).exp())
            .sum()
    }
}

// Relative lobe strengths follow the ordering of the real features: the
// 970 nm water band is weak next to 1450/1940 nm.
const WATER: [Lobe; 4] = [
    lobe(970.0, 25.0, 0.06),
    lobe(1200.0, 35.0, 0.12),
    lobe(1450.0, 60.0, 1.0),
    lobe(1940.0, 70.0, 1.4),
];
const OXYHEMOGLOBIN: [Lobe; 2] = [lobe(540.0, 15.0, 0.9), lobe(577.0, 12.0, 1.0)];
const DEOXYHEMOGLOBIN: [Lobe; 2] = [lobe(555.0, 20.0, 0.9), lobe(760.0, 15.0, 0.15)];
const LIPID: [Lobe; 2] = [lobe(930.0, 20.0, 0.08), lobe(1210.0, 20.0, 0.05)];
const COLLAGEN: [Lobe; 2] = [lobe(1500.0, 80.0, 0.5), lobe(2050.0, 60.0, 0.6)];

/// Dimensionless chromophore loadings for one tissue class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromophoreWeights {
    pub water: f64,
    pub oxyhemoglobin: f64,
    pub deoxyhemoglobin: f64,
    pub lipid: f64,
    pub collagen: f64,
}

impl ChromophoreWeights {
    pub fn get(&self, c: Chromophore) -> f64 {
        match c {
            Chromophore::Water => self.water,
            Chromophore::Oxyhemoglobin => self.oxyhemoglobin,
            Chromophore::Deoxyhemoglobin => self.deoxyhemoglobin,
            Chromophore::Lipid => self.lipid,
            Chromophore::Collagen => self.collagen,
        }
    }

    /// Noise-free reflectance at `nm`.
    pub fn reflectance(&self, nm: f64) -> f64 {
        let a: f64 = Chromophore::ALL.iter().map(|c| self.get(*c) * c.absorption(nm)).sum();
        (-a).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueClass {
    pub name: String,
    pub weights: ChromophoreWeights,
}

/// Spatial arrangement of classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// Concentric rings around the image center; class 0 outermost, the
    /// last class at the core (deepest burn in the middle).
    Concentric,
    /// Vertical stripes of equal width, class 0 leftmost.
    Stripes,
    /// Row-major explicit labels.
    Explicit { labels: Vec<u16> },
}

/// Black square markers used for registration; masked out of the labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fiducial {
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

/// Reflectance of fiducial markers.
pub const FIDUCIAL_REFLECTANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    pub classes: Vec<TissueClass>,
    #[serde(default)]
    pub fiducials: Vec<Fiducial>,
    pub noise_std: f64,
    pub breathing_amplitude_mm: f64,
    pub breathing_period_s: f64,
    #[serde(default = "default_reference_distance")]
    pub reference_distance_mm: f64,
    pub seed: u64,
}

fn default_reference_distance() -> f64 {
    100.0
}

pub const CLASS_NAMES: [&str; 4] = ["unburned", "superficial", "deep-partial", "full-thickness"];

fn weights(water: f64, oxy: f64, deoxy: f64, lipid: f64, collagen: f64) -> ChromophoreWeights {
    ChromophoreWeights {
        water,
        oxyhemoglobin: oxy,
        deoxyhemoglobin: deoxy,
        lipid,
        collagen,
    }
}

impl PhantomSpec {
    /// Four-class burn phantom. Water, lipid and intact collagen fall with
    /// severity; blood follows the burn zones (hyperemia in superficial
    /// burns, stasis in deep-partial, coagulation in full-thickness).
    pub fn reference(rows: usize, cols: usize, seed: u64) -> Self {
        let w = [
            weights(1.00, 0.50, 0.25, 0.20, 0.60),
            weights(0.85, 0.90, 0.25, 0.17, 0.55),
            weights(0.65, 0.35, 0.55, 0.13, 0.50),
            weights(0.45, 0.10, 0.10, 0.09, 0.45),
        ];
        Self::with_weights(rows, cols, seed, w)
    }

    /// Classes share hemoglobin and lipid and differ only in water and
    /// collagen, so VNIR carries almost no class contrast.
    pub fn water_collagen_only(rows: usize, cols: usize, seed: u64) -> Self {
        let w = [
            weights(1.00, 0.50, 0.30, 0.20, 0.60),
            weights(0.90, 0.50, 0.30, 0.20, 0.20),
            weights(0.50, 0.50, 0.30, 0.20, 0.50),
            weights(0.40, 0.50, 0.30, 0.20, 0.15),
        ];
        Self::with_weights(rows, cols, seed, w)
    }

    fn with_weights(rows: usize, cols: usize, seed: u64, w: [ChromophoreWeights; 4]) -> Self {
        Self {
            rows,
            cols,
            layout: Layout::Concentric,
            classes: CLASS_NAMES
                .iter()
                .zip(w)
                .map(|(n, weights)| TissueClass {
                    name: n.to_string(),
                    weights,
                })
                .collect(),
            fiducials: Vec::new(),
            noise_std: 0.005,
            breathing_amplitude_mm: 0.0,
            breathing_period_s: 4.0,
            reference_distance_mm: default_reference_distance(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Parameter("phantom dims must be positive".into()));
        }
        if self.classes.is_empty() || self.classes.len() >= u16::MAX as usize {
            return Err(Error::Parameter("phantom needs at least one class".into()));
        }
        for c in &self.classes {
            for ch in Chromophore::ALL {
                let v = c.weights.get(ch);
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Parameter(format!("class {} has invalid {ch:?} weight {v}", c.name)));
                }
            }
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Parameter("noise_std must be non-negative".into()));
        }
        if !(self.breathing_amplitude_mm >= 0.0) || !(self.breathing_period_s > 0.0) {
            return Err(Error::Parameter("invalid breathing parameters".into()));
        }
        if !(self.reference_distance_mm > 0.0) {
            return Err(Error::Parameter("reference distance must be positive".into()));
        }
        if let Layout::Explicit { labels } = &self.layout {
            if labels.len() != self.rows * self.cols {
                return Err(Error::Parameter("explicit layout size mismatch".into()));
            }
            if labels.iter().any(|l| *l as usize >= self.classes.len()) {
                return Err(Error::Parameter("explicit layout references unknown class".into()));
            }
        }
        for f in &self.fiducials {
            if f.row + f.size > self.rows || f.col + f.size > self.cols || f.size == 0 {
                return Err(Error::Parameter(format!("fiducial {f:?} outside the phantom")));
            }
        }
        Ok(())
    }

    /// Class index per pixel (row-major), before fiducials.
    pub fn class_layout(&self) -> Vec<u16> {
        let k = self.classes.len();
        let (rows, cols) = (self.rows, self.cols);
        match &self.layout {
            Layout::Explicit { labels } => labels.clone(),
            Layout::Stripes => (0..rows * cols)
                .map(|i| ((i % cols) * k / cols).min(k - 1) as u16)
                .collect(),
            Layout::Concentric => {
                let cy = (rows as f64 - 1.0) / 2.0;
                let cx = (cols as f64 - 1.0) / 2.0;
                (0..rows * cols)
                    .map(|i| {
                        let dy = ((i / cols) as f64 - cy).abs() / (cy + 0.5);
                        let dx = ((i % cols) as f64 - cx).abs() / (cx + 0.5);
                        let ring = (dy.max(dx) * k as f64).floor() as usize;
                        (k - 1 - ring.min(k - 1)) as u16
                    })
                    .collect()
            }
        }
    }

    pub fn fiducial_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.rows * self.cols];
        for f in &self.fiducials {
            for r in f.row..f.row + f.size {
                for c in f.col..f.col + f.size {
                    m[r * self.cols + c] = true;
                }
            }
        }
        m
    }
}

/// Renders a phantom onto `grid`. `stream` selects an independent noise
/// stream so several spectrometer grids can share one spec.
pub fn generate_phantom_on(spec: &PhantomSpec, grid: &WavelengthGrid, stream: u64) -> Result<(HyperCube, LabelMap)> {
    spec.validate()?;
    let classes = spec.class_layout();
    let fid = spec.fiducial_mask();
    let profiles: Vec<Vec<f64>> = spec
        .classes
        .iter()
        .map(|c| grid.as_slice().iter().map(|&w| c.weights.reflectance(w)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).map_err(|e| Error::Parameter(e.to_string()))?;
    let b = grid.len();
    let mut data = Vec::with_capacity(spec.rows * spec.cols * b);
    for p in 0..spec.rows * spec.cols {
        for i in 0..b {
            let base = if fid[p] {
                FIDUCIAL_REFLECTANCE
            } else {
                profiles[classes[p] as usize][i]
            };
            let v = if spec.noise_std > 0.0 { base + noise.sample(&mut rng) } else { base };
            data.push(v.max(0.0));
        }
    }
    let cube = HyperCube::new(spec.rows, spec.cols, grid.clone(), data, Quantity::Reflectance)?
        .with_provenance_step("generate_phantom");
    let tissue: Vec<bool> = fid.iter().map(|f| !f).collect();
    let labels = LabelMap::new(spec.rows, spec.cols, classes, tissue, spec.classes.len() as u16)?;
    Ok((cube, labels))
}

pub fn generate_phantom(spec: &PhantomSpec, grid: &WavelengthGrid) -> Result<(HyperCube, LabelMap)> {
    generate_phantom_on(spec, grid, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> WavelengthGrid {
        WavelengthGrid::stepped(400.0, 2100.0, 10.0).unwrap()
    }

    #[test]
    fn no_absorbers_no_noise_is_white() {
        let mut spec = PhantomSpec::reference(6, 6, 1);
        for c in &mut spec.classes {
            c.weights = weights(0.0, 0.0, 0.0, 0.0, 0.0);
        }
        spec.noise_std = 0.0;
        let (cube, _) = generate_phantom(&spec, &grid()).unwrap();
        assert!(cube.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn more_water_darkens_1450() {
        let w = weights(0.5, 0.2, 0.2, 0.2, 0.2);
        let w2 = ChromophoreWeights { water: 1.0, ..w };
        assert!(w2.reflectance(1450.0) < w.reflectance(1450.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = PhantomSpec::reference(8, 8, 42);
        let (a, la) = generate_phantom(&spec, &grid()).unwrap();
        let (b, lb) = generate_phantom(&spec, &grid()).unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(la, lb);
        let other = PhantomSpec { seed: 43, ..spec };
        let (c, _) = generate_phantom(&other, &grid()).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn every_class_present_in_concentric_layout() {
        let spec = PhantomSpec::reference(16, 20, 0);
        let (_, labels) = generate_phantom(&spec, &grid()).unwrap();
        assert!(labels.histogram().iter().all(|n| *n > 0), "{:?}", labels.histogram());
        // deepest class at the core, unburned at the corner
        assert_eq!(labels.get(8, 10), Some(3));
        assert_eq!(labels.get(0, 0), Some(0));
    }

    #[test]
    fn burn_zones_follow_water_and_blood() {
        let spec = PhantomSpec::reference(4, 4, 0);
        for pair in spec.classes.windows(2) {
            assert!(pair[1].weights.water < pair[0].weights.water);
        }
        let w: Vec<&ChromophoreWeights> = spec.classes.iter().map(|c| &c.weights).collect();
        let blood = |c: &ChromophoreWeights| c.oxyhemoglobin + c.deoxyhemoglobin;
        let sat = |c: &ChromophoreWeights| c.oxyhemoglobin / blood(c);
        assert!(blood(w[1]) > blood(w[0]));
        assert!(sat(w[2]) < sat(w[0]));
        assert!(w.iter().take(3).all(|c| blood(w[3]) < blood(c)));
    }

    #[test]
    fn fiducials_are_dark_and_unlabeled() {
        let mut spec = PhantomSpec::reference(10, 10, 0);
        spec.noise_std = 0.0;
        spec.fiducials = vec![Fiducial { row: 0, col: 0, size: 2 }];
        let (cube, labels) = generate_phantom(&spec, &grid()).unwrap();
        assert!(cube.spectrum(11).iter().all(|v| *v == FIDUCIAL_REFLECTANCE));
        assert_eq!(labels.get(1, 1), None);
        assert_eq!(labels.get(0, 3), Some(0));
    }

    #[test]
    fn rejects_negative_weights() {
        let mut spec = PhantomSpec::reference(4, 4, 0);
        spec.classes[1].weights.lipid = -0.1;
        assert!(matches!(spec.validate(), Err(Error::Parameter(_))));
    }
}
