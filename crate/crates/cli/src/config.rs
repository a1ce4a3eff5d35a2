//! Pipeline configuration: one JSON file with a section per stage.

use std::path::{Path, PathBuf};

use burnscope::acquisition::{Fiducial, Layout, PhantomSpec, TissueClass};
use burnscope::cae::TrainConfig;
use burnscope::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::Stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Output directory; not part of the config hash.
    pub out_dir: PathBuf,
    pub phantom: PhantomConfig,
    pub raster: RasterConfig,
    pub preprocess: PreprocessConfig,
    pub maps: MapsConfig,
    pub lsci: LsciConfig,
    pub cae: CaeConfig,
    pub cluster: ClusterConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("burnscope-out"),
            phantom: PhantomConfig::default(),
            raster: RasterConfig::default(),
            preprocess: PreprocessConfig::default(),
            maps: MapsConfig::default(),
            lsci: LsciConfig::default(),
            cae: CaeConfig::default(),
            cluster: ClusterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomPreset {
    Reference,
    WaterCollagenOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub preset: PhantomPreset,
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    /// Replaces the preset's tissue classes when given.
    pub classes: Option<Vec<TissueClass>>,
    /// Defaults to 3x3 squares in three corners.
    pub fiducials: Option<Vec<Fiducial>>,
    pub noise_std: f64,
    pub breathing_amplitude_mm: f64,
    pub breathing_period_s: f64,
    pub reference_distance_mm: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            preset: PhantomPreset::Reference,
            rows: 40,
            cols: 40,
            layout: Layout::Concentric,
            classes: None,
            fiducials: None,
            noise_std: 0.005,
            breathing_amplitude_mm: 0.0,
            breathing_period_s: 4.0,
            reference_distance_mm: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    pub spot_mm: f64,
    pub overlap: f64,
    pub dwell_s: f64,
    pub tof_compensation: bool,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            spot_mm: 1.0,
            overlap: 0.1,
            dwell_s: 0.05,
            tof_compensation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub crop_nm: (f64, f64),
    pub smooth_window: usize,
    pub smooth_polyorder: usize,
    pub mask_low: f64,
    pub mask_high: f64,
    /// CSV of `src_x,src_y,dst_x,dst_y` pairs mapping ground-truth label
    /// coordinates into the cube frame.
    pub registration_pairs: Option<PathBuf>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            crop_nm: (400.0, 2100.0),
            smooth_window: 7,
            smooth_polyorder: 2,
            mask_low: 0.05,
            mask_high: 1.5,
            registration_pairs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtwiAnchors {
    pub s1: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivativeConfig {
    pub order: usize,
    pub window: usize,
    pub polyorder: usize,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        Self {
            order: 1,
            window: 11,
            polyorder: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsConfig {
    /// Fixed DTWI anchors; when absent they are calibrated from the
    /// unburned and full-thickness phantom classes.
    pub dtwi: Option<DtwiAnchors>,
    pub sto2_window_nm: (f64, f64),
    /// Extinction CSV; the built-in table is used when absent.
    pub extinction_table: Option<PathBuf>,
    pub derivative: DerivativeConfig,
}

impl Default for MapsConfig {
    fn default() -> Self {
        Self {
            dtwi: None,
            sto2_window_nm: (500.0, 800.0),
            extinction_table: None,
            derivative: DerivativeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ContrastMode {
    Temporal,
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsciConfig {
    pub mode: ContrastMode,
    pub frames: usize,
    pub window: usize,
    /// Decorrelation rate (1/s) per phantom class.
    pub class_flow: Vec<f64>,
    pub exposure_s: f64,
    pub rate_hz: f64,
}

impl Default for LsciConfig {
    fn default() -> Self {
        Self {
            mode: ContrastMode::Temporal,
            frames: 64,
            window: 7,
            class_flow: vec![1000.0, 3000.0, 300.0, 50.0],
            exposure_s: 0.005,
            rate_hz: 25.0,
        }
    }
}

/// Per-spectrometer training settings; the seed comes from the global one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaeModelConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub val_fraction: f64,
    pub leaky_slope: f64,
}

impl Default for CaeModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            t_start: t.t_start,
            t_end: t.t_end,
            val_fraction: t.val_fraction,
            leaky_slope: t.leaky_slope,
        }
    }
}

impl CaeModelConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            t_start: self.t_start,
            t_end: self.t_end,
            val_fraction: self.val_fraction,
            leaky_slope: self.leaky_slope,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaeConfig {
    pub vnir: CaeModelConfig,
    pub swir: CaeModelConfig,
    /// Training pixels per model; larger images are subsampled.
    pub max_pixels: usize,
}

impl Default for CaeConfig {
    fn default() -> Self {
        Self {
            vnir: CaeModelConfig::default(),
            swir: CaeModelConfig::default(),
            max_pixels: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClusterInput {
    /// Band-selected reflectance.
    Reflectance,
    /// Band-selected, per-band Z-scored reflectance.
    Zscore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BandSource {
    /// The ten bands chosen by `train-cae`.
    Selected,
    /// The built-in reference list.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_n: usize,
    pub smooth_radius: usize,
    pub input: ClusterInput,
    pub bands: BandSource,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 4,
            max_n: burnscope::cluster::DEFAULT_MAX_SAMPLES,
            smooth_radius: 1,
            input: ClusterInput::Reflectance,
            bands: BandSource::Selected,
        }
    }
}

/// Distinct deterministic seed for each stochastic stage.
fn corner_fiducials(rows: usize, cols: usize) -> Vec<Fiducial> {
    let size = 3;
    if rows < 2 * size || cols < 2 * size {
        return Vec::new();
    }
    vec![
        Fiducial { row: 0, col: 0, size },
        Fiducial { row: 0, col: cols - size, size },
        Fiducial { row: rows - size, col: 0, size },
    ]
}

pub fn stage_seed(global: u64, stage: u64) -> u64 {
    global ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parameter(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Parameter(format!("malformed config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom_spec()?.validate()?;
        let p = &self.preprocess;
        if !(p.crop_nm.0 < p.crop_nm.1) {
            return Err(Error::Parameter("crop window must be increasing".into()));
        }
        if p.smooth_window.is_multiple_of(2) || p.smooth_window <= p.smooth_polyorder {
            return Err(Error::Parameter("smoothing window must be odd and above the polynomial order".into()));
        }
        if !(p.mask_low < p.mask_high) {
            return Err(Error::Parameter("mask thresholds must satisfy low < high".into()));
        }
        if let Some(a) = self.maps.dtwi {
            burnscope::physio::DtwiParams::new(a.s1, a.s2)?;
        }
        let w = self.maps.sto2_window_nm;
        if !(w.0 < w.1) {
            return Err(Error::Parameter("StO2 window must be increasing".into()));
        }
        let l = &self.lsci;
        let k = self.phantom_spec()?.classes.len();
        if l.class_flow.len() != k || l.class_flow.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::Parameter(format!("lsci.class_flow needs {k} non-negative rates")));
        }
        if l.frames < 2 {
            return Err(Error::Parameter("lsci.frames must be at least 2".into()));
        }
        for m in [&self.cae.vnir, &self.cae.swir] {
            m.train_config(0).validate()?;
        }
        if self.cae.max_pixels < burnscope::cae::MIN_PIXELS {
            return Err(Error::Parameter("cae.max_pixels too small".into()));
        }
        let c = &self.cluster;
        if c.k == 0 || c.max_n < c.k || c.smooth_radius == 0 {
            return Err(Error::Parameter("cluster needs k >= 1, max_n >= k and smooth_radius >= 1".into()));
        }
        Ok(())
    }

    pub fn phantom_spec(&self) -> Result<PhantomSpec> {
        let p = &self.phantom;
        let seed = stage_seed(self.seed, 1);
        let mut spec = match p.preset {
            PhantomPreset::Reference => PhantomSpec::reference(p.rows, p.cols, seed),
            PhantomPreset::WaterCollagenOnly => PhantomSpec::water_collagen_only(p.rows, p.cols, seed),
        };
        if let Some(classes) = &p.classes {
            spec.classes = classes.clone();
        }
        spec.layout = p.layout.clone();
        spec.fiducials = match &p.fiducials {
            Some(f) => f.clone(),
            None => corner_fiducials(p.rows, p.cols),
        };
        spec.noise_std = p.noise_std;
        spec.breathing_amplitude_mm = p.breathing_amplitude_mm;
        spec.breathing_period_s = p.breathing_period_s;
        spec.reference_distance_mm = p.reference_distance_mm;
        spec.validate()?;
        Ok(spec)
    }

    /// SHA-256 over the canonical JSON of everything except `out_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        digest(&c)
    }

    /// Stages whose outputs feed `stage`.
    pub fn upstream(&self, stage: Stage) -> Vec<Stage> {
        match stage {
            Stage::Phantom => vec![],
            Stage::Scan => vec![Stage::Phantom],
            Stage::Calibrate => vec![Stage::Scan],
            Stage::Preprocess => vec![Stage::Calibrate, Stage::Phantom],
            Stage::Maps | Stage::TrainCae => vec![Stage::Preprocess],
            Stage::Lsci => vec![Stage::Phantom],
            Stage::Cluster => match self.cluster.bands {
                BandSource::Selected => vec![Stage::Preprocess, Stage::TrainCae],
                BandSource::Reference => vec![Stage::Preprocess],
            },
            Stage::Report => vec![Stage::Phantom, Stage::Preprocess, Stage::Maps, Stage::Lsci, Stage::Cluster],
        }
    }

    /// Hash of the settings a stage reads plus the hashes of its upstream
    /// stages, so editing one section only invalidates what depends on it.
    /// Referenced input files contribute their contents.
    pub fn stage_hash(&self, stage: Stage) -> Result<String> {
        let section = match stage {
            Stage::Phantom => serde_json::json!({ "seed": self.seed, "phantom": self.phantom }),
            Stage::Scan | Stage::Calibrate => serde_json::json!({ "raster": self.raster }),
            Stage::Preprocess => serde_json::json!({
                "preprocess": self.preprocess,
                "pairs": file_digest(self.preprocess.registration_pairs.as_deref())?,
            }),
            Stage::Maps => serde_json::json!({
                "maps": self.maps,
                "extinction": file_digest(self.maps.extinction_table.as_deref())?,
            }),
            Stage::Lsci => serde_json::json!({ "seed": self.seed, "lsci": self.lsci }),
            Stage::TrainCae => serde_json::json!({ "seed": self.seed, "cae": self.cae }),
            Stage::Cluster => serde_json::json!({ "seed": self.seed, "cluster": self.cluster }),
            Stage::Report => serde_json::Value::Null,
        };
        let upstream = self
            .upstream(stage)
            .into_iter()
            .map(|s| self.stage_hash(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(digest(&serde_json::json!({
            "stage": stage.command(),
            "section": section,
            "upstream": upstream,
        })))
    }
}

fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn file_digest(path: Option<&Path>) -> Result<Option<String>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let bytes = std::fs::read(p)
                .map_err(|e| Error::Parameter(format!("cannot read {}: {e}", p.display())))?;
            Ok(Some(hex::encode(Sha256::digest(&bytes))))
        }
    }
}
