//! One function per pipeline stage. Each reads its upstream artifacts,
//! refuses inputs from a different configuration, and writes its own
//! stage directory plus a manifest.

use std::path::Path;

use burnscope::acquisition::{
    counts_to_reflectance, generate_phantom_on, simulate_scan, swir_grid, tof_compensate, vnir_grid, PhantomSpec,
    RasterPlan, ReferencePair, TofLog, VNIR_RANGE_NM,
};
use burnscope::cae::{downsample_to_bands, selected_bands, selected_indices, train, REFERENCE_BANDS_NM};
use burnscope::cluster::{adjusted_rand_index, smooth_labels, subsample_and_extend};
use burnscope::lsci::{perfusion_index, spatial_contrast, temporal_contrast, write_frame_stack, FlowMap, SpeckleSim};
use burnscope::physio::{absorbance, calibrate_dtwi, class_means, dtwi, spectral_derivative, sto2, DtwiParams, ExtinctionTable};
use burnscope::preprocess::{
    fit_affine, mask_background, read_point_pairs, smooth_spectra, warp_labels, zscore_bands,
};
use burnscope::spectral::io::{
    read_cube_with_header, read_label_map_with_header, read_scalar_map_with_header, write_cube, write_label_map,
    write_scalar_map,
};
use burnscope::spectral::render::{label_csv, label_png, scalar_csv, scalar_png};
use burnscope::spectral::{crop_bands, merge_cubes, HyperCube, LabelMap, ScalarMap, LABEL_MASKED};
use burnscope::{Error, Result};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, write_json, Manifest, Stage, Workspace};
use crate::config::{stage_seed, BandSource, ClusterInput, ContrastMode, PipelineConfig};

/// Sub-seeds for the stochastic stages.
const SEED_LSCI: u64 = 3;
const SEED_CAE_VNIR: u64 = 4;
const SEED_CAE_SWIR: u64 = 5;
const SEED_CLUSTER: u64 = 6;
const SEED_CAE_PIXELS: u64 = 7;

fn load_cube(ws: &Workspace, stage: Stage, name: &str) -> Result<HyperCube> {
    let stem = ws.path(stage, name);
    let (cube, h) = read_cube_with_header(&stem)?;
    ws.check_header_hash(stage, &stem, h.config_hash.as_deref())?;
    Ok(cube)
}

fn load_labels(ws: &Workspace, stage: Stage, name: &str) -> Result<LabelMap> {
    let stem = ws.path(stage, name);
    let (map, h) = read_label_map_with_header(&stem)?;
    ws.check_header_hash(stage, &stem, h.config_hash.as_deref())?;
    Ok(map)
}

fn load_map(ws: &Workspace, stage: Stage, name: &str) -> Result<ScalarMap> {
    let stem = ws.path(stage, name);
    let (map, h) = read_scalar_map_with_header(&stem)?;
    ws.check_header_hash(stage, &stem, h.config_hash.as_deref())?;
    Ok(map)
}

fn require_upstream(cfg: &PipelineConfig, ws: &Workspace, stage: Stage) -> Result<()> {
    for up in cfg.upstream(stage) {
        ws.require(up)?;
    }
    Ok(())
}

fn raster_plan(cfg: &PipelineConfig) -> Result<RasterPlan> {
    let r = &cfg.raster;
    RasterPlan::for_grid(cfg.phantom.rows, cfg.phantom.cols, r.spot_mm, r.overlap, r.dwell_s)
}

pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<Manifest> {
    let ws = Workspace::for_config(cfg)?;
    require_upstream(cfg, &ws, stage)?;
    let dir = ws.begin(stage)?;
    let h = ws.hash(stage).to_string();
    let h = Some(h.as_str());
    match stage {
        Stage::Phantom => phantom(cfg, &dir, h)?,
        Stage::Scan => scan(cfg, &ws, &dir, h)?,
        Stage::Calibrate => calibrate(cfg, &ws, &dir, h)?,
        Stage::Preprocess => preprocess(cfg, &ws, &dir, h)?,
        Stage::Maps => maps(cfg, &ws, &dir, h)?,
        Stage::Lsci => lsci(cfg, &ws, &dir, h)?,
        Stage::TrainCae => train_cae(cfg, &ws, &dir)?,
        Stage::Cluster => cluster(cfg, &ws, &dir, h)?,
        Stage::Report => report(cfg, &ws, &dir)?,
    }
    ws.finish(stage)
}

fn phantom(cfg: &PipelineConfig, dir: &Path, h: Option<&str>) -> Result<()> {
    let spec = cfg.phantom_spec()?;
    let (vnir, labels) = generate_phantom_on(&spec, &vnir_grid()?, 0)?;
    let (swir, _) = generate_phantom_on(&spec, &swir_grid()?, 1)?;
    write_cube(&dir.join("vnir_truth"), &vnir, h)?;
    write_cube(&dir.join("swir_truth"), &swir, h)?;
    write_label_map(&dir.join("labels"), &labels, h)?;
    label_png(&dir.join("labels.png"), &labels)?;
    write_json(&dir.join("spec.json"), &spec)
}

fn scan(cfg: &PipelineConfig, ws: &Workspace, dir: &Path, h: Option<&str>) -> Result<()> {
    let spec: PhantomSpec = read_json(&ws.path(Stage::Phantom, "spec.json"))?;
    let plan = raster_plan(cfg)?;
    for name in ["vnir", "swir"] {
        let truth = load_cube(ws, Stage::Phantom, &format!("{name}_truth"))?;
        let (raw, refs, tof) = simulate_scan(&truth, &plan, &spec)?;
        write_cube(&dir.join(format!("{name}_counts")), &raw, h)?;
        refs.write_csv(&dir.join(format!("{name}_refs.csv")))?;
        // Both spectrometers share the gantry, so one log covers them.
        if name == "vnir" {
            tof.write_csv(&dir.join("tof.csv"))?;
        }
    }
    Ok(())
}

fn calibrate(cfg: &PipelineConfig, ws: &Workspace, dir: &Path, h: Option<&str>) -> Result<()> {
    let plan = raster_plan(cfg)?;
    let tof = TofLog::read_csv(&ws.path(Stage::Scan, "tof.csv"))?;
    for name in ["vnir", "swir"] {
        let raw = load_cube(ws, Stage::Scan, &format!("{name}_counts"))?;
        let refs = ReferencePair::read_csv(&ws.path(Stage::Scan, &format!("{name}_refs.csv")))?;
        let raw = if cfg.raster.tof_compensation {
            tof_compensate(&raw, &tof, &plan, &refs)?
        } else {
            raw
        };
        let r = counts_to_reflectance(&raw, &refs)?;
        write_cube(&dir.join(format!("{name}_reflectance")), &r, h)?;
    }
    Ok(())
}

fn preprocess(cfg: &PipelineConfig, ws: &Workspace, dir: &Path, h: Option<&str>) -> Result<()> {
    let p = &cfg.preprocess;
    let vnir = load_cube(ws, Stage::Calibrate, "vnir_reflectance")?;
    let swir = load_cube(ws, Stage::Calibrate, "swir_reflectance")?;
    let cube = merge_cubes(&vnir, &swir)?;
    let cube = crop_bands(&cube, p.crop_nm.0, p.crop_nm.1)?;
    let cube = mask_background(&cube, p.mask_low, p.mask_high)?;
    let cube = smooth_spectra(&cube, p.smooth_window, p.smooth_polyorder)?;
    let mut labels = load_labels(ws, Stage::Phantom, "labels")?;
    if let Some(pairs) = &p.registration_pairs {
        let t = fit_affine(&read_point_pairs(pairs)?)?;
        labels = warp_labels(&labels, &t)?;
    }
    let labels = labels.with_mask(cube.mask())?;
    write_cube(&dir.join("cube"), &cube, h)?;
    write_label_map(&dir.join("labels"), &labels, h)
}

fn maps(cfg: &PipelineConfig, ws: &Workspace, dir: &Path, h: Option<&str>) -> Result<()> {
    let m = &cfg.maps;
    let cube = load_cube(ws, Stage::Preprocess, "cube")?;
    let labels = load_labels(ws, Stage::Preprocess, "labels")?;
    let a = absorbance(&cube)?;
    let params = match m.dtwi {
        Some(anchors) => DtwiParams::new(anchors.s1, anchors.s2)?,
        None => calibrate_dtwi(&a, &labels, 0, labels.k().saturating_sub(1))?,
    };
    let table = match &m.extinction_table {
        Some(path) => ExtinctionTable::from_csv(path)?,
        None => ExtinctionTable::builtin(),
    };
    let d = dtwi(&a, &params)?;
    let s = sto2(&a, &table, m.sto2_window_nm)?;
    let deriv = spectral_derivative(&a, m.derivative.order, m.derivative.window, m.derivative.polyorder)?;
    write_scalar_map(&dir.join("dtwi"), &d, h)?;
    write_scalar_map(&dir.join("sto2"), &s, h)?;
    write_cube(&dir.join("derivative"), &deriv, h)?;
    scalar_png(&dir.join("dtwi.png"), &d)?;
    scalar_png(&dir.join("sto2.png"), &s)?;
    write_json(&dir.join("dtwi_params.json"), &params)
}

fn lsci(cfg: &PipelineConfig, ws: &Workspace, dir: &Path, h: Option<&str>) -> Result<()> {
    let l = &cfg.lsci;
    let labels = load_labels(ws, Stage::Phantom, "labels")?;
    // Fiducials are static markers.
    let flow: Vec<f64> = labels
        .labels()
        .iter()
        .map(|&c| if c == LABEL_MASKED { 0.0 } else { l.class_flow[c as usize] })
        .collect();
    let flow = FlowMap::new(labels.rows(), labels.cols(), flow)?;
    let sim = SpeckleSim {
        exposure_s: l.exposure_s,
        rate_hz: l.rate_hz,
        ..SpeckleSim::default()
    };
    let stack = sim.simulate(&flow, l.frames, stage_seed(cfg.seed, SEED_LSCI))?;
    let k = match l.mode {
        ContrastMode::Temporal => temporal_contrast(&stack)?,
        ContrastMode::Spatial => spatial_contrast(&stack, l.window)?,
    };
    let perf = perfusion_index(&k)?;
    write_frame_stack(&dir.join("frames"), &stack, h)?;
    write_scalar_map(&dir.join("contrast"), &k, h)?;
    write_scalar_map(&dir.join("perfusion"), &perf, h)?;
    scalar_png(&dir.join("perfusion.png"), &perf)
}

/// Summary of the two trained band selectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub bands_nm: Vec<f64>,
    pub vnir_indices: Vec<usize>,
    pub swir_indices: Vec<usize>,
    pub training_pixels: usize,
    pub vnir_val_loss: Option<f64>,
    pub swir_val_loss: Option<f64>,
}

/// Splits the merged cube at the VNIR/SWIR seam.
pub fn split_at_seam(cube: &HyperCube) -> Result<(HyperCube, HyperCube)> {
    let w = cube.grid().as_slice();
    let split = w.iter().position(|&x| x > VNIR_RANGE_NM.1).unwrap_or(w.len());
    if split == 0 || split == w.len() {
        return Err(Error::Data(format!(
            "band selection needs bands on both sides of {} nm",
            VNIR_RANGE_NM.1
        )));
    }
    Ok((
        crop_bands(cube, w[0], w[split - 1])?,
        crop_bands(cube, w[split], w[w.len() - 1])?,
    ))
}

fn train_cae(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let cube = load_cube(ws, Stage::Preprocess, "cube")?;
    let (vnir, swir) = split_at_seam(&cube)?;
    let tissue: Vec<usize> = cube.tissue_pixels().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.seed, SEED_CAE_PIXELS));
    let mut pick = if tissue.len() > cfg.cae.max_pixels {
        sample(&mut rng, tissue.len(), cfg.cae.max_pixels)
            .into_iter()
            .map(|i| tissue[i])
            .collect()
    } else {
        tissue
    };
    pick.sort_unstable();
    let rows = |c: &HyperCube| -> Vec<Vec<f64>> { pick.iter().map(|&p| c.spectrum(p).to_vec()).collect() };
    let a = train(&rows(&vnir), &cfg.cae.vnir.train_config(stage_seed(cfg.seed, SEED_CAE_VNIR)))?;
    let b = train(&rows(&swir), &cfg.cae.swir.train_config(stage_seed(cfg.seed, SEED_CAE_SWIR)))?;
    a.save(&dir.join("vnir_model.json"))?;
    b.save(&dir.join("swir_model.json"))?;
    let report = BandReport {
        bands_nm: selected_bands(&a.model, vnir.grid(), &b.model, swir.grid())?,
        vnir_indices: selected_indices(&a.model)?,
        swir_indices: selected_indices(&b.model)?,
        training_pixels: pick.len(),
        vnir_val_loss: a.history.val_loss.last().copied(),
        swir_val_loss: b.history.val_loss.last().copied(),
    };
    write_json(&dir.join("bands.json"), &report)
}

/// Cluster metrics written next to the label maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub k: usize,
    pub input: ClusterInput,
    pub bands_nm: Vec<f64>,
    pub ari: f64,
    pub ari_smoothed: f64,
}

/// Renames cluster ids so each is matched to the truth class it overlaps
/// most (greedy on the overlap table), which keeps PNG colors aligned
/// with the legend. Unmatched clusters get the remaining ids.
pub fn align_to_truth(labels: &LabelMap, truth: &LabelMap) -> Result<LabelMap> {
    let k = labels.k() as usize;
    let kt = truth.k() as usize;
    let mut overlap = vec![vec![0usize; kt]; k];
    for i in 0..labels.labels().len() {
        let (a, b) = (labels.labels()[i], truth.labels()[i]);
        if labels.mask()[i] && truth.mask()[i] && b != LABEL_MASKED {
            overlap[a as usize][b as usize] += 1;
        }
    }
    let mut pairs: Vec<(usize, usize, usize)> = (0..k)
        .flat_map(|c| (0..kt).map(move |t| (c, t)))
        .map(|(c, t)| (overlap[c][t], c, t))
        .collect();
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut map = vec![None; k];
    let mut taken = vec![false; k.max(kt)];
    for (_, c, t) in pairs {
        if map[c].is_none() && !taken[t] {
            map[c] = Some(t);
            taken[t] = true;
        }
    }
    for m in map.iter_mut() {
        if m.is_none() {
            let free = taken.iter().position(|t| !t).expect("enough ids");
            taken[free] = true;
            *m = Some(free);
        }
    }
    let relabeled = labels
        .labels()
        .iter()
        .map(|&l| if l == LABEL_MASKED { l } else { map[l as usize].unwrap() as u16 })
        .collect();
    LabelMap::new(labels.rows(), labels.cols(), relabeled, labels.mask().to_vec(), labels.k())
}

fn cluster(cfg: &PipelineConfig, ws: &Workspace, dir: &Path, h: Option<&str>) -> Result<()> {
    let c = &cfg.cluster;
    let cube = load_cube(ws, Stage::Preprocess, "cube")?;
    let truth = load_labels(ws, Stage::Preprocess, "labels")?;
    let bands_nm = match c.bands {
        BandSource::Selected => read_json::<BandReport>(&ws.path(Stage::TrainCae, "bands.json"))?.bands_nm,
        BandSource::Reference => REFERENCE_BANDS_NM.to_vec(),
    };
    let mut x = downsample_to_bands(&cube, &bands_nm)?;
    if c.input == ClusterInput::Zscore {
        x = zscore_bands(&x)?;
    }
    let raw = subsample_and_extend(&x, c.max_n, c.k, stage_seed(cfg.seed, SEED_CLUSTER))?;
    let labels = align_to_truth(&raw, &truth)?;
    let smoothed = smooth_labels(&labels, c.smooth_radius)?;
    let metrics = ClusterMetrics {
        k: c.k,
        input: c.input,
        bands_nm,
        ari: adjusted_rand_index(&labels, &truth)?,
        ari_smoothed: adjusted_rand_index(&smoothed, &truth)?,
    };
    write_label_map(&dir.join("labels"), &labels, h)?;
    write_label_map(&dir.join("labels_smoothed"), &smoothed, h)?;
    label_png(&dir.join("labels.png"), &smoothed)?;
    write_json(&dir.join("metrics.json"), &metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: u16,
    pub name: String,
    pub pixels: usize,
    pub dtwi: Option<f64>,
    pub sto2: Option<f64>,
    pub perfusion: Option<f64>,
}

/// Top-level run summary. Contains no timestamps so reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub seed: u64,
    pub bands_nm: Vec<f64>,
    pub dtwi_params: DtwiParams,
    pub classes: Vec<ClassSummary>,
    pub ari: f64,
    pub ari_smoothed: f64,
}

fn report(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let spec: PhantomSpec = read_json(&ws.path(Stage::Phantom, "spec.json"))?;
    let truth = load_labels(ws, Stage::Preprocess, "labels")?;
    let d = load_map(ws, Stage::Maps, "dtwi")?;
    let s = load_map(ws, Stage::Maps, "sto2")?;
    let perf = load_map(ws, Stage::Lsci, "perfusion")?;
    let params: DtwiParams = read_json(&ws.path(Stage::Maps, "dtwi_params.json"))?;
    let metrics: ClusterMetrics = read_json(&ws.path(Stage::Cluster, "metrics.json"))?;
    let clusters = load_labels(ws, Stage::Cluster, "labels_smoothed")?;

    let (dm, sm) = (class_means(&d, &truth)?, class_means(&s, &truth)?);
    // Perfusion is imaged without the spectral background mask.
    let phantom_labels = load_labels(ws, Stage::Phantom, "labels")?;
    let pm = class_means(&perf, &phantom_labels)?;
    let hist = truth.histogram();
    let classes: Vec<ClassSummary> = (0..truth.k() as usize)
        .map(|c| ClassSummary {
            class: c as u16,
            name: spec.classes.get(c).map(|t| t.name.clone()).unwrap_or_default(),
            pixels: hist[c],
            dtwi: dm[c],
            sto2: sm[c],
            perfusion: pm[c],
        })
        .collect();

    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut csv = String::from("class,name,pixels,dtwi,sto2,perfusion\n");
    for c in &classes {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.class,
            c.name,
            c.pixels,
            fmt(c.dtwi),
            fmt(c.sto2),
            fmt(c.perfusion)
        ));
    }
    std::fs::write(dir.join("class_means.csv"), csv).map_err(|e| crate::artifacts::io_err(dir, e))?;

    scalar_png(&dir.join("dtwi.png"), &d)?;
    scalar_png(&dir.join("sto2.png"), &s)?;
    scalar_png(&dir.join("perfusion.png"), &perf)?;
    label_png(&dir.join("clusters.png"), &clusters)?;
    label_png(&dir.join("truth.png"), &truth)?;
    scalar_csv(&dir.join("dtwi.csv"), &d)?;
    label_csv(&dir.join("clusters.csv"), &clusters)?;

    let report = Report {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        bands_nm: metrics.bands_nm,
        dtwi_params: params,
        classes,
        ari: metrics.ari,
        ari_smoothed: metrics.ari_smoothed,
    };
    write_json(&dir.join("report.json"), &report)
}
