//! Command-line front end: one subcommand per pipeline stage, all driven by
//! a single JSON configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use burnscope::{ErrorClass, Result};
use clap::{Args, Parser, Subcommand};

use artifacts::Stage;
use config::{BandSource, ClusterInput, ContrastMode, DtwiAnchors, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "burnscope", version, about = "Burn-assessment imaging pipeline on simulated phantoms")]
pub struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the ground-truth phantom on both spectrometer grids.
    Phantom,
    /// Simulate the raster scan: raw counts, dark/white references, ToF log.
    Scan,
    /// Distance-compensate and convert counts to reflectance.
    Calibrate,
    /// Merge, crop, mask and smooth.
    Preprocess,
    /// DTWI, StO2 and spectral-derivative maps.
    Maps(MapsArgs),
    /// Simulated speckle frames, contrast and perfusion.
    Lsci(LsciArgs),
    /// Train the VNIR and SWIR band selectors.
    TrainCae(TrainArgs),
    /// Spectral clustering of the down-selected cube.
    Cluster(ClusterArgs),
    /// Assemble JSON, CSV and PNG summaries.
    Report,
}

#[derive(Debug, Args, Default)]
pub struct MapsArgs {
    /// DTWI anchor for the wettest tissue.
    #[arg(long, requires = "s2")]
    pub s1: Option<f64>,
    /// DTWI anchor for the driest tissue.
    #[arg(long, requires = "s1")]
    pub s2: Option<f64>,
    /// StO2 fit window as `LO,HI` in nm.
    #[arg(long, value_parser = parse_window)]
    pub sto2_window: Option<(f64, f64)>,
}

#[derive(Debug, Args, Default)]
pub struct LsciArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ContrastMode>,
    /// Spatial window side length.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
}

/// Applied to both models.
#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub leaky_slope: Option<f64>,
    #[arg(long)]
    pub max_pixels: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ClusterArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
    #[arg(long)]
    pub smooth_radius: Option<usize>,
    #[arg(long, value_enum)]
    pub input: Option<ClusterInput>,
    #[arg(long, value_enum)]
    pub bands: Option<BandSource>,
}

impl Command {
    pub fn stage(&self) -> Stage {
        match self {
            Command::Phantom => Stage::Phantom,
            Command::Scan => Stage::Scan,
            Command::Calibrate => Stage::Calibrate,
            Command::Preprocess => Stage::Preprocess,
            Command::Maps(_) => Stage::Maps,
            Command::Lsci(_) => Stage::Lsci,
            Command::TrainCae(_) => Stage::TrainCae,
            Command::Cluster(_) => Stage::Cluster,
            Command::Report => Stage::Report,
        }
    }

    fn apply(&self, cfg: &mut PipelineConfig) {
        match self {
            Command::Maps(a) => {
                if let (Some(s1), Some(s2)) = (a.s1, a.s2) {
                    cfg.maps.dtwi = Some(DtwiAnchors { s1, s2 });
                }
                set(&mut cfg.maps.sto2_window_nm, a.sto2_window);
            }
            Command::Lsci(a) => {
                set(&mut cfg.lsci.mode, a.mode);
                set(&mut cfg.lsci.window, a.window);
                set(&mut cfg.lsci.frames, a.frames);
            }
            Command::TrainCae(a) => {
                for m in [&mut cfg.cae.vnir, &mut cfg.cae.swir] {
                    set(&mut m.epochs, a.epochs);
                    set(&mut m.learning_rate, a.learning_rate);
                    set(&mut m.batch_size, a.batch_size);
                    set(&mut m.t_start, a.t_start);
                    set(&mut m.t_end, a.t_end);
                    set(&mut m.val_fraction, a.val_fraction);
                    set(&mut m.leaky_slope, a.leaky_slope);
                }
                set(&mut cfg.cae.max_pixels, a.max_pixels);
            }
            Command::Cluster(a) => {
                set(&mut cfg.cluster.k, a.k);
                set(&mut cfg.cluster.max_n, a.max_n);
                set(&mut cfg.cluster.smooth_radius, a.smooth_radius);
                set(&mut cfg.cluster.input, a.input);
                set(&mut cfg.cluster.bands, a.bands);
            }
            _ => {}
        }
    }
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Effective configuration after applying file, global flags and
/// subcommand flags, in that order.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out_dir, cli.out.clone());
    cli.command.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

pub fn execute(cli: &Cli) -> Result<artifacts::Manifest> {
    let cfg = resolve_config(cli)?;
    commands::run_stage(&cfg, cli.command.stage())
}

/// Parses arguments, runs one stage and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(m) => {
            println!("{}: wrote {} files", m.command, m.files.len());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}
