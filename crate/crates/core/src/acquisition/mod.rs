//! Raster-scan acquisition simulation, distance compensation, calibration
//! and ground-truth phantoms.

mod phantom;
mod raster;
mod scan;
mod spectrometer;

pub use phantom::{
    generate_phantom, generate_phantom_on, Chromophore, ChromophoreWeights, Fiducial, Layout, Lobe, PhantomSpec,
    TissueClass, CLASS_NAMES, FIDUCIAL_REFLECTANCE,
};
pub use raster::{plan_raster, RasterPlan, ScanPosition, Traversal};
pub use scan::{
    counts_to_reflectance, simulate_scan, tof_compensate, ReferencePair, TofLog, MAX_TOF_GAP_S, RAIL_HALF_TRAVEL_MM,
    TOF_RATE_HZ,
};
pub use spectrometer::{swir_grid, vnir_grid, SWIR_BANDS, SWIR_RANGE_NM, VNIR_BANDS, VNIR_RANGE_NM};
