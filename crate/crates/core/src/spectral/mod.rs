//! Data model for spectra and datacubes plus the on-disk formats.

mod cube;
mod grid;
pub mod io;
mod maps;
mod ops;
pub mod render;

pub use cube::{HyperCube, Quantity};
pub use grid::{WavelengthGrid, ENVELOPE_NM};
pub use maps::{LabelMap, ScalarMap, LABEL_MASKED};
pub use ops::{crop_bands, merge_cubes, resample_to_grid, MERGED_RANGE_NM};
pub(crate) use ops::select_bands;
