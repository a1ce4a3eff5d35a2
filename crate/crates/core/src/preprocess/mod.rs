//! Registration, masking, smoothing and the two normalizations that precede
//! all downstream analysis.

mod affine;
mod mask;
mod normalize;
mod savgol;
mod warp;

pub use affine::{fit_affine, read_point_pairs, AffineTransform2D, PointPair};
pub use mask::{mask_background, MASK_WINDOW_NM};
pub use normalize::{band_statistics, clip_reflectance, l2_normalize, zscore_bands, zscore_columns};
pub(crate) use savgol::derivative as sg_derivative;
pub use savgol::{smooth_spectra, smooth_spectra_regional, SgFilter, WindowRegion};
pub use warp::{warp_labels, warp_scalar};
