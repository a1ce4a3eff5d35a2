//! Benchmark fixtures shared by the criterion targets.

use burnscope::acquisition::{generate_phantom_on, swir_grid, vnir_grid, PhantomSpec};
use burnscope::spectral::{merge_cubes, HyperCube, LabelMap};

/// Reference phantom on the merged VNIR+SWIR grid.
pub fn phantom(side: usize) -> (HyperCube, LabelMap) {
    let spec = PhantomSpec::reference(side, side, 1);
    let (v, labels) = generate_phantom_on(&spec, &vnir_grid().unwrap(), 0).unwrap();
    let (s, _) = generate_phantom_on(&spec, &swir_grid().unwrap(), 1).unwrap();
    (merge_cubes(&v, &s).unwrap(), labels)
}
