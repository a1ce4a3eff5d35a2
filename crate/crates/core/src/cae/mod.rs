//! Concrete autoencoder band selection.

mod adam;
mod bands;
mod model;
mod selector;
mod synthetic;
mod train;

pub use adam::{adam_step, AdamState};
pub use bands::{downsample_to_bands, selected_bands, selected_indices, REFERENCE_BANDS_NM};
pub use model::{mse_loss, CaeModel, Gradients, HIDDEN_UNITS, SELECTED_PER_MODEL};
pub use selector::{concrete_forward, gumbel_from_uniform, sample_gumbel, ConcreteSelector};
pub use synthetic::{planted_bands, random_planted, PlantedDataset};
pub use train::{anneal_temperature, train, TrainConfig, TrainHistory, TrainedCae, MIN_PIXELS};
