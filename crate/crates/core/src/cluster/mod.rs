//! Unsupervised analysis: PCA, t-SNE, k-means, GMM, cosine spectral
//! clustering, label smoothing and agreement scoring.

mod gmm;
mod kmeans;
mod labels;
mod pca;
mod spectral;
mod tsne;

pub use gmm::{gmm_em, GmmResult, GMM_MAX_ITER, GMM_RIDGE, GMM_TOL};
pub use kmeans::{kmeans, kmeans_restarts, KMeansResult, KMEANS_MAX_ITER, KMEANS_TOL};
pub use labels::{adjusted_rand_index, ari_slices, smooth_labels};
pub use pca::{pca_fit, PcaModel};
pub use spectral::{
    cosine_affinity, spectral_cluster, spectral_cluster_cosine, subsample_and_extend, AffinityMatrix, KMEANS_RESTARTS,
    DEFAULT_MAX_SAMPLES,
};
pub use tsne::{tsne_embed, TSNE_MAX_POINTS};
