//! Tensors, random streams, PCA and k-means.

mod kmeans;
mod pca;
mod rng;
mod tensor;

pub use kmeans::{kmeans, KMeansModel, MAX_ITERATIONS as KMEANS_MAX_ITERATIONS};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use rng::RngStream;
pub use tensor::Tensor;

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
