//! Structured latent priors and Gaussian utilities.

mod gaussian;
mod pca;
mod prior;

pub use gaussian::{kl_gaussian, sample_gaussian, GaussianParams, VARIANCE_FLOOR};
pub use pca::{first_principal_component, pca_principal_dims};
pub use prior::{
    combine_region_means, init_sentiglove, init_sentiwordnet, prior_mean, read_glove, region_means, sentiment_prior_mean,
    AttributePrior, EmptyRegionPolicy, SentimentCluster, SENTIGLOVE_ANCHORS,
};
