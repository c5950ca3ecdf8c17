//! Reference methods the learned model is compared against: per-field
//! LASSO regression onto the dictionary, and PCA of raw fields.

mod lasso;
mod pca;

pub use lasso::{lasso_fit, soft_threshold, LassoConfig, LassoDesign, LassoFit};
pub use pca::{pca_fit, pca_fit_rows, PcaBasis};
