//! Prior analysis: PCA, descriptor importance, linear reconstruction and
//! magnitude correlation.

pub mod corr;
pub mod dia;
pub mod linalg;
pub mod lra;
pub mod pca;

pub use corr::{magnitude_correlation, CorrelationMatrix};
pub use dia::{descriptor_importance, gradient_map, orthogonal_energy, DescriptorImportance, ImportanceReport};
pub use linalg::Mat;
pub use lra::{lra, ridge_solve, Lra, LraReport};
pub use pca::{fit_pca, pixel_matrix, PcaModel};
