//! Window preprocessing: standardization, autocorrelation, Haar wavelets
//! and principal components.

mod acf;
mod haar;
mod pca;
mod pipeline;
mod scaler;

pub use acf::acf;
pub use haar::{haar_dwt, haar_idwt, pad_to_pow2, HaarCoeffs};
pub use pca::PcaModel;
pub use pipeline::{feature_pipeline, FeatureOptions};
pub use scaler::Scaler;
