//! Subspace clustering with a closed-form symmetric low-rank representation.
//!
//! The pipeline takes a data matrix whose columns are samples, replaces it
//! with a low-rank surrogate ([`recovery`]), computes the symmetric
//! representation `Z = (AᵀA + λI)⁻¹AᵀA` ([`slrr`]), turns the angular
//! structure of `Z`'s factor into an affinity graph ([`affinity`]) and
//! partitions that graph by normalized spectral clustering ([`spectral`]).

pub mod affinity;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod pipeline;
pub mod recovery;
pub mod slrr;
pub mod spectral;

pub use dataset::{DataMatrix, LabelVector, Layout, SynthSpec};
pub use error::{Error, Result};
pub use pipeline::{PipelineConfig, RankSpec};
pub use recovery::{Recovery, RecoveryMethod, RpcaConfig};
pub use slrr::Representation;
