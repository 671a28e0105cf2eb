//! Regression of epoched multichannel signals on word-level predictors.
//!
//! Per-subject least squares at every channel and sample, a group t test
//! with cluster-mass permutation correction, region-of-interest averages
//! compared by likelihood-ratio tests, and a synthetic epoch generator.

pub mod cluster;
pub mod design;
pub mod epochs;
pub mod error;
pub mod fit;
pub mod lrt;
pub mod montage;
pub mod synth;

pub use cluster::{cluster_permutation_test, ClusterConfig, ClusterResult, ClusterTest, Polarity};
pub use design::{build_design, permute_design, DesignMatrix, Ols};
pub use epochs::{EpochMeta, EpochSet};
pub use error::{ErpError, Result};
pub use fit::{fit_pointwise, PointwiseFit};
pub use lrt::{ks_uniform, lrt_compare, LrtResult};
pub use montage::{grid16, roi_average, standard61, Adjacency, Montage, Region};
pub use synth::{synth_epochs, Effect, Stimuli, Stimulus, SynthSpec};
