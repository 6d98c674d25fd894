//! Multilevel clustering of grouped data with Wasserstein means.
//!
//! Groups of observations are summarized by local discrete measures, which
//! are in turn clustered around a small set of global measures. Two
//! algorithms are provided: [`mwm`] with free local supports and [`mwms`]
//! where every local measure lives on one shared atom set.

pub mod barycenter;
pub mod baseline;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod measures;
pub mod metrics;
pub mod mwm;
pub mod mwms;
mod par;
pub mod rng;
pub mod synthdata;
pub mod transport;

pub use error::{Error, Result};
pub use barycenter::{fixed_support_weights, free_support_barycenter, Barycenter, BarycenterOptions, BarycenterProblem};
pub use baseline::three_stage_kmeans;
pub use kmeans::{lloyd, quantize, KmeansResult};
pub use measures::{empirical_measure, make_measure, DiscreteMeasure, GroupedDataset, Point};
pub use metrics::{cluster_agreement, min_matching, w_to_truth, AgreementKind};
pub use mwm::{
    assign_groups, global_update, local_update, mwm_init, mwm_objective, mwm_run, Method, MultilevelConfig,
    MultilevelResult, MultilevelState,
};
pub use mwms::{local_weight_update, mwms_run, support_update, MwmsConfig, SharedSupport};
pub use synthdata::{generate_lc, generate_nc, sample_data, GenParams, Preset, SyntheticTruth, VarianceMode};
pub use transport::{
    cost_matrix, exact_coupling, sinkhorn_coupling, wasserstein2, CostMatrix, Coupling, TransportMethod,
    TransportPolicy,
};
