//! Fuzzy c-means segmentation of scalar volumes with neighborhood
//! attraction, swarm-tuned attraction strengths and a benchmark harness.
//!
//! The algorithm family, from simplest to richest:
//!
//! * [`fuzzy::fcm`] and [`fuzzy::modified_fcm`]: plain FCM, the latter seeded
//!   from a Gaussian mixture fit.
//! * [`pipelines::ifcm_run`]: FCM with attraction-scaled distances at fixed
//!   strengths.
//! * [`pipelines::ifcmpso_run`] / [`pipelines::gaifcm_run`]: strengths tuned
//!   by particle swarm or a genetic algorithm on a single slice.
//! * [`pipelines::pifcm3d_run`]: swarm-tuned attraction that reads shells of
//!   neighbors from the adjacent slices of a volume.

pub mod attraction;
pub mod bench;
pub mod error;
pub mod fuzzy;
pub mod gmm;
pub mod metrics;
pub mod noise;
pub mod optim;
pub mod phantom;
pub mod pipelines;
pub mod volume;

pub use attraction::{
    build_shell_table, decay_weights, ifcm_step, neighborhood_2d, AttractionDomain,
    AttractionParams, ShellTable, WeightVector,
};
pub use error::{Error, Result};
pub use fuzzy::{fcm, modified_fcm, ClusterSet, FcmConfig, FcmInit, MembershipMatrix};
pub use metrics::{defuzzify, error_counts, relative_improvement, ClusterErrorCounts, IncsVariant};
pub use noise::{add_noise, NoiseKind, NoiseSpec};
pub use optim::{ga_minimize, pso_minimize, GaConfig, PsoConfig};
pub use phantom::{generate_phantom, PhantomSpec};
pub use pipelines::{Algorithm, PipelineConfig, SegmentationResult};
pub use volume::{Axis, Dims, LabelVolume, SliceRef, Volume};
