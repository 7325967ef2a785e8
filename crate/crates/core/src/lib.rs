//! Copula-aligned multi-relational graph attention for few-shot subject
//! classification.
//!
//! The pipeline builds, per episode, one directed similarity graph per
//! feature modality (risk factors, cognitive scores, MRI): features are
//! rank-Gaussianized into the copula domain, covariances are stabilized
//! with Ledoit-Wolf shrinkage, pairwise squared Mahalanobis distances
//! become inverse-distance edge weights, and KNN plus threshold gating
//! sparsify the result. A two-layer relational attention network with
//! node-wise gated modality fusion classifies the episode's query
//! subject; training is episodic with a focal objective and inference is
//! fully inductive. Everything is deterministic given a seed.
//!
//! Modules follow the pipeline: [`numeric`] (matrices, special
//! functions, random streams, reverse-mode tape), [`data`] (records,
//! CSV, synthetic cohorts), [`copula`], [`graph`], [`model`], [`train`],
//! [`metrics`] (including DeepROC interval analysis), and [`explain`]
//! (gating/attention exports). The `mrcgat` binary wires them into
//! `synth`, `train`, `eval`, `infer`, and `explain` subcommands.

pub mod copula;
pub mod data;
pub mod error;
pub mod explain;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod train;

pub use error::{Error, Result};
