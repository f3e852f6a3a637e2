//! Point-cloud generators on homogeneous spaces and a benchmark harness for
//! intrinsic-dimension estimators.
//!
//! Clouds are sampled by pushing Haar-random group elements through
//! polynomial embeddings of Stiefel, Grassmann and flag manifolds, plus a
//! qudit Pauli-invariant family and simple baselines. Every random draw
//! comes from a labelled stream derived from one master seed, so results do
//! not depend on the number of worker threads.

pub mod analysis;
pub mod cloud;
pub mod error;
pub mod estimators;
pub mod fractal;
pub mod harness;
pub mod linalg;
pub mod manifolds;
pub mod neighbors;
pub mod perturb;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use estimators::{run_estimator, Estimator, LidResult};
pub use manifolds::{Family, ManifoldSpec};
