//! Step-size tuning by learning-to-learn: quadratic and least-squares inner
//! tasks, inner GD/SGD trajectories with norm truncation, meta-gradients for
//! the quadratic setting, and train-by-train / train-by-validation
//! meta-objectives with grid search and fresh-task evaluation.
//!
//! All sampling is driven by explicit seeds through [`rng`], so every result
//! is reproducible and independent of thread scheduling.

pub mod error;
pub mod inner_optimizer;
pub mod linalg;
pub mod ls_meta;
pub mod quad_meta;
pub mod rng;
pub mod task_models;

pub use error::{Error, Result};
