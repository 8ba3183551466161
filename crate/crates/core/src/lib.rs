//! Small feedforward classifiers, feature attribution methods, and
//! Feature Attribution Dropping (FAD) curve evaluation.
//!
//! The crate is organised bottom-up:
//!
//! - [`nncore`]: dense network engine (GELU hidden layers, softmax output,
//!   exact backpropagation, Adam, seeded training).
//! - [`losses`]: intent cross-entropy, masked sequence NLL and their
//!   linear interpolation.
//! - [`attribution`]: baselines, integrated gradients, exact and sampled
//!   Shapley values, importance rankings.
//! - [`fadcurve`]: feature dropping, FAD curves, trapezoidal AUC and N-AUC.
//! - [`matcher`]: cosine-similarity concept assignment with a rejection
//!   threshold.
//! - [`pipeline`]: datasets, stratified folds, metrics, synthetic
//!   "vital few" data and the end-to-end FAD analysis.
//! - [`report`]: CSV/JSON/Markdown tables and SVG curve plots.

pub mod attribution;
pub mod error;
pub mod fadcurve;
pub mod losses;
pub mod matcher;
pub mod nncore;
pub mod numeric;
pub mod pipeline;
pub mod report;

pub use error::{FadError, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
