//! Joint discriminative clustering and feature selection.
//!
//! A skip-connected network is trained to maximise a GEMINI objective while a
//! group penalty on the skip weights prunes input features along a
//! regularisation path.

pub mod benchmark;
pub mod datagen;
pub mod error;
pub mod gemini;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod path;
pub mod sparsity;

pub use error::{Error, Result};
pub use gemini::{Distance, GeminiSpec, Mode};
pub use path::{fit_path, predict, select_model, PathConfig, PathResult, Regime};
