//! Fourier-based transcription of periodic optimal control problems with
//! bang-bang edge correction.

pub mod edge;
pub mod error;
pub mod fourier;
pub mod nlp;
pub mod rates;
pub mod transcription;
pub mod uav;

pub use edge::{detect_edges, reconstruct, EdgeConfig, EdgeReport, LevelSource, PiecewiseConstant};
pub use error::{Error, Result};
pub use fourier::{EquispacedGrid, FourierInterpolant, IntegrationMatrix};
