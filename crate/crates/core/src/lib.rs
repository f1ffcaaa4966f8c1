//! Streaming estimation of partial-transpose moments from randomized Pauli
//! measurements, with an entanglement certificate built on the signs of the
//! elementary symmetric polynomials of the PT spectrum.
//!
//! The pipeline is
//!
//! ```text
//! states ─► sampler ─► kernel ─► estimators ─► certify
//!                                    ▲
//!                                 runner (config, stopping rule, export)
//! ```
//!
//! * [`states`]: Werner states, generic partial transpose, exact oracles.
//! * [`sampler`]: Born-rule sampling of classical-shadow snapshots.
//! * [`kernel`]: trace products of partially transposed snapshots.
//! * [`estimators`]: U-statistic, plug-in, batched and two online estimators.
//! * [`certify`]: Newton–Girard conversion, PPT hierarchy, Descartes bound.
//! * [`runner`]: experiment orchestration behind the `ptmoments` CLI.

pub mod certify;
pub mod combin;
pub mod error;
pub mod estimators;
pub mod kernel;
pub mod runner;
pub mod sampler;
pub mod states;

pub use error::{Error, Result};
pub use sampler::{Axis, Outcome, ShadowRecord, Snapshot};
pub use states::{Bipartition, DensityMatrix, PtSpectrum};
