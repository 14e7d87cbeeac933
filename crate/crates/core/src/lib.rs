//! Fault-zone detection for distance relays on series-compensated
//! transmission lines.
//!
//! The crate covers the whole chain from tower geometry to a zone decision:
//!
//! * [`lineparam`] turns conductor layouts into per-km phase matrices.
//! * [`emtsim`] runs trapezoidal-rule transients of the two-source network
//!   with a series capacitor and applies faults.
//! * [`wavefeat`] takes one post-fault cycle of the relay currents through a
//!   single-level db2 transform and keeps the detail band.
//! * [`svm`] trains soft-margin RBF SVMs with SMO and combines them into
//!   one-against-all or one-against-one zone classifiers.
//! * [`casegen`] enumerates the experiment grids and training splits.
//! * [`report`] and [`pipeline`] glue everything into reproducible runs.

pub mod casegen;
pub mod emtsim;
pub mod error;
pub mod linalg;
pub mod lineparam;
pub mod pipeline;
pub mod report;
pub mod svm;
pub mod wavefeat;

pub use error::{Error, ErrorKind, Result};

/// Nominal power frequency of the studied system.
pub const SYSTEM_FREQUENCY_HZ: f64 = 50.0;
