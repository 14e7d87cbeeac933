//! Soft-margin SVMs trained with SMO and their three-zone combinations.

mod grid;
mod kernel;
mod model;
mod multiclass;
mod smo;

pub use grid::{grid_search, grid_search_decoders, select_best, GridCell, GridOutcome, GridSpec};
pub use kernel::{rbf_kernel, squared_distance, Gram, Kernel, SquaredDistances};
pub use model::BinarySvmModel;
pub use multiclass::{Decoder, Strategy, VotingTable, ZoneClassifier, OAO_PAIRS};
pub use smo::{dual_objective, smo_solve, SmoParams, SmoSolution};
