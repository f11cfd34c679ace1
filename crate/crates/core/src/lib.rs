//! Federated sliced inverse regression under (ε, δ)-differential privacy.
//!
//! Clients release perturbed slice means and second-moment matrices once; the
//! server merges them and recovers the central subspace. High-dimensional
//! problems first reduce the covariates with a majority-vote screening round.

pub mod data;
pub mod dp;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod numerics;
pub mod screening;
pub mod simgen;
pub mod trace;

pub use data::{LabeledDataset, Slicing};
pub use dp::{MechanismKind, PrivacyBudget, VgmBound};
pub use error::{FsirError, Result};
pub use federation::{run_fsir, DeltaRule, FsirConfig, FsirOutcome, HighDimMode, Mechanism, SubspaceEstimate};
pub use numerics::{Matrix, SeededRng};
pub use screening::{ActiveSet, Threshold, VoteUnit};
