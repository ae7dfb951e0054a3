//! Query plans for differentially private analyses, with static bounds on
//! the privacy budget they spend and the error of their results.
//!
//! A plan is a [`Query`] built from a [`DatasetHandle`]. The same plan can be
//! analysed without data ([`budget`], [`accuracy`]) or run on rows
//! ([`executor::eval`]).

pub mod accuracy;
pub mod data;
pub mod error;
pub mod executor;
mod interp;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod par;
pub mod plan;
pub mod privacy;
pub mod workloads;

pub use accuracy::{accuracy, accuracy_of, add, neg, norm_1, norm_2, norm_inf, rmsd, scale, AccuracyReport};
pub use data::{DatasetHandle, Datum, Record};
pub use error::{Error, Result};
pub use executor::{eval, eval_noiseless, RngState};
pub use model::{Alpha, Beta, Epsilon, ICdf, LabelId, Norm, NoisyValue, Payload, StabilityFactor};
pub use plan::{branch, sequence, BranchFn, KeyedResults, PlanValue, Query};
pub use privacy::{budget, budget_of, check_partition_safety, BudgetReport, SafetyViolation};
