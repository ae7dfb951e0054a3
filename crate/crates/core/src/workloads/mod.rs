//! Ready-made analyses: CDFs, census histograms, range queries and a
//! categorical histogram.

pub mod cdf;
pub mod colors;
pub mod fixtures;
pub mod histogram;
pub mod range;

pub use cdf::{cdf_parallel, cdf_sequential, cdf_sequential_naive, Bins};
pub use colors::{color_histogram, color_histogram_leaky};
pub use histogram::{hierarchical_bottom_up, hierarchical_split, histogram, Level};
pub use range::{answer_range_workload, build_strategy, range_workload_alphas, Strategy, StrategyMatrix};
