//! Static privacy analysis: an upper bound on the ε a plan spends, and the
//! partition-safety check.
//!
//! Sequential steps add their ε. A partition costs the maximum over its
//! branches, since every branch sees a disjoint slice of the rows.

use std::fmt;

use thiserror::Error;

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::interp::{Interpreter, Mode};
use crate::model::{RegionId, StabilityFactor};
use crate::plan::{PlanValue, Query};

/// A partition branch touched a dataset from outside its own slice.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("partition safety violation at {path}: dataset from region {offending} used where region {expected} was required")]
pub struct SafetyViolation {
    pub path: String,
    pub offending: RegionId,
    pub expected: RegionId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    /// Upper bound on the plan's ε (0 for plans without aggregations).
    pub total: f64,
    /// Top-level contributions: one entry per sequential aggregation and
    /// one per partition (its maximum branch cost).
    pub breakdown: Vec<(String, f64)>,
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epsilon = {}", self.total)
    }
}

/// Statically bound the privacy cost of `query`. Never reads rows and never
/// samples noise.
pub fn budget<T: PlanValue>(query: &Query<T>) -> Result<BudgetReport> {
    let outcome = Interpreter::new(Mode::Symbolic).run_to_end(query.node())?;
    Ok(BudgetReport {
        total: outcome.spent,
        breakdown: outcome.breakdown,
    })
}

/// Budget of a plan builder applied to a fresh stability-1 handle.
pub fn budget_of<T, F>(build: F) -> Result<BudgetReport>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    budget(&build(DatasetHandle::symbolic(StabilityFactor::ONE)))
}

/// Run the region check alone.
pub fn check_partition_safety<T: PlanValue>(query: &Query<T>) -> std::result::Result<(), SafetyViolation> {
    match budget(query) {
        Ok(_) => Ok(()),
        Err(Error::Safety(v)) => Err(v),
        // other failures are not safety issues
        Err(_) => Ok(()),
    }
}

/// Correctly rounded running sum (Shewchuk's partials), so that splitting
/// a budget into equal parts and re-adding them gives back the original.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpsilonSum {
    partials: Vec<f64>,
}

impl EpsilonSum {
    pub(crate) fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub(crate) fn total(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even correction across the last two partials
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}
