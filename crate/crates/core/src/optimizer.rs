//! Brute-force search for the smallest ε that meets an error tolerance.
//!
//! Probes ε = minEps, minEps + Δ, minEps + 2Δ, … and stops at the first
//! probe whose static error bound at β is within tolerance. The search never
//! executes a plan; it only runs the accuracy analysis.

use std::fmt;

use crate::accuracy::accuracy;
use crate::error::{Error, Result};
use crate::model::{Alpha, Beta, Epsilon, NoisyValue};
use crate::par::{self, Parallelism};
use crate::plan::Query;

/// A plan parameterised by the ε it spends.
pub type Analysis = Box<dyn Fn(Epsilon) -> Query<NoisyValue> + Send + Sync>;

// probes are snapped to this grid so that minEps + kΔ lands on the decimal
// values one would type
const GRID: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct OptimizerInput {
    /// Largest ε an analysis may use.
    pub bud_total: Epsilon,
    pub min_eps: Epsilon,
    pub delta: Epsilon,
    pub beta: Beta,
    pub error_tol: Alpha,
    /// Maximum number of probes.
    pub iter: usize,
}

impl OptimizerInput {
    /// Defaults: minEps = 0.01, Δ = 0.05, 1000 probes.
    pub fn new(bud_total: Epsilon, beta: Beta, error_tol: Alpha) -> Result<Self> {
        let input = OptimizerInput {
            bud_total,
            min_eps: Epsilon::new(0.01)?,
            delta: Epsilon::new(0.05)?,
            beta,
            error_tol,
            iter: 1000,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iter == 0 {
            return Err(Error::contract("optimizer needs at least one iteration"));
        }
        if self.bud_total.value() < self.min_eps.value() {
            return Err(Error::contract(format!(
                "budget {} is below the starting epsilon {}",
                self.bud_total, self.min_eps
            )));
        }
        Ok(())
    }

    fn probe(&self, k: usize) -> f64 {
        snap(self.min_eps.value() + k as f64 * self.delta.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Success,
    MaxIteration,
    MaxBudget,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeKind::Success => "Success",
            OutcomeKind::MaxIteration => "MaxIter",
            OutcomeKind::MaxBudget => "MaxBud",
        })
    }
}

/// Result of a search: the last ε probed and its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOutcome {
    pub kind: OutcomeKind,
    pub epsilon: Epsilon,
    pub alpha: Alpha,
}

/// Find the smallest probe ε whose error bound is at most the tolerance.
///
/// When the next grid point would overshoot the budget, the budget itself is
/// probed last. Errors from the accuracy analysis (a safety violation, say)
/// are returned as is.
pub fn iterate_error<F>(prog: F, input: &OptimizerInput) -> Result<OptimizerOutcome>
where
    F: Fn(Epsilon) -> Query<NoisyValue>,
{
    input.validate()?;
    let bud = input.bud_total.value();
    let mut k = 0;
    let mut eps = input.probe(0);
    let mut probes = 0;
    loop {
        let e = Epsilon::new(eps)?;
        let alpha = accuracy(&prog(e), input.beta)?.alpha;
        let outcome = |kind| OptimizerOutcome {
            kind,
            epsilon: e,
            alpha,
        };
        if alpha <= input.error_tol {
            return Ok(outcome(OutcomeKind::Success));
        }
        probes += 1;
        if probes >= input.iter {
            return Ok(outcome(OutcomeKind::MaxIteration));
        }
        let next = input.probe(k + 1);
        if next <= bud {
            k += 1;
            eps = next;
        } else if eps < bud {
            eps = bud;
        } else {
            return Ok(outcome(OutcomeKind::MaxBudget));
        }
    }
}

/// Split the budget evenly across `analyses` and search each one against
/// its own tolerance.
pub fn choose_eps(analyses: &[Analysis], input: &OptimizerInput, tolerances: &[Alpha]) -> Result<Vec<OptimizerOutcome>> {
    choose_eps_with(analyses, input, tolerances, Parallelism::default())
}

pub fn choose_eps_with(
    analyses: &[Analysis],
    input: &OptimizerInput,
    tolerances: &[Alpha],
    parallelism: Parallelism,
) -> Result<Vec<OptimizerOutcome>> {
    if analyses.len() != tolerances.len() {
        return Err(Error::contract(format!(
            "{} analyses but {} tolerances",
            analyses.len(),
            tolerances.len()
        )));
    }
    if analyses.is_empty() {
        return Ok(Vec::new());
    }
    let local = OptimizerInput {
        bud_total: Epsilon::new(input.bud_total.value() / analyses.len() as f64)?,
        ..*input
    };
    par::map_range(analyses.len(), parallelism, |i| {
        let input = OptimizerInput {
            error_tol: tolerances[i],
            ..local
        };
        iterate_error(&analyses[i], &input)
    })
    .into_iter()
    .collect()
}

fn snap(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetHandle;
    use crate::model::StabilityFactor;

    fn count_plan(e: Epsilon) -> Query<NoisyValue> {
        DatasetHandle::symbolic(StabilityFactor::ONE).count(e)
    }

    fn input(bud: f64, tol: f64) -> OptimizerInput {
        OptimizerInput::new(
            Epsilon::new(bud).unwrap(),
            Beta::new(0.05).unwrap(),
            Alpha::new(tol).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn probes_land_on_decimal_grid() {
        let inp = input(1.0, 1.0);
        assert_eq!(inp.probe(1), 0.06);
        assert_eq!(inp.probe(8), 0.41);
        assert_eq!(inp.probe(19), 0.96);
    }

    #[test]
    fn infinite_tolerance_succeeds_immediately() {
        let out = iterate_error(count_plan, &input(1.0, f64::INFINITY)).unwrap();
        assert_eq!(out.kind, OutcomeKind::Success);
        assert_eq!(out.epsilon.value(), 0.01);
    }

    #[test]
    fn unreachable_tolerance_ends_at_budget() {
        let out = iterate_error(count_plan, &input(1.0, 0.5)).unwrap();
        assert_eq!(out.kind, OutcomeKind::MaxBudget);
        assert_eq!(out.epsilon.value(), 1.0);
        assert!((out.alpha.value() - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap() {
        let mut inp = input(1.0, 0.5);
        inp.iter = 3;
        let out = iterate_error(count_plan, &inp).unwrap();
        assert_eq!(out.kind, OutcomeKind::MaxIteration);
        assert_eq!(out.epsilon.value(), 0.11);
    }

    #[test]
    fn bad_inputs() {
        let mut inp = input(1.0, 1.0);
        inp.iter = 0;
        assert!(iterate_error(count_plan, &inp).is_err());
        assert!(OptimizerInput::new(
            Epsilon::new(0.001).unwrap(),
            Beta::new(0.05).unwrap(),
            Alpha::new(1.0).unwrap()
        )
        .is_err());
        let one: Vec<Analysis> = vec![Box::new(count_plan)];
        assert!(choose_eps(&one, &input(1.0, 1.0), &[]).is_err());
        assert!(choose_eps(&[], &input(1.0, 1.0), &[]).unwrap().is_empty());
    }
}
