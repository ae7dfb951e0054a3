//! Error bounds for noisy results.
//!
//! Every [`NoisyValue`] carries an iCDF. Aggregations get the Laplace iCDF
//! `β ↦ ln(1/β)·b`. Combinators build new iCDFs from their operands:
//!
//! * `add` uses the union bound, or the tighter of union and Chernoff when
//!   all operands are untainted draws from distinct noise sources;
//! * the norms split β uniformly across their entries.
//!
//! Anything produced by a combinator is tainted: it is no longer a single
//! Laplace draw, so it cannot take part in a later Chernoff bound.

use std::borrow::Borrow;
use std::sync::Arc;

use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::executor::{eval_with, RngState};
use crate::interp::{Interpreter, Mode};
use crate::model::{Alpha, Beta, Epsilon, ICdf, LabelId, Norm, NoisyValue, Payload, StabilityFactor};
use crate::par::{self, Parallelism};
use crate::plan::{PlanValue, Query};

/// Additive constant inside the Chernoff bound.
pub const CHERNOFF_SLACK: f64 = 0.00001;

/// Which composition rule produced an iCDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Plain union bound (some operand tainted or sharing a noise source).
    Union,
    /// Independent Laplace operands: pointwise min of Chernoff and union.
    Chernoff,
    /// A single aggregation result.
    LaplaceDirect,
    NormCombination(Norm),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundChoice {
    pub kind: BoundKind,
    pub operands: usize,
    /// Operand Laplace scales, recorded for Chernoff-eligible sums.
    pub scales: Option<Arc<[f64]>>,
}

impl BoundChoice {
    /// The rule that gives the smaller error at `beta`. For Chernoff-eligible
    /// sums this is whichever of the two bounds is tighter there.
    pub fn tighter_at(&self, beta: Beta) -> BoundKind {
        match (&self.kind, &self.scales) {
            (BoundKind::Chernoff, Some(scales)) => {
                let b = beta.value();
                let stats = ScaleStats::of(scales);
                if stats.chernoff(b) < stats.laplace_union(b) {
                    BoundKind::Chernoff
                } else {
                    BoundKind::Union
                }
            }
            (kind, _) => *kind,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AccuracyReport {
    pub alpha: Alpha,
    pub beta: Beta,
    pub trace: Vec<BoundChoice>,
}

/// `β ↦ ln(1/β) · scale`.
pub fn laplace_icdf(scale: f64) -> ICdf {
    ICdf::from_fn(move |beta| -beta.ln() * scale)
}

/// `β ↦ Σ_j icdf_j(β/n)`. Needs at least two operands.
pub fn union_bound(icdfs: &[ICdf]) -> Result<ICdf> {
    if icdfs.len() < 2 {
        return Err(Error::contract("union bound needs at least two operands"));
    }
    let icdfs: Vec<ICdf> = icdfs.to_vec();
    let n = icdfs.len() as f64;
    Ok(ICdf::from_fn(move |beta| {
        let share = beta / n;
        icdfs.iter().map(|f| f.eval_raw(share)).sum()
    }))
}

/// Chernoff bound for a sum of independent Laplace draws with the given
/// scales: `β ↦ (ν + 0.00001)·sqrt(8 ln(2/β))` where
/// `ν = max(sqrt(Σ b_j²), b_max·sqrt(ln(2/β)))`.
pub fn chernoff_bound(scales: &[f64]) -> Result<ICdf> {
    if scales.len() < 2 {
        return Err(Error::contract("Chernoff bound needs at least two operands"));
    }
    if let Some(&bad) = scales.iter().find(|&&b| !(b > 0.0)) {
        return Err(Error::Domain {
            what: "Laplace scale (must be > 0)",
            value: bad,
        });
    }
    let stats = ScaleStats::of(scales);
    Ok(ICdf::from_fn(move |beta| stats.chernoff(beta)))
}

#[derive(Debug, Clone, Copy)]
struct ScaleStats {
    n: f64,
    sum: f64,
    root_sum_sq: f64,
    max: f64,
}

impl ScaleStats {
    fn of(scales: &[f64]) -> Self {
        ScaleStats {
            n: scales.len() as f64,
            sum: scales.iter().sum(),
            root_sum_sq: scales.iter().map(|b| b * b).sum::<f64>().sqrt(),
            max: scales.iter().copied().fold(0.0, f64::max),
        }
    }

    fn chernoff(&self, beta: f64) -> f64 {
        let l = (2.0 / beta).ln();
        let nu = self.root_sum_sq.max(self.max * l.sqrt());
        (nu + CHERNOFF_SLACK) * (8.0 * l).sqrt()
    }

    // Union bound over Laplace iCDFs collapses to (Σ b_j)·ln(n/β).
    fn laplace_union(&self, beta: f64) -> f64 {
        self.sum * (self.n / beta).ln()
    }
}

/// Sum of noisy values.
///
/// A single operand is returned unchanged. Otherwise the result is tainted
/// and its iCDF is the union bound, or `min(Chernoff, union)` when every
/// operand is untainted and no two share a noise source.
///
/// Accepts owned values or references.
pub fn add<V: Borrow<NoisyValue>>(values: &[V]) -> Result<NoisyValue> {
    match values {
        [] => return Err(Error::Empty("add")),
        [single] => return Ok(single.borrow().clone()),
        _ => {}
    }
    let payload = combine_payloads(values, "add")?;
    let (labels, disjoint) = merged_labels(values);
    let scales: Option<Vec<f64>> = values.iter().map(|v| v.borrow().scale).collect();

    let (icdf, choice) = match scales {
        Some(scales) if disjoint => {
            let stats = ScaleStats::of(&scales);
            let icdf = ICdf::from_fn(move |beta| stats.chernoff(beta).min(stats.laplace_union(beta)));
            let choice = BoundChoice {
                kind: BoundKind::Chernoff,
                operands: values.len(),
                scales: Some(scales.into()),
            };
            (icdf, choice)
        }
        _ => {
            let icdfs: Vec<ICdf> = values.iter().map(|v| v.borrow().icdf.clone()).collect();
            let choice = BoundChoice {
                kind: BoundKind::Union,
                operands: values.len(),
                scales: None,
            };
            (union_bound(&icdfs)?, choice)
        }
    };
    Ok(NoisyValue::tainted(payload, icdf, labels, merged_trace(values, choice)))
}

/// Negation keeps the error bound and the independence witness: Laplace
/// noise is symmetric.
pub fn neg(value: &NoisyValue) -> NoisyValue {
    scale(value, -1.0)
}

/// Multiply by a constant. The error bound scales by `|factor|`; an
/// untainted value stays untainted with scale `|factor|·b`.
pub fn scale(value: &NoisyValue, factor: f64) -> NoisyValue {
    let mut out = value.clone();
    out.value = value.value.as_ref().map(|p| match p {
        Payload::Scalar(x) => Payload::Scalar(x * factor),
        Payload::Vector { values, norm } => Payload::Vector {
            values: values.iter().map(|x| x * factor).collect(),
            norm: *norm,
        },
    });
    let magnitude = factor.abs();
    if magnitude != 1.0 {
        let inner = value.icdf.clone();
        out.icdf = ICdf::from_fn(move |beta| magnitude * inner.eval_raw(beta));
        out.scale = value.scale.map(|b| b * magnitude);
    }
    out
}

pub fn norm_inf(values: &[NoisyValue]) -> Result<NoisyValue> {
    norm_of(values, Norm::LInf)
}

pub fn norm_1(values: &[NoisyValue]) -> Result<NoisyValue> {
    norm_of(values, Norm::L1)
}

pub fn norm_2(values: &[NoisyValue]) -> Result<NoisyValue> {
    norm_of(values, Norm::L2)
}

pub fn rmsd(values: &[NoisyValue]) -> Result<NoisyValue> {
    norm_of(values, Norm::Rmsd)
}

/// Vector of scalar values measured in `norm`. Each entry is bounded at
/// β/n, so the whole vector is bounded at β; the per-entry bounds are then
/// combined in the same norm.
pub fn norm_of(values: &[NoisyValue], norm: Norm) -> Result<NoisyValue> {
    if values.is_empty() {
        return Err(Error::Empty("measure"));
    }
    let payload = match values.iter().map(|v| v.value.as_ref()).collect::<Option<Vec<_>>>() {
        Some(ps) => {
            let scalars = ps
                .iter()
                .map(|p| p.as_scalar())
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::contract("norm operands must be scalars"))?;
            Some(Payload::Vector {
                values: scalars,
                norm,
            })
        }
        None => None,
    };
    let icdfs: Vec<ICdf> = values.iter().map(|v| v.icdf.clone()).collect();
    let n = icdfs.len() as f64;
    let icdf = ICdf::from_fn(move |beta| {
        let per_entry = icdfs.iter().map(|f| f.eval_raw(beta / n));
        match norm {
            Norm::LInf => per_entry.fold(0.0, f64::max),
            Norm::L1 => per_entry.sum(),
            Norm::L2 => per_entry.map(|a| a * a).sum::<f64>().sqrt(),
            Norm::Rmsd => (per_entry.map(|a| a * a).sum::<f64>() / n).sqrt(),
        }
    });
    let (labels, _) = merged_labels(values);
    let choice = BoundChoice {
        kind: BoundKind::NormCombination(norm),
        operands: values.len(),
        scales: None,
    };
    Ok(NoisyValue::tainted(payload, icdf, labels, merged_trace(values, choice)))
}

fn combine_payloads<V: Borrow<NoisyValue>>(values: &[V], what: &str) -> Result<Option<Payload>> {
    let Some(payloads) = values.iter().map(|v| v.borrow().value.as_ref()).collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let mut acc = payloads[0].clone();
    for p in &payloads[1..] {
        acc = match (acc, p) {
            (Payload::Scalar(a), Payload::Scalar(b)) => Payload::Scalar(a + b),
            (Payload::Vector { values: a, norm }, Payload::Vector { values: b, .. }) if a.len() == b.len() => {
                Payload::Vector {
                    values: a.iter().zip(b).map(|(x, y)| x + y).collect(),
                    norm,
                }
            }
            _ => return Err(Error::contract(format!("cannot {what} values of different shapes"))),
        };
    }
    Ok(Some(acc))
}

/// Union of label sets, and whether the inputs were pairwise disjoint.
fn merged_labels<V: Borrow<NoisyValue>>(values: &[V]) -> (Vec<LabelId>, bool) {
    let mut all: Vec<LabelId> = values.iter().flat_map(|v| v.borrow().labels.iter().copied()).collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    let disjoint = all.len() == total;
    (all, disjoint)
}

fn merged_trace<V: Borrow<NoisyValue>>(values: &[V], own: BoundChoice) -> Vec<BoundChoice> {
    let mut trace: Vec<BoundChoice> = values.iter().flat_map(|v| v.borrow().trace.iter().cloned()).collect();
    trace.push(own);
    trace
}

/// Symbolically interpret `query` and report its error bound at `beta`.
pub fn accuracy(query: &Query<NoisyValue>, beta: Beta) -> Result<AccuracyReport> {
    let root = interpret(query)?;
    Ok(report_for(&root, beta))
}

/// Error bound of a plan builder applied to a fresh stability-1 handle.
pub fn accuracy_of<F>(build: F, beta: Beta) -> Result<AccuracyReport>
where
    F: Fn(DatasetHandle) -> Query<NoisyValue>,
{
    accuracy(&build(DatasetHandle::symbolic(StabilityFactor::ONE)), beta)
}

/// Symbolic result of a plan: accuracy metadata without numbers.
pub fn interpret<T: PlanValue>(query: &Query<T>) -> Result<T> {
    let outcome = Interpreter::new(Mode::Symbolic).run_to_end(query.node())?;
    T::from_value(outcome.value)
}

/// Number of distinct noise labels the accuracy interpretation of `query`
/// hands out.
pub fn labels_issued<T: PlanValue>(query: &Query<T>) -> Result<u64> {
    Ok(Interpreter::new(Mode::Symbolic).run_to_end(query.node())?.labels_issued)
}

pub(crate) fn report_for(root: &NoisyValue, beta: Beta) -> AccuracyReport {
    let trace = match (root.trace.is_empty(), root.scale) {
        (true, Some(b)) => vec![BoundChoice {
            kind: BoundKind::LaplaceDirect,
            operands: 1,
            scales: Some(vec![b].into()),
        }],
        _ => root.trace.to_vec(),
    };
    AccuracyReport {
        alpha: root.icdf.eval(beta),
        beta,
        trace,
    }
}

/// Outcome of a Monte-Carlo check of an error bound.
#[derive(Debug, Clone)]
pub struct EmpiricalCheck {
    /// The static bound being checked.
    pub alpha: Alpha,
    /// Observed error per trial, in the result's norm.
    pub errors: Vec<f64>,
    /// Fraction of trials whose error exceeded `alpha`.
    pub exceed_fraction: f64,
}

/// Execute the plan `trials` times and count how often the observed error
/// exceeds the static bound at `beta`. Each trial uses its own substream of
/// `seed`, so the result does not depend on thread scheduling.
pub fn empirical_icdf_check<F>(
    build: F,
    rows: &Arc<Vec<Datum>>,
    truth: &Payload,
    beta: Beta,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalCheck>
where
    F: Fn(DatasetHandle) -> Query<NoisyValue> + Sync,
{
    empirical_icdf_check_with(build, rows, truth, beta, trials, seed, Parallelism::default())
}

pub fn empirical_icdf_check_with<F>(
    build: F,
    rows: &Arc<Vec<Datum>>,
    truth: &Payload,
    beta: Beta,
    trials: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<EmpiricalCheck>
where
    F: Fn(DatasetHandle) -> Query<NoisyValue> + Sync,
{
    if trials == 0 {
        return Err(Error::contract("at least one trial is required"));
    }
    let alpha = accuracy_of(&build, beta)?.alpha;
    let spent = crate::privacy::budget_of(&build)?.total;
    let cap = Epsilon::new(spent.max(f64::MIN_POSITIVE))?;

    let errors = par::map_range(trials, parallelism, |t| {
        let mut rng = RngState::for_trial(seed, t as u64);
        let released = eval_with(&build, rows, cap, &mut rng, true)?;
        released.error_against(truth)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let exceeded = errors.iter().filter(|&&e| e > alpha.value()).count();
    Ok(EmpiricalCheck {
        alpha,
        exceed_fraction: exceeded as f64 / trials as f64,
        errors,
    })
}
