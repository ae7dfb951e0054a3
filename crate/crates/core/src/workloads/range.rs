//! All range queries over a domain of `n` cells, answered through a query
//! strategy: identity, binary hierarchy, or Haar wavelet.
//!
//! The domain is first split into `n` unit cells, each counted once at ε
//! (the cells are disjoint, so this costs ε). A strategy row is then the
//! list of unit counts it covers, never summed on its own. A range is
//! answered by adding the constituents of the strategy rows it uses, which
//! lets `add` apply the Chernoff bound whenever no unit count repeats.

use std::fmt;
use std::str::FromStr;

use crate::accuracy::{add, scale};
use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::model::{Alpha, Beta, Epsilon, NoisyValue, StabilityFactor};
use crate::par::{self, Parallelism};
use crate::plan::Query;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Identity,
    Hierarchical,
    Wavelet,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Identity => "identity",
            Strategy::Hierarchical => "hierarchical",
            Strategy::Wavelet => "wavelet",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "i" => Ok(Strategy::Identity),
            "hierarchical" | "h" => Ok(Strategy::Hierarchical),
            "wavelet" | "y" => Ok(Strategy::Wavelet),
            _ => Err(Error::contract(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Strategy matrix with entries in {-1, 0, 1}; one row per strategy query,
/// one column per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyMatrix {
    pub strategy: Strategy,
    pub rows: Vec<Vec<i8>>,
}

impl StrategyMatrix {
    pub fn cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

pub fn build_strategy(strategy: Strategy, n: usize) -> Result<StrategyMatrix> {
    if n == 0 {
        return Err(Error::Empty("cover"));
    }
    if strategy != Strategy::Identity && !n.is_power_of_two() {
        return Err(Error::contract(format!("{strategy} strategy needs a power-of-two domain, got {n}")));
    }
    let block_row = |start: usize, len: usize, sign: i8| {
        let mut row = vec![0i8; n];
        row[start..start + len].iter_mut().for_each(|x| *x = sign);
        row
    };
    let rows = match strategy {
        Strategy::Identity => (0..n).map(|i| block_row(i, 1, 1)).collect(),
        Strategy::Hierarchical => {
            let mut rows = Vec::with_capacity(2 * n - 1);
            let mut width = n;
            while width >= 1 {
                for start in (0..n).step_by(width) {
                    rows.push(block_row(start, width, 1));
                }
                width /= 2;
            }
            rows
        }
        Strategy::Wavelet => {
            let mut rows = vec![block_row(0, n, 1)];
            let mut width = n;
            while width >= 2 {
                for start in (0..n).step_by(width) {
                    let mut row = block_row(start, width, 1);
                    row[start + width / 2..start + width].iter_mut().for_each(|x| *x = -1);
                    rows.push(row);
                }
                width /= 2;
            }
            rows
        }
    };
    Ok(StrategyMatrix { strategy, rows })
}

/// Inclusive, zero-based range of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Range {
    pub lo: usize,
    pub hi: usize,
}

impl Range {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// All `n(n+1)/2` ranges, ordered by start then end.
pub fn all_ranges(n: usize) -> Vec<Range> {
    (0..n).flat_map(|lo| (lo..n).map(move |hi| Range { lo, hi })).collect()
}

pub fn workload_size(n: usize) -> usize {
    n * (n + 1) / 2
}

/// The weighted unit cells a strategy combines to answer `range`, as
/// `(cell, coefficient)` pairs. Cells may repeat.
pub fn range_terms(matrix: &StrategyMatrix, range: Range) -> Vec<(usize, f64)> {
    let n = matrix.cols();
    match matrix.strategy {
        Strategy::Identity => (range.lo..=range.hi).map(|c| (c, 1.0)).collect(),
        Strategy::Hierarchical => {
            // minimal cover by aligned dyadic blocks; each block expands to
            // its unit cells, which are then all distinct
            let mut terms = Vec::new();
            let mut lo = range.lo;
            while lo <= range.hi {
                let mut width = if lo == 0 { n } else { 1 << lo.trailing_zeros() };
                while lo + width > range.hi + 1 {
                    width /= 2;
                }
                terms.extend((lo..lo + width).map(|c| (c, 1.0)));
                lo += width;
            }
            terms
        }
        Strategy::Wavelet => {
            // rows are orthogonal: coefficient of row k is <1_range, row_k> / |row_k|^2
            let mut terms = Vec::new();
            for row in &matrix.rows {
                let dot: i64 = row[range.lo..=range.hi].iter().map(|&x| x as i64).sum();
                if dot == 0 {
                    continue;
                }
                let norm_sq = row.iter().filter(|&&x| x != 0).count() as f64;
                let coef = dot as f64 / norm_sq;
                terms.extend(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &x)| x != 0)
                        .map(|(c, &x)| (c, coef * x as f64)),
                );
            }
            terms
        }
    }
}

/// Answer one range from the unit counts.
pub fn answer_range(units: &[NoisyValue], matrix: &StrategyMatrix, range: Range) -> Result<NoisyValue> {
    let terms = range_terms(matrix, range);
    if terms.iter().all(|&(_, coef)| coef == 1.0) {
        let refs: Vec<&NoisyValue> = terms.iter().map(|&(c, _)| &units[c]).collect();
        return add(&refs);
    }
    let scaled: Vec<NoisyValue> = terms
        .into_iter()
        .map(|(c, coef)| if coef == 1.0 { units[c].clone() } else { scale(&units[c], coef) })
        .collect();
    add(&scaled)
}

/// Cell index of a row: the `cell` field of a record, or the row itself when
/// it is an integer.
pub fn cell_of(row: &Datum) -> Datum {
    match row {
        Datum::Record(_) => row.field("cell").cloned().unwrap_or(Datum::Bool(false)),
        other => other.clone(),
    }
}

/// One noisy count per cell at ε.
pub fn unit_counts(n: usize, eps: Epsilon, d: &DatasetHandle) -> Query<Vec<NoisyValue>> {
    d.partition_repeat(cell_of, (0..n as i64).map(Datum::Int), move |part| part.count(eps))
        .map(|cells| cells.into_values().collect())
}

/// Answers to every range, in [`all_ranges`] order. Keeps all answers in
/// memory, so it is meant for small domains; use [`range_workload_alphas`]
/// for error bounds on large ones.
pub fn answer_range_workload(strategy: Strategy, n: usize, eps: Epsilon, d: &DatasetHandle) -> Query<Vec<NoisyValue>> {
    let matrix = match build_strategy(strategy, n) {
        Ok(m) => m,
        Err(e) => return Query::fail(e),
    };
    unit_counts(n, eps, d).try_map(move |units| {
        all_ranges(n)
            .into_iter()
            .map(|r| answer_range(&units, &matrix, r))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeAlpha {
    pub range: Range,
    pub alpha: Alpha,
}

/// Static error bound of every range query, with β split evenly across the
/// `n(n+1)/2` queries. Answers are built one at a time and dropped.
pub fn range_workload_alphas(
    strategy: Strategy,
    n: usize,
    eps: Epsilon,
    beta: Beta,
    parallelism: Parallelism,
) -> Result<Vec<RangeAlpha>> {
    let matrix = build_strategy(strategy, n)?;
    let plan = unit_counts(n, eps, &DatasetHandle::symbolic(StabilityFactor::ONE));
    let units = crate::accuracy::interpret(&plan)?;
    let per_query = Beta::new(beta.value() / workload_size(n) as f64)?;
    let ranges = all_ranges(n);
    par::map_slice(&ranges, parallelism, |&range| {
        let v = answer_range(&units, &matrix, range)?;
        Ok(RangeAlpha {
            range,
            alpha: v.error_bound(per_query),
        })
    })
    .into_iter()
    .collect()
}
