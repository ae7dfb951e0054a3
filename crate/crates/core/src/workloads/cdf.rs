//! Cumulative distribution of packet lengths.

use crate::accuracy::{add, norm_inf};
use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::model::{Epsilon, NoisyValue};
use crate::plan::{sequence, Query};

/// Largest packet length the uniform bin sets are laid over.
pub const MAX_PACKET_LENGTH: i64 = 1500;

/// Upper edges of the CDF bins: non-empty and strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bins(Vec<i64>);

impl Bins {
    pub fn new(edges: Vec<i64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Empty("bin"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("bins must be strictly ascending"));
        }
        Ok(Bins(edges))
    }

    /// `n` evenly spaced edges `i·⌈1500/n⌉`, `i = 1..=n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("bin"));
        }
        let width = (MAX_PACKET_LENGTH + n as i64 - 1) / n as i64;
        Bins::new((1..=n as i64).map(|i| i * width).collect())
    }

    pub fn edges(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> i64 {
        *self.0.last().expect("bins are non-empty")
    }

    /// Smallest edge that is at least `len`.
    pub fn assign(&self, len: i64) -> Option<i64> {
        let i = self.0.partition_point(|&e| e < len);
        self.0.get(i).copied()
    }

    /// Exact CDF of `lengths` at each edge.
    pub fn true_cdf(&self, lengths: impl IntoIterator<Item = i64>) -> Vec<f64> {
        let mut counts = vec![0.0; self.len()];
        for len in lengths {
            if let Some(i) = self.assign(len).map(|e| self.0.partition_point(|&x| x < e)) {
                counts[i] += 1.0;
            }
        }
        let mut acc = 0.0;
        counts
            .into_iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect()
    }
}

/// Packet length of a row: the `length` field of a record, or the row itself
/// when it is already an integer.
pub fn packet_length(row: &Datum) -> i64 {
    match row {
        Datum::Record(_) => row.field("length").and_then(Datum::as_i64).unwrap_or(i64::MAX),
        other => other.as_i64().unwrap_or(i64::MAX),
    }
}

/// One count per bin of the rows with length ≤ edge, each at ε/|bins|,
/// reported in the ∞-norm.
pub fn cdf_sequential(bins: &Bins, eps: Epsilon, d: &DatasetHandle) -> Query<NoisyValue> {
    match Epsilon::new(eps.value() / bins.len() as f64) {
        Ok(local) => sequential_with(bins, local, d),
        Err(e) => Query::fail(e),
    }
}

/// [`cdf_sequential`] without splitting the budget: every count spends the
/// full ε, so the plan costs |bins|·ε.
pub fn cdf_sequential_naive(bins: &Bins, eps: Epsilon, d: &DatasetHandle) -> Query<NoisyValue> {
    sequential_with(bins, eps, d)
}

fn sequential_with(bins: &Bins, local: Epsilon, d: &DatasetHandle) -> Query<NoisyValue> {
    let edges = bins.0.clone();
    d.select(|row| Datum::Int(packet_length(row))).bind(move |sizes| {
        let counts = edges
            .iter()
            .map(|&edge| {
                sizes
                    .filter(move |len| len.as_i64().is_some_and(|l| l <= edge))
                    .bind(move |elems| elems.count(local))
            })
            .collect();
        sequence(counts).try_map(|counts| norm_inf(&counts))
    })
}

/// Histogram over the bins by partitioning (each count at the full ε, paid
/// once), then prefix sums with `add`, reported in the ∞-norm.
pub fn cdf_parallel(bins: &Bins, eps: Epsilon, d: &DatasetHandle) -> Query<NoisyValue> {
    let bins = bins.clone();
    let max = bins.max();
    d.select(|row| Datum::Int(packet_length(row)))
        .bind(move |lens| lens.filter(move |len| len.as_i64().is_some_and(|l| l <= max)))
        .bind(move |sizes| {
            let keys: Vec<Datum> = bins.0.iter().map(|&e| Datum::Int(e)).collect();
            let assign = bins.clone();
            sizes.partition_repeat(
                move |len| match len.as_i64().and_then(|l| assign.assign(l)) {
                    Some(edge) => Datum::Int(edge),
                    None => Datum::Bool(false),
                },
                keys,
                move |part| part.count(eps),
            )
        })
        .try_map(|parts| {
            // keyed results iterate in ascending edge order
            let counts: Vec<NoisyValue> = parts.into_values().collect();
            let cumulative = (1..=counts.len())
                .map(|i| add(&counts[..i]))
                .collect::<Result<Vec<_>>>()?;
            norm_inf(&cumulative)
        })
}
