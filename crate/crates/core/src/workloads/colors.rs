//! Histogram of a single categorical column, by partitioning on its value.
//! Comes in a correct variant and one whose branches count the whole input
//! instead of their own slice, which the region check rejects.

use crate::data::{DatasetHandle, Datum};
use crate::model::Epsilon;
use crate::plan::{branch, KeyedResults, Query};

pub const COLORS: [&str; 5] = ["blue", "green", "red", "white", "yellow"];

pub fn color_of(row: &Datum) -> Datum {
    match row {
        Datum::Record(_) => row.field("color").cloned().unwrap_or(Datum::Bool(false)),
        other => other.clone(),
    }
}

fn keys() -> impl Iterator<Item = Datum> {
    COLORS.iter().map(|c| Datum::text(c))
}

/// Each branch counts its own slice. Costs ε.
pub fn color_histogram(eps: Epsilon, d: &DatasetHandle) -> Query<KeyedResults> {
    let branches = keys().map(|c| (c, branch(move |ds| ds.count(eps)))).collect();
    d.partition(color_of, branches)
}

/// Each branch counts the captured outer dataset, not its slice.
pub fn color_histogram_leaky(eps: Epsilon, d: &DatasetHandle) -> Query<KeyedResults> {
    let branches = keys()
        .map(|c| {
            let outer = d.clone();
            (c, branch(move |_ds| outer.count(eps)))
        })
        .collect();
    d.partition(color_of, branches)
}
