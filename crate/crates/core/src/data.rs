//! Row values and dataset handles.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use crate::model::{RegionId, StabilityFactor};

/// A dynamically typed row value. Rows read from CSV are records; rows
/// produced by projections or grouping can be any variant.
#[derive(Debug, Clone)]
pub enum Datum {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(Arc<str>),
    Tuple(Vec<Datum>),
    List(Vec<Datum>),
    Record(Record),
}

impl Datum {
    pub fn text(s: impl AsRef<str>) -> Self {
        Datum::Text(Arc::from(s.as_ref()))
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Datum::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Numeric view: integers and reals as `f64`, booleans as 0/1.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Datum::Int(v) => Some(*v as f64),
            Datum::Real(v) => Some(*v),
            Datum::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Datum::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Field of a record by column name.
    pub fn field(&self, name: &str) -> Option<&Datum> {
        match self {
            Datum::Record(r) => r.get(name),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Datum::Bool(_) => 0,
            Datum::Int(_) => 1,
            Datum::Real(_) => 2,
            Datum::Text(_) => 3,
            Datum::Tuple(_) => 4,
            Datum::List(_) => 5,
            Datum::Record(_) => 6,
        }
    }
}

// Total order so that any datum can serve as a partition key. Reals use
// IEEE total ordering.
impl Ord for Datum {
    fn cmp(&self, other: &Self) -> Ordering {
        use Datum::*;
        match (self, other) {
            (Bool(a), Bool(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Real(a), Real(b)) => a.total_cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (Tuple(a), Tuple(b)) | (List(a), List(b)) => a.cmp(b),
            (Record(a), Record(b)) => a.values.cmp(&b.values),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Datum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Datum {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Datum {}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, items: &[Datum]) -> fmt::Result {
            for (i, d) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str("|")?;
                }
                write!(f, "{d}")?;
            }
            Ok(())
        }
        match self {
            Datum::Bool(b) => write!(f, "{b}"),
            Datum::Int(v) => write!(f, "{v}"),
            Datum::Real(v) => write!(f, "{v}"),
            Datum::Text(s) => f.write_str(s),
            Datum::Tuple(items) | Datum::List(items) => join(f, items),
            Datum::Record(r) => join(f, &r.values),
        }
    }
}

impl From<i64> for Datum {
    fn from(v: i64) -> Self {
        Datum::Int(v)
    }
}

impl From<f64> for Datum {
    fn from(v: f64) -> Self {
        Datum::Real(v)
    }
}

impl From<bool> for Datum {
    fn from(v: bool) -> Self {
        Datum::Bool(v)
    }
}

impl From<&str> for Datum {
    fn from(v: &str) -> Self {
        Datum::text(v)
    }
}

/// A named-column row sharing its column list with the rest of its table.
#[derive(Debug, Clone)]
pub struct Record {
    columns: Arc<[String]>,
    values: Vec<Datum>,
}

impl Record {
    pub fn new(columns: Arc<[String]>, values: Vec<Datum>) -> Self {
        debug_assert_eq!(columns.len(), values.len());
        Record { columns, values }
    }

    pub fn get(&self, name: &str) -> Option<&Datum> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| &self.values[i])
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[Datum] {
        &self.values
    }
}

/// View of a sensitive table: its stability and provenance region. Rows are
/// attached only while the executor runs a plan and cannot be read back
/// through the handle.
#[derive(Clone)]
pub struct DatasetHandle {
    pub(crate) stability: StabilityFactor,
    pub(crate) region: RegionId,
    pub(crate) rows: Option<Arc<Vec<Datum>>>,
}

impl DatasetHandle {
    /// A row-free handle for static analysis.
    pub fn symbolic(stability: StabilityFactor) -> Self {
        DatasetHandle {
            stability,
            region: RegionId::ROOT,
            rows: None,
        }
    }

    pub(crate) fn with_rows(
        stability: StabilityFactor,
        region: RegionId,
        rows: Option<Arc<Vec<Datum>>>,
    ) -> Self {
        DatasetHandle {
            stability,
            region,
            rows,
        }
    }

    pub fn stability(&self) -> StabilityFactor {
        self.stability
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    pub fn is_symbolic(&self) -> bool {
        self.rows.is_none()
    }
}

impl fmt::Debug for DatasetHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DatasetHandle")
            .field("stability", &self.stability)
            .field("region", &self.region)
            .field("materialized", &self.rows.is_some())
            .finish()
    }
}
