//! Shared numeric types: privacy and accuracy parameters, the iCDF
//! abstraction and the carrier for aggregation results.

use std::fmt;
use std::sync::Arc;

use crate::accuracy::BoundChoice;
use crate::error::{Error, Result};

/// Privacy loss attached to an aggregation. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && !value.is_nan() {
            Ok(Epsilon(value))
        } else {
            Err(Error::Domain {
                what: "epsilon (must be > 0)",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Failure probability, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Beta(f64);

impl Beta {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Beta(value))
        } else {
            Err(Error::Domain {
                what: "beta (must be in (0,1))",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Error magnitude in query-output units. May be `+inf` for values that
/// carry no bound.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub const INFINITE: Alpha = Alpha(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 {
            Ok(Alpha(value))
        } else {
            Err(Error::Domain {
                what: "alpha (must be >= 0)",
                value,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Integer ceiling used for display. Infinite values stay infinite.
    pub fn ceil(self) -> f64 {
        self.0.ceil()
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inverse cumulative error function: maps a failure probability β to an
/// error bound α such that the noisy result is off by more than α with
/// probability at most β.
///
/// The function is held as a closure; every constructor in this crate
/// produces one that is non-increasing in β and non-negative.
#[derive(Clone)]
pub struct ICdf(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ICdf {
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ICdf(Arc::new(f))
    }

    /// The constant-infinity iCDF, for values with no known bound.
    pub fn unbounded() -> Self {
        ICdf::from_fn(|_| f64::INFINITY)
    }

    pub fn eval(&self, beta: Beta) -> Alpha {
        Alpha(self.eval_raw(beta.value()).max(0.0))
    }

    /// Checked evaluation on a raw probability.
    pub fn try_eval(&self, beta: f64) -> Result<Alpha> {
        Beta::new(beta).map(|b| self.eval(b))
    }

    pub(crate) fn eval_raw(&self, beta: f64) -> f64 {
        (self.0)(beta)
    }
}

impl fmt::Debug for ICdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ICdf(<fn>)")
    }
}

/// Accumulated stability of a dataset: how many rows of the output can
/// change when one input row changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StabilityFactor(u64);

impl StabilityFactor {
    pub const ONE: StabilityFactor = StabilityFactor(1);

    pub fn new(value: u64) -> Result<Self> {
        if value >= 1 {
            Ok(StabilityFactor(value))
        } else {
            Err(Error::Domain {
                what: "stability (must be >= 1)",
                value: value as f64,
            })
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub(crate) fn doubled(self) -> Self {
        StabilityFactor(self.0.saturating_mul(2))
    }

    pub(crate) fn plus(self, other: Self) -> Self {
        StabilityFactor(self.0.saturating_add(other.0))
    }
}

/// Provenance region of a dataset handle. Handles created outside any
/// partition belong to [`RegionId::ROOT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(pub(crate) u64);

impl RegionId {
    pub const ROOT: RegionId = RegionId(0);
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Identity of one noise source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelId(pub u64);

/// Global sensitivity of each aggregation kind (after clipping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sensitivity {
    Count,
    Sum,
    Avg,
    NoisyMax,
}

impl Sensitivity {
    pub fn delta(self) -> f64 {
        match self {
            Sensitivity::Count | Sensitivity::Sum | Sensitivity::NoisyMax => 1.0,
            Sensitivity::Avg => 2.0,
        }
    }

    /// Laplace scale `b = s * delta / eps`.
    pub fn laplace_scale(self, stability: StabilityFactor, eps: Epsilon) -> f64 {
        stability.value() as f64 * self.delta() / eps.value()
    }
}

/// How the error of a vector-valued result is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    LInf,
    L1,
    L2,
    Rmsd,
}

impl Norm {
    /// Distance between two equal-length vectors in this norm.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::LInf => diffs.fold(0.0, f64::max),
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Rmsd => {
                let n = a.len().max(1) as f64;
                (diffs.map(|d| d * d).sum::<f64>() / n).sqrt()
            }
        }
    }
}

/// Concrete content of a released aggregation result.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Scalar(f64),
    Vector { values: Vec<f64>, norm: Norm },
}

impl Payload {
    /// Observed error against the exact answer, in the payload's norm
    /// (absolute difference for scalars).
    pub fn error_against(&self, truth: &Payload) -> Result<f64> {
        match (self, truth) {
            (Payload::Scalar(a), Payload::Scalar(b)) => Ok((a - b).abs()),
            (Payload::Vector { values, norm }, Payload::Vector { values: t, .. })
                if values.len() == t.len() =>
            {
                Ok(norm.distance(values, t))
            }
            _ => Err(Error::contract("payload shapes differ")),
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Payload::Scalar(x) => Some(*x),
            Payload::Vector { .. } => None,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Payload::Scalar(x) => std::slice::from_ref(x),
            Payload::Vector { values, .. } => values,
        }
    }
}

/// Result of an aggregation or of a combinator over aggregation results.
///
/// The numeric content is present only during concrete execution and is
/// not readable from plan code; the accuracy metadata always is.
/// `scale` is present iff the value is a single untainted Laplace draw, in
/// which case `labels` is a singleton and `icdf` is the Laplace iCDF of
/// that scale.
#[derive(Clone, Debug)]
pub struct NoisyValue {
    pub(crate) value: Option<Payload>,
    pub(crate) icdf: ICdf,
    pub(crate) scale: Option<f64>,
    pub(crate) labels: Arc<[LabelId]>,
    pub(crate) trace: Arc<Vec<BoundChoice>>,
}

impl NoisyValue {
    pub(crate) fn laplace(value: Option<Payload>, scale: f64, label: LabelId) -> Self {
        NoisyValue {
            value,
            icdf: crate::accuracy::laplace_icdf(scale),
            scale: Some(scale),
            labels: Arc::new([label]),
            trace: Arc::new(Vec::new()),
        }
    }

    pub(crate) fn tainted(
        value: Option<Payload>,
        icdf: ICdf,
        mut labels: Vec<LabelId>,
        trace: Vec<BoundChoice>,
    ) -> Self {
        labels.sort_unstable();
        labels.dedup();
        NoisyValue {
            value,
            icdf,
            scale: None,
            labels: labels.into(),
            trace: Arc::new(trace),
        }
    }

    pub fn icdf(&self) -> &ICdf {
        &self.icdf
    }

    /// Laplace scale when the value is untainted.
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn is_tainted(&self) -> bool {
        self.scale.is_none()
    }

    /// Noise sources this value depends on, sorted and distinct.
    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    /// Bound selections made while building this value.
    pub fn trace(&self) -> &[BoundChoice] {
        &self.trace
    }

    pub fn error_bound(&self, beta: Beta) -> Alpha {
        self.icdf.eval(beta)
    }
}
