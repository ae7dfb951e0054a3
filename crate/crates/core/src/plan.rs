//! Immutable query plans and the builder API.
//!
//! A plan is a tree of transformations, aggregations and sequencing steps.
//! Sequencing is monadic: [`Query::bind`] hands the result of one plan to a
//! continuation that builds the next. Continuations receive datasets as
//! row-free handles and aggregation results as [`NoisyValue`]s whose numbers
//! cannot be read, so a plan's shape never depends on noisy output.
//!
//! The same plan is walked by three interpreters: the budget analysis, the
//! accuracy analysis and the executor.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::model::{Epsilon, NoisyValue, Payload, StabilityFactor};

pub type RowPredicate = Arc<dyn Fn(&Datum) -> bool + Send + Sync>;
pub type RowMap = Arc<dyn Fn(&Datum) -> Datum + Send + Sync>;
pub type RowScore = Arc<dyn Fn(&Datum) -> f64 + Send + Sync>;

/// Per-key results of a partition.
pub type KeyedResults = BTreeMap<Datum, NoisyValue>;

/// A partition branch: builds the sub-plan run on one partition.
pub type BranchFn = Arc<dyn Fn(DatasetHandle) -> Query<NoisyValue> + Send + Sync>;

pub(crate) type Continuation = Arc<dyn Fn(Value) -> Result<PlanNode> + Send + Sync>;

/// Dynamic value passed between plan nodes.
#[derive(Clone, Debug)]
pub enum Value {
    Unit,
    Number(f64),
    Datum(Datum),
    Data(DatasetHandle),
    Noisy(NoisyValue),
    Keyed(KeyedResults),
    List(Vec<Value>),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Number(_) => "number",
            Value::Datum(_) => "datum",
            Value::Data(_) => "dataset",
            Value::Noisy(_) => "noisy value",
            Value::Keyed(_) => "keyed results",
            Value::List(_) => "list",
        }
    }

    fn mismatch(self, expected: &'static str) -> Error {
        Error::TypeMismatch {
            expected,
            found: self.kind(),
        }
    }
}

/// Capability needed to read the numbers inside a result. Only the executor
/// can create one.
pub struct ReleaseToken(());

impl ReleaseToken {
    pub(crate) fn new() -> Self {
        ReleaseToken(())
    }
}

/// Types that can flow through a plan.
pub trait PlanValue: Clone + Send + Sync + 'static {
    /// What the executor hands back once the plan has run.
    type Released;

    fn into_value(self) -> Value;
    fn from_value(value: Value) -> Result<Self>;
    fn release(self, token: &ReleaseToken) -> Result<Self::Released>;
}

impl PlanValue for () {
    type Released = ();

    fn into_value(self) -> Value {
        Value::Unit
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Unit => Ok(()),
            other => Err(other.mismatch("unit")),
        }
    }
    fn release(self, _: &ReleaseToken) -> Result<()> {
        Ok(())
    }
}

impl PlanValue for f64 {
    type Released = f64;

    fn into_value(self) -> Value {
        Value::Number(self)
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Number(x) => Ok(x),
            other => Err(other.mismatch("number")),
        }
    }
    fn release(self, _: &ReleaseToken) -> Result<f64> {
        Ok(self)
    }
}

impl PlanValue for Datum {
    type Released = Datum;

    fn into_value(self) -> Value {
        Value::Datum(self)
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Datum(d) => Ok(d),
            other => Err(other.mismatch("datum")),
        }
    }
    fn release(self, _: &ReleaseToken) -> Result<Datum> {
        Ok(self)
    }
}

impl PlanValue for DatasetHandle {
    // Datasets never leave the engine.
    type Released = ();

    fn into_value(self) -> Value {
        Value::Data(self)
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Data(d) => Ok(d),
            other => Err(other.mismatch("dataset")),
        }
    }
    fn release(self, _: &ReleaseToken) -> Result<()> {
        Ok(())
    }
}

impl PlanValue for NoisyValue {
    type Released = Payload;

    fn into_value(self) -> Value {
        Value::Noisy(self)
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Noisy(v) => Ok(v),
            other => Err(other.mismatch("noisy value")),
        }
    }
    fn release(self, _: &ReleaseToken) -> Result<Payload> {
        self.value
            .ok_or_else(|| Error::Execution("value was not materialized".into()))
    }
}

impl PlanValue for KeyedResults {
    type Released = BTreeMap<Datum, Payload>;

    fn into_value(self) -> Value {
        Value::Keyed(self)
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Keyed(m) => Ok(m),
            other => Err(other.mismatch("keyed results")),
        }
    }
    fn release(self, token: &ReleaseToken) -> Result<Self::Released> {
        self.into_iter()
            .map(|(k, v)| Ok((k, v.release(token)?)))
            .collect()
    }
}

impl<T: PlanValue> PlanValue for Vec<T> {
    type Released = Vec<T::Released>;

    fn into_value(self) -> Value {
        Value::List(self.into_iter().map(PlanValue::into_value).collect())
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::List(items) => items.into_iter().map(T::from_value).collect(),
            other => Err(other.mismatch("list")),
        }
    }
    fn release(self, token: &ReleaseToken) -> Result<Self::Released> {
        self.into_iter().map(|v| v.release(token)).collect()
    }
}

impl<A: PlanValue, B: PlanValue> PlanValue for (A, B) {
    type Released = (A::Released, B::Released);

    fn into_value(self) -> Value {
        Value::List(vec![self.0.into_value(), self.1.into_value()])
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::List(items) if items.len() == 2 => {
                let mut it = items.into_iter();
                let a = A::from_value(it.next().unwrap())?;
                let b = B::from_value(it.next().unwrap())?;
                Ok((a, b))
            }
            other => Err(other.mismatch("pair")),
        }
    }
    fn release(self, token: &ReleaseToken) -> Result<Self::Released> {
        Ok((self.0.release(token)?, self.1.release(token)?))
    }
}

impl<A: PlanValue, B: PlanValue, C: PlanValue> PlanValue for (A, B, C) {
    type Released = (A::Released, B::Released, C::Released);

    fn into_value(self) -> Value {
        Value::List(vec![
            self.0.into_value(),
            self.1.into_value(),
            self.2.into_value(),
        ])
    }
    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::List(items) if items.len() == 3 => {
                let mut it = items.into_iter();
                let a = A::from_value(it.next().unwrap())?;
                let b = B::from_value(it.next().unwrap())?;
                let c = C::from_value(it.next().unwrap())?;
                Ok((a, b, c))
            }
            other => Err(other.mismatch("triple")),
        }
    }
    fn release(self, token: &ReleaseToken) -> Result<Self::Released> {
        Ok((
            self.0.release(token)?,
            self.1.release(token)?,
            self.2.release(token)?,
        ))
    }
}

/// Variant tag of a plan node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeTag {
    Pure,
    Fail,
    Bind,
    Where,
    Select,
    GroupBy,
    Intersect,
    UnionData,
    Part,
    Count,
    Sum,
    Avg,
    NoisyMax,
}

#[derive(Clone)]
pub(crate) enum Aggregation {
    Count,
    Sum(RowScore),
    Avg(RowScore),
    NoisyMax(RowScore),
}

impl Aggregation {
    pub(crate) fn tag(&self) -> NodeTag {
        match self {
            Aggregation::Count => NodeTag::Count,
            Aggregation::Sum(_) => NodeTag::Sum,
            Aggregation::Avg(_) => NodeTag::Avg,
            Aggregation::NoisyMax(_) => NodeTag::NoisyMax,
        }
    }
}

pub(crate) enum Node {
    Pure(Value),
    Fail(Error),
    Bind(PlanNode, Continuation),
    Where(RowPredicate, DatasetHandle),
    Select(RowMap, DatasetHandle),
    GroupBy(RowMap, DatasetHandle),
    Intersect(DatasetHandle, DatasetHandle),
    UnionData(DatasetHandle, DatasetHandle),
    Part {
        key: RowMap,
        source: DatasetHandle,
        branches: Arc<BTreeMap<Datum, BranchFn>>,
    },
    Aggregate {
        kind: Aggregation,
        eps: Epsilon,
        source: DatasetHandle,
    },
}

/// Untyped, shareable plan tree.
#[derive(Clone)]
pub struct PlanNode(pub(crate) Arc<Node>);

impl PlanNode {
    pub(crate) fn new(node: Node) -> Self {
        PlanNode(Arc::new(node))
    }

    pub fn tag(&self) -> NodeTag {
        match &*self.0 {
            Node::Pure(_) => NodeTag::Pure,
            Node::Fail(_) => NodeTag::Fail,
            Node::Bind(..) => NodeTag::Bind,
            Node::Where(..) => NodeTag::Where,
            Node::Select(..) => NodeTag::Select,
            Node::GroupBy(..) => NodeTag::GroupBy,
            Node::Intersect(..) => NodeTag::Intersect,
            Node::UnionData(..) => NodeTag::UnionData,
            Node::Part { .. } => NodeTag::Part,
            Node::Aggregate { kind, .. } => kind.tag(),
        }
    }
}

impl fmt::Debug for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlanNode::{:?}", self.tag())
    }
}

/// A plan producing a `T`.
pub struct Query<T> {
    node: PlanNode,
    _out: PhantomData<fn() -> T>,
}

impl<T> Clone for Query<T> {
    fn clone(&self) -> Self {
        Query {
            node: self.node.clone(),
            _out: PhantomData,
        }
    }
}

impl<T> fmt::Debug for Query<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Query({:?})", self.node)
    }
}

impl<T: PlanValue> Query<T> {
    fn from_node(node: Node) -> Self {
        Query {
            node: PlanNode::new(node),
            _out: PhantomData,
        }
    }

    /// A plan that yields `x` and costs nothing.
    pub fn pure(x: T) -> Self {
        Query::from_node(Node::Pure(x.into_value()))
    }

    /// A plan that fails with `err` when interpreted.
    pub fn fail(err: Error) -> Self {
        Query::from_node(Node::Fail(err))
    }

    pub fn from_result(result: Result<T>) -> Self {
        match result {
            Ok(x) => Query::pure(x),
            Err(e) => Query::fail(e),
        }
    }

    /// Sequence this plan with a continuation over its result.
    pub fn bind<U, F>(self, f: F) -> Query<U>
    where
        U: PlanValue,
        F: Fn(T) -> Query<U> + Send + Sync + 'static,
    {
        let cont: Continuation = Arc::new(move |v| Ok(f(T::from_value(v)?).node));
        Query::from_node(Node::Bind(self.node, cont))
    }

    pub fn map<U, F>(self, f: F) -> Query<U>
    where
        U: PlanValue,
        F: Fn(T) -> U + Send + Sync + 'static,
    {
        self.bind(move |x| Query::pure(f(x)))
    }

    /// Like [`Query::map`] for fallible combinators such as `add`.
    pub fn try_map<U, F>(self, f: F) -> Query<U>
    where
        U: PlanValue,
        F: Fn(T) -> Result<U> + Send + Sync + 'static,
    {
        self.bind(move |x| Query::from_result(f(x)))
    }

    /// Run `self`, discard its result, then run `next`.
    pub fn then<U: PlanValue>(self, next: Query<U>) -> Query<U> {
        self.bind(move |_| next.clone())
    }

    pub fn node(&self) -> &PlanNode {
        &self.node
    }
}

/// Run plans left to right, collecting their results.
pub fn sequence<T: PlanValue>(queries: Vec<Query<T>>) -> Query<Vec<T>> {
    sequence_from(Arc::new(queries), 0)
}

fn sequence_from<T: PlanValue>(queries: Arc<Vec<Query<T>>>, start: usize) -> Query<Vec<T>> {
    if start == queries.len() {
        return Query::pure(Vec::new());
    }
    let head = queries[start].clone();
    head.bind(move |first: T| {
        sequence_from(queries.clone(), start + 1).map(move |rest| {
            let mut out = Vec::with_capacity(rest.len() + 1);
            out.push(first.clone());
            out.extend(rest);
            out
        })
    })
}

/// Wrap a closure as a partition branch.
pub fn branch<F>(f: F) -> BranchFn
where
    F: Fn(DatasetHandle) -> Query<NoisyValue> + Send + Sync + 'static,
{
    Arc::new(f)
}

impl DatasetHandle {
    /// Keep rows satisfying `pred`. Stability is unchanged.
    pub fn filter<F>(&self, pred: F) -> Query<DatasetHandle>
    where
        F: Fn(&Datum) -> bool + Send + Sync + 'static,
    {
        Query::from_node(Node::Where(Arc::new(pred), self.clone()))
    }

    /// Map every row. Stability is unchanged.
    pub fn select<F>(&self, f: F) -> Query<DatasetHandle>
    where
        F: Fn(&Datum) -> Datum + Send + Sync + 'static,
    {
        Query::from_node(Node::Select(Arc::new(f), self.clone()))
    }

    /// Group rows by key into `(key, [rows])` tuples. Doubles stability.
    pub fn group_by<F>(&self, key: F) -> Query<DatasetHandle>
    where
        F: Fn(&Datum) -> Datum + Send + Sync + 'static,
    {
        Query::from_node(Node::GroupBy(Arc::new(key), self.clone()))
    }

    /// Multiset intersection. Stabilities add.
    pub fn intersect(&self, other: &DatasetHandle) -> Query<DatasetHandle> {
        Query::from_node(Node::Intersect(self.clone(), other.clone()))
    }

    /// Multiset union (concatenation). Stabilities add.
    pub fn union(&self, other: &DatasetHandle) -> Query<DatasetHandle> {
        Query::from_node(Node::UnionData(self.clone(), other.clone()))
    }

    /// Split rows by `key_of` and run one branch per key on its disjoint
    /// slice. Rows whose key has no branch are dropped. Branches run in
    /// ascending key order.
    pub fn partition<F>(&self, key_of: F, branches: BTreeMap<Datum, BranchFn>) -> Query<KeyedResults>
    where
        F: Fn(&Datum) -> Datum + Send + Sync + 'static,
    {
        Query::from_node(Node::Part {
            key: Arc::new(key_of),
            source: self.clone(),
            branches: Arc::new(branches),
        })
    }

    /// [`DatasetHandle::partition`] with the same branch for every key.
    pub fn partition_repeat<K, Q>(&self, key_of: K, keys: impl IntoIterator<Item = Datum>, q: Q) -> Query<KeyedResults>
    where
        K: Fn(&Datum) -> Datum + Send + Sync + 'static,
        Q: Fn(DatasetHandle) -> Query<NoisyValue> + Send + Sync + 'static,
    {
        let q: BranchFn = Arc::new(q);
        let branches = keys.into_iter().map(|k| (k, q.clone())).collect();
        self.partition(key_of, branches)
    }

    pub fn count(&self, eps: Epsilon) -> Query<NoisyValue> {
        self.aggregate(Aggregation::Count, eps)
    }

    /// Noisy sum of `clip(row)`, with each term clamped to [-1, 1].
    pub fn sum<F>(&self, eps: Epsilon, clip: F) -> Query<NoisyValue>
    where
        F: Fn(&Datum) -> f64 + Send + Sync + 'static,
    {
        self.aggregate(Aggregation::Sum(Arc::new(clip)), eps)
    }

    /// Noisy average of `clip(row)`, with each term clamped to [-1, 1].
    pub fn avg<F>(&self, eps: Epsilon, clip: F) -> Query<NoisyValue>
    where
        F: Fn(&Datum) -> f64 + Send + Sync + 'static,
    {
        self.aggregate(Aggregation::Avg(Arc::new(clip)), eps)
    }

    /// Index of the row with the highest noisy score. Only defined on
    /// datasets of stability 1.
    pub fn noisy_max<F>(&self, eps: Epsilon, score: F) -> Result<Query<NoisyValue>>
    where
        F: Fn(&Datum) -> f64 + Send + Sync + 'static,
    {
        if self.stability != StabilityFactor::ONE {
            return Err(Error::Stability(self.stability.value()));
        }
        Ok(self.aggregate(Aggregation::NoisyMax(Arc::new(score)), eps))
    }

    fn aggregate(&self, kind: Aggregation, eps: Epsilon) -> Query<NoisyValue> {
        Query::from_node(Node::Aggregate {
            kind,
            eps,
            source: self.clone(),
        })
    }
}
