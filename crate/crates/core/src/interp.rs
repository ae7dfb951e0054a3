//! Plan walker shared by the budget analysis, the accuracy analysis and the
//! executor.
//!
//! In symbolic mode handles carry no rows and aggregations yield values with
//! only accuracy metadata; no randomness is consumed. In concrete mode rows
//! flow through transformations and aggregations add Laplace noise drawn
//! from the caller's [`RngState`].

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::executor::{sample_laplace, RngState};
use crate::model::{Epsilon, ICdf, LabelId, NoisyValue, Payload, RegionId, Sensitivity};
use crate::plan::{Aggregation, Node, PlanNode, Value};
use crate::privacy::{EpsilonSum, SafetyViolation};

pub(crate) enum Mode<'a> {
    Symbolic,
    Concrete { rng: &'a mut RngState, noise: bool },
}

pub(crate) struct Outcome {
    pub value: Value,
    pub spent: f64,
    pub breakdown: Vec<(String, f64)>,
    pub labels_issued: u64,
}

pub(crate) struct Interpreter<'a> {
    mode: Mode<'a>,
    spent: EpsilonSum,
    breakdown: Vec<(String, f64)>,
    part_depth: usize,
    next_label: u64,
    // parent of region i is region_parent[i]; the root is its own parent
    region_parent: Vec<u64>,
    current_region: RegionId,
    path: Vec<String>,
    step: usize,
}

impl<'a> Interpreter<'a> {
    pub(crate) fn new(mode: Mode<'a>) -> Self {
        Interpreter {
            mode,
            spent: EpsilonSum::default(),
            breakdown: Vec::new(),
            part_depth: 0,
            next_label: 0,
            region_parent: vec![0],
            current_region: RegionId::ROOT,
            path: Vec::new(),
            step: 0,
        }
    }

    pub(crate) fn run_to_end(mut self, node: &PlanNode) -> Result<Outcome> {
        let value = self.run(node)?;
        Ok(Outcome {
            value,
            spent: self.spent.total(),
            breakdown: self.breakdown,
            labels_issued: self.next_label,
        })
    }

    fn run(&mut self, node: &PlanNode) -> Result<Value> {
        let mut node = node.clone();
        loop {
            match &*node.0 {
                Node::Bind(first, cont) => {
                    let v = self.run(first)?;
                    node = cont(v)?;
                }
                _ => return self.step(&node),
            }
        }
    }

    fn step(&mut self, node: &PlanNode) -> Result<Value> {
        let index = self.step;
        self.step += 1;
        self.path.push(format!("{:?}#{index}", node.tag()));
        let out = self.step_inner(node);
        self.path.pop();
        out
    }

    fn step_inner(&mut self, node: &PlanNode) -> Result<Value> {
        match &*node.0 {
            Node::Pure(v) => Ok(v.clone()),
            Node::Fail(e) => Err(e.clone()),
            Node::Bind(..) => self.run(node),
            Node::Where(pred, src) => {
                self.check_region(src)?;
                let rows = src
                    .rows
                    .as_ref()
                    .map(|rows| rows.iter().filter(|r| pred(r)).cloned().collect());
                Ok(derived(src, src.stability, rows))
            }
            Node::Select(f, src) => {
                self.check_region(src)?;
                let rows = src.rows.as_ref().map(|rows| rows.iter().map(|r| f(r)).collect());
                Ok(derived(src, src.stability, rows))
            }
            Node::GroupBy(key, src) => {
                self.check_region(src)?;
                let rows = src.rows.as_ref().map(|rows| group_rows(rows, key.as_ref()));
                Ok(derived(src, src.stability.doubled(), rows))
            }
            Node::Intersect(a, b) | Node::UnionData(a, b) => {
                self.check_region(a)?;
                self.check_region(b)?;
                if a.region != b.region {
                    return Err(self.violation(b.region, a.region));
                }
                let intersect = matches!(&*node.0, Node::Intersect(..));
                let rows = match (&a.rows, &b.rows) {
                    (Some(x), Some(y)) if intersect => Some(multiset_intersection(x, y)),
                    (Some(x), Some(y)) => Some(x.iter().chain(y.iter()).cloned().collect()),
                    _ => None,
                };
                Ok(derived(a, a.stability.plus(b.stability), rows))
            }
            Node::Aggregate { kind, eps, source } => {
                self.check_region(source)?;
                self.charge(*eps);
                let v = self.aggregate(kind, *eps, source)?;
                Ok(Value::Noisy(v))
            }
            Node::Part {
                key,
                source,
                branches,
            } => {
                self.check_region(source)?;
                self.partition(key.as_ref(), source, branches.as_ref())
            }
        }
    }

    fn charge(&mut self, eps: Epsilon) {
        self.spent.add(eps.value());
        if self.part_depth == 0 {
            self.breakdown.push((self.path.join("/"), eps.value()));
        }
    }

    fn fresh_label(&mut self) -> LabelId {
        let label = LabelId(self.next_label);
        self.next_label += 1;
        label
    }

    fn aggregate(&mut self, kind: &Aggregation, eps: Epsilon, src: &DatasetHandle) -> Result<NoisyValue> {
        let label = self.fresh_label();
        let sensitivity = match kind {
            Aggregation::Count => Sensitivity::Count,
            Aggregation::Sum(_) => Sensitivity::Sum,
            Aggregation::Avg(_) => Sensitivity::Avg,
            Aggregation::NoisyMax(_) => Sensitivity::NoisyMax,
        };
        let scale = sensitivity.laplace_scale(src.stability, eps);

        let (rng, noise) = match &mut self.mode {
            Mode::Symbolic => {
                return Ok(symbolic_result(kind, scale, label));
            }
            Mode::Concrete { rng, noise } => (&mut **rng, *noise),
        };
        let rows = src
            .rows
            .as_ref()
            .ok_or_else(|| Error::Execution("dataset handle has no rows".into()))?;
        let draw = |rng: &mut RngState| if noise { sample_laplace(scale, rng) } else { 0.0 };

        let clamp = |x: f64| x.clamp(-1.0, 1.0);
        let exact = match kind {
            Aggregation::Count => rows.len() as f64,
            Aggregation::Sum(clip) => rows.iter().map(|r| clamp(clip(r))).sum(),
            Aggregation::Avg(clip) => {
                if rows.is_empty() {
                    0.0
                } else {
                    rows.iter().map(|r| clamp(clip(r))).sum::<f64>() / rows.len() as f64
                }
            }
            Aggregation::NoisyMax(score) => {
                if rows.is_empty() {
                    return Err(Error::Execution("noisy max over an empty dataset".into()));
                }
                let mut best = (0usize, f64::NEG_INFINITY);
                for (i, row) in rows.iter().enumerate() {
                    let s = score(row) + draw(rng);
                    if s > best.1 {
                        best = (i, s);
                    }
                }
                let v = Payload::Scalar(best.0 as f64);
                return Ok(NoisyValue::tainted(
                    Some(v),
                    ICdf::unbounded(),
                    vec![label],
                    Vec::new(),
                ));
            }
        };
        let noisy = exact + draw(rng);
        Ok(NoisyValue::laplace(Some(Payload::Scalar(noisy)), scale, label))
    }

    fn partition(
        &mut self,
        key: &(dyn Fn(&Datum) -> Datum + Send + Sync),
        src: &DatasetHandle,
        branches: &BTreeMap<Datum, crate::plan::BranchFn>,
    ) -> Result<Value> {
        let mut slices: Option<BTreeMap<Datum, Vec<Datum>>> = src.rows.as_ref().map(|rows| {
            let mut m: BTreeMap<Datum, Vec<Datum>> =
                branches.keys().map(|k| (k.clone(), Vec::new())).collect();
            for row in rows.iter() {
                if let Some(slot) = m.get_mut(&key(row)) {
                    slot.push(row.clone());
                }
            }
            m
        });

        let outer_spent = std::mem::take(&mut self.spent);
        let outer_region = self.current_region;
        self.part_depth += 1;

        let mut results = BTreeMap::new();
        let mut max_branch = 0.0f64;
        let mut outcome = Ok(());
        for (i, (k, make_branch)) in branches.iter().enumerate() {
            let region = self.fresh_region(outer_region);
            let rows = slices
                .as_mut()
                .map(|s| Arc::new(s.remove(k).unwrap_or_default()));
            let handle = DatasetHandle::with_rows(src.stability, region, rows);
            let plan = make_branch(handle);

            self.current_region = region;
            self.spent = EpsilonSum::default();
            self.path.push(format!("[{k}]"));
            let r = self.run_branch(plan.node(), i as u64);
            self.path.pop();

            match r {
                Ok(v) => {
                    max_branch = max_branch.max(self.spent.total());
                    results.insert(k.clone(), v);
                }
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }

        self.part_depth -= 1;
        self.current_region = outer_region;
        self.spent = outer_spent;
        outcome?;

        self.spent.add(max_branch);
        if self.part_depth == 0 {
            self.breakdown.push((self.path.join("/"), max_branch));
        }
        Ok(Value::Keyed(results))
    }

    fn run_branch(&mut self, node: &PlanNode, index: u64) -> Result<NoisyValue> {
        // each branch draws from its own substream
        let mut child = match &mut self.mode {
            Mode::Concrete { rng, .. } => Some(rng.split(index)),
            Mode::Symbolic => None,
        };
        if let (Mode::Concrete { rng, .. }, Some(c)) = (&mut self.mode, child.as_mut()) {
            std::mem::swap(*rng, c);
        }
        let out = self.run(node);
        if let (Mode::Concrete { rng, .. }, Some(c)) = (&mut self.mode, child.as_mut()) {
            std::mem::swap(*rng, c);
        }
        match out? {
            Value::Noisy(v) => Ok(v),
            other => Err(Error::TypeMismatch {
                expected: "noisy value",
                found: match other {
                    Value::Keyed(_) => "keyed results",
                    Value::Data(_) => "dataset",
                    _ => "non-noisy value",
                },
            }),
        }
    }

    fn fresh_region(&mut self, parent: RegionId) -> RegionId {
        let id = self.region_parent.len() as u64;
        self.region_parent.push(parent.0);
        RegionId(id)
    }

    fn within(&self, region: RegionId, ancestor: RegionId) -> bool {
        let mut r = region.0;
        loop {
            if r == ancestor.0 {
                return true;
            }
            match self.region_parent.get(r as usize) {
                Some(&p) if p != r => r = p,
                _ => return false,
            }
        }
    }

    fn check_region(&self, src: &DatasetHandle) -> Result<()> {
        if self.within(src.region, self.current_region) {
            Ok(())
        } else {
            Err(self.violation(src.region, self.current_region))
        }
    }

    fn violation(&self, offending: RegionId, expected: RegionId) -> Error {
        Error::Safety(SafetyViolation {
            path: self.path.join("/"),
            offending,
            expected,
        })
    }
}

fn symbolic_result(kind: &Aggregation, scale: f64, label: LabelId) -> NoisyValue {
    match kind {
        Aggregation::NoisyMax(_) => {
            NoisyValue::tainted(None, ICdf::unbounded(), vec![label], Vec::new())
        }
        _ => NoisyValue::laplace(None, scale, label),
    }
}

fn derived(
    src: &DatasetHandle,
    stability: crate::model::StabilityFactor,
    rows: Option<Vec<Datum>>,
) -> Value {
    Value::Data(DatasetHandle::with_rows(stability, src.region, rows.map(Arc::new)))
}

/// Groups in first-occurrence order of their key; rows keep input order.
fn group_rows(rows: &[Datum], key: &(dyn Fn(&Datum) -> Datum + Send + Sync)) -> Vec<Datum> {
    let mut index: BTreeMap<Datum, usize> = BTreeMap::new();
    let mut groups: Vec<(Datum, Vec<Datum>)> = Vec::new();
    for row in rows {
        let k = key(row);
        match index.get(&k) {
            Some(&i) => groups[i].1.push(row.clone()),
            None => {
                index.insert(k.clone(), groups.len());
                groups.push((k, vec![row.clone()]));
            }
        }
    }
    groups
        .into_iter()
        .map(|(k, rs)| Datum::Tuple(vec![k, Datum::List(rs)]))
        .collect()
}

fn multiset_intersection(a: &[Datum], b: &[Datum]) -> Vec<Datum> {
    let mut available: BTreeMap<&Datum, usize> = BTreeMap::new();
    for row in b {
        *available.entry(row).or_default() += 1;
    }
    a.iter()
        .filter(|row| match available.get_mut(row) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
        .cloned()
        .collect()
}
