//! Named workloads and how to build, analyse and label them.

use std::collections::BTreeMap;

use clap::ValueEnum;
use dplan::accuracy::{accuracy, interpret};
use dplan::par::Parallelism;
use dplan::workloads::fixtures::Dataset;
use dplan::workloads::range::{all_ranges, range_workload_alphas};
use dplan::workloads::{
    answer_range_workload, cdf_parallel, cdf_sequential, cdf_sequential_naive, color_histogram, color_histogram_leaky,
    hierarchical_bottom_up, hierarchical_split, histogram, Bins, Level, Strategy,
};
use dplan::{budget, Alpha, Beta, BudgetReport, DatasetHandle, Datum, Epsilon, KeyedResults, NoisyValue, Payload, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Workload {
    /// A plan with no aggregation.
    Pure,
    /// Packet-length CDF, budget split over the bins.
    Cdf1,
    /// Packet-length CDF, full budget per bin.
    Cdf1Naive,
    /// Packet-length CDF via a partitioned histogram.
    Cdf2,
    ByGen,
    ByGenAge,
    ByGenAgeNat,
    /// All three census levels, each at --eps.
    Hierarchical1,
    /// Finest census level at --eps, coarser levels summed from it.
    Hierarchical2,
    /// All range queries over --bins cells with --strategy.
    Range,
    Colors,
    /// Color histogram whose branches read the whole dataset.
    ColorsBad,
}

#[derive(Debug, Clone)]
pub struct Params {
    pub bins: usize,
    pub eps: Epsilon,
    pub strategy: Strategy,
}

/// A built plan, by result shape.
pub enum Built {
    Unit(Query<()>),
    Single(Query<NoisyValue>),
    Levels(Query<(NoisyValue, NoisyValue, NoisyValue)>),
    Keyed(Query<KeyedResults>),
    List(Query<Vec<NoisyValue>>),
}

impl Workload {
    pub fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }

    pub fn dataset(self) -> Option<Dataset> {
        use Workload::*;
        match self {
            Pure => None,
            Cdf1 | Cdf1Naive | Cdf2 => Some(Dataset::Packets),
            ByGen | ByGenAge | ByGenAgeNat | Hierarchical1 | Hierarchical2 => Some(Dataset::Adult),
            Range => Some(Dataset::Cells),
            Colors | ColorsBad => Some(Dataset::Colors),
        }
    }

    fn level(self) -> Option<Level> {
        match self {
            Workload::ByGen => Some(Level::Gen),
            Workload::ByGenAge => Some(Level::GenAge),
            Workload::ByGenAgeNat => Some(Level::GenAgeNat),
            _ => None,
        }
    }

    pub fn build(self, p: &Params, d: &DatasetHandle) -> anyhow::Result<Built> {
        use Workload::*;
        let bins = || Bins::uniform(p.bins);
        Ok(match self {
            Pure => Built::Unit(Query::pure(())),
            Cdf1 => Built::Single(cdf_sequential(&bins()?, p.eps, d)),
            Cdf1Naive => Built::Single(cdf_sequential_naive(&bins()?, p.eps, d)),
            Cdf2 => Built::Single(cdf_parallel(&bins()?, p.eps, d)),
            ByGen | ByGenAge | ByGenAgeNat => Built::Single(histogram(self.level().expect("histogram"), p.eps, d)),
            Hierarchical1 => Built::Levels(hierarchical_split(p.eps, p.eps, p.eps, d)),
            Hierarchical2 => Built::Levels(hierarchical_bottom_up(p.eps, d)),
            Range => Built::List(answer_range_workload(p.strategy, p.bins, p.eps, d)),
            Colors => Built::Keyed(color_histogram(p.eps, d)),
            ColorsBad => Built::Keyed(color_histogram_leaky(p.eps, d)),
        })
    }

    pub fn budget(self, p: &Params) -> anyhow::Result<BudgetReport> {
        let d = symbolic();
        Ok(match self.build(p, &d)? {
            Built::Unit(q) => budget(&q)?,
            Built::Single(q) => budget(&q)?,
            Built::Levels(q) => budget(&q)?,
            Built::Keyed(q) => budget(&q)?,
            Built::List(q) => budget(&q)?,
        })
    }

    /// Error bound per reported component, e.g. one per hierarchy level.
    pub fn accuracy(self, p: &Params, beta: Beta) -> anyhow::Result<Vec<(String, Alpha)>> {
        let d = symbolic();
        if self == Workload::Range {
            // the per-query bounds are computed without keeping every answer
            let alphas = range_workload_alphas(p.strategy, p.bins, p.eps, beta, Parallelism::default())?;
            let worst = alphas.iter().map(|a| a.alpha).fold(Alpha::new(0.0)?, |a, b| if b > a { b } else { a });
            return Ok(vec![("range".into(), worst)]);
        }
        Ok(match self.build(p, &d)? {
            Built::Unit(q) => {
                interpret(&q)?;
                vec![(self.name(), Alpha::new(0.0)?)]
            }
            Built::Single(q) => vec![(self.name(), accuracy(&q, beta)?.alpha)],
            Built::Levels(q) => {
                let (a, b, c) = interpret(&q)?;
                Level::ALL
                    .iter()
                    .zip([a, b, c])
                    .map(|(l, v)| (l.name().to_string(), v.error_bound(beta)))
                    .collect()
            }
            Built::Keyed(q) => {
                let q = q.try_map(|m| dplan::norm_inf(&m.into_values().collect::<Vec<_>>()));
                vec![(self.name(), accuracy(&q, beta)?.alpha)]
            }
            Built::List(_) => unreachable!("range handled above"),
        })
    }

    /// Keys of the numbers `run` releases, in output order.
    pub fn labels(self, p: &Params) -> anyhow::Result<Vec<String>> {
        use Workload::*;
        Ok(match self {
            Pure => Vec::new(),
            Cdf1 | Cdf1Naive | Cdf2 => Bins::uniform(p.bins)?.edges().iter().map(i64::to_string).collect(),
            ByGen | ByGenAge | ByGenAgeNat => keys(self.level().expect("histogram")),
            Hierarchical1 | Hierarchical2 => Level::ALL
                .iter()
                .flat_map(|&l| keys(l).into_iter().map(move |k| format!("{}:{k}", l.name())))
                .collect(),
            Range => all_ranges(p.bins).iter().map(|r| format!("{}..{}", r.lo, r.hi)).collect(),
            Colors | ColorsBad => dplan::workloads::colors::COLORS.iter().map(|c| c.to_string()).collect(),
        })
    }
}

fn keys(level: Level) -> Vec<String> {
    level.keys().iter().map(Datum::to_string).collect()
}

pub fn symbolic() -> DatasetHandle {
    DatasetHandle::symbolic(dplan::StabilityFactor::ONE)
}

pub fn flatten_payload(p: &Payload) -> Vec<f64> {
    p.values().to_vec()
}

pub fn flatten_keyed(m: &BTreeMap<Datum, Payload>) -> Vec<f64> {
    m.values().flat_map(|p| p.values().to_vec()).collect()
}
