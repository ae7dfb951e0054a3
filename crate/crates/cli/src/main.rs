use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dplan::accuracy::{chernoff_bound, empirical_icdf_check, laplace_icdf, union_bound};
use dplan::io::{load_csv, LoadError};
use dplan::optimizer::{choose_eps, Analysis, OptimizerInput, OutcomeKind};
use dplan::workloads::{histogram, Strategy};
use dplan::{eval, eval_noiseless, Alpha, Beta, DatasetHandle, Datum, Epsilon, Error, Query, RngState};

mod catalog;

use catalog::{flatten_keyed, flatten_payload, Built, Params, Workload};

/// Differentially private query plans: static budget and error analysis,
/// execution, and simulation.
#[derive(Parser)]
#[command(name = "dplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the privacy budget a workload spends.
    Budget {
        #[command(flatten)]
        w: WorkloadArgs,
        /// Also print the top-level contributions.
        #[arg(long)]
        verbose: bool,
    },
    /// Print the error bound of a workload at --beta.
    Accuracy {
        #[command(flatten)]
        w: WorkloadArgs,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        /// Print the bound as a float instead of its ceiling.
        #[arg(long)]
        exact: bool,
    },
    /// Execute a workload on a CSV file and write the released values.
    Run {
        #[command(flatten)]
        w: WorkloadArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Refuse to run plans that spend more than this.
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a workload many times and compare observed errors with the bound.
    Simulate {
        #[command(flatten)]
        w: WorkloadArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        #[arg(long, default_value_t = 300)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate union and Chernoff bounds for sums of n Laplace values.
    CompareBounds {
        /// Laplace scale of every operand.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 2)]
        from: usize,
        #[arg(long, default_value_t = 100)]
        to: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find the smallest epsilon meeting each census histogram's tolerance.
    Optimize {
        /// One tolerance per histogram, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        tolerances: Vec<f64>,
        /// Histograms to budget, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "by-gen,by-gen-age,by-gen-age-nat")]
        analyses: Vec<Workload>,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        /// Total budget, split evenly across the analyses.
        #[arg(long, visible_alias = "eps", default_value_t = 3.0)]
        budget: f64,
        #[arg(long, default_value_t = 0.01)]
        min_eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        iter: usize,
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Args)]
struct WorkloadArgs {
    workload: Workload,
    /// Number of CDF bins, or of cells for `range`.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Strategy for `range`: identity, hierarchical or wavelet.
    #[arg(long, default_value = "identity")]
    strategy: Strategy,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV. Defaults to the bundled dataset of the workload.
    #[arg(long)]
    input: Option<PathBuf>,
}

impl WorkloadArgs {
    fn params(&self) -> anyhow::Result<Params> {
        Ok(Params {
            bins: self.bins,
            eps: Epsilon::new(self.eps)?,
            strategy: self.strategy,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::BudgetExceeded { .. } => 3,
                Error::Safety(_) => 4,
                Error::Domain { .. } => 2,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<LoadError>() {
            return match e {
                LoadError::Parse { .. } => 5,
                LoadError::Io { .. } => 1,
            };
        }
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
    }
    1
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Budget { w, verbose } => {
            let report = w.workload.budget(&w.params()?)?;
            println!("{report}");
            if verbose {
                for (path, eps) in &report.breakdown {
                    println!("  {path}: {eps}");
                }
            }
        }
        Command::Accuracy { w, beta, exact } => {
            let beta = Beta::new(beta)?;
            let alphas = w.workload.accuracy(&w.params()?, beta)?;
            let show = |a: Alpha| if exact { a.value().to_string() } else { a.ceil().to_string() };
            if let [(_, a)] = alphas.as_slice() {
                println!("alpha = {}", show(*a));
            } else {
                for (name, a) in &alphas {
                    println!("alpha[{name}] = {}", show(*a));
                }
            }
        }
        Command::Run {
            w,
            data,
            cap,
            seed,
            out,
        } => {
            let params = w.params()?;
            let rows = load_rows(w.workload, data.input.as_deref())?;
            let cap = Epsilon::new(cap.unwrap_or(f64::MAX))?;
            let mut rng = RngState::seed_from_u64(seed);
            let values = execute(w.workload, &params, &rows, cap, &mut rng)?;
            let labels = w.workload.labels(&params)?;
            write_output(out.as_deref(), |wtr| {
                wtr.write_record(["key", "value"])?;
                for (k, v) in labels.iter().zip(&values) {
                    wtr.write_record([k.clone(), v.to_string()])?;
                }
                Ok(())
            })?;
        }
        Command::Simulate {
            w,
            data,
            beta,
            trials,
            seed,
            out,
        } => {
            if trials == 0 {
                bail!(Usage("--trials must be at least 1".into()));
            }
            let params = w.params()?;
            if !matches!(w.workload.build(&params, &catalog::symbolic())?, Built::Single(_)) {
                bail!(Usage(format!("simulate does not support `{}`", w.workload.name())));
            }
            let beta = Beta::new(beta)?;
            let rows = load_rows(w.workload, data.input.as_deref())?;
            let plan = |d: DatasetHandle| single(w.workload, &params, &d);
            let truth = eval_noiseless(plan, &rows)?;
            let check = empirical_icdf_check(plan, &rows, &truth, beta, trials, seed)?;
            write_output(out.as_deref(), |wtr| {
                wtr.write_record(["trial", "observed_error"])?;
                for (t, e) in check.errors.iter().enumerate() {
                    wtr.write_record([t.to_string(), e.to_string()])?;
                }
                Ok(())
            })?;
            let summary = format!(
                "exceed fraction = {} (alpha = {}, beta = {}, trials = {})",
                check.exceed_fraction,
                check.alpha,
                beta.value(),
                trials
            );
            if out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
        }
        Command::CompareBounds {
            scale,
            beta,
            from,
            to,
            out,
        } => {
            let beta = Beta::new(beta)?;
            if from < 2 || to < from {
                bail!(Usage("need 2 <= --from <= --to".into()));
            }
            let mut rows = Vec::new();
            for n in from..=to {
                let icdfs = vec![laplace_icdf(scale); n];
                let union = union_bound(&icdfs)?.eval(beta).value();
                let chernoff = chernoff_bound(&vec![scale; n])?.eval(beta).value();
                rows.push([n.to_string(), union.to_string(), chernoff.to_string()]);
            }
            write_output(out.as_deref(), |wtr| {
                wtr.write_record(["n", "union_alpha", "chernoff_alpha"])?;
                for r in &rows {
                    wtr.write_record(r)?;
                }
                Ok(())
            })?;
        }
        Command::Optimize {
            tolerances,
            analyses,
            beta,
            budget,
            min_eps,
            delta,
            iter,
            exact,
        } => {
            if tolerances.len() != analyses.len() {
                bail!(Usage(format!(
                    "{} tolerances given for {} analyses",
                    tolerances.len(),
                    analyses.len()
                )));
            }
            let mut plans: Vec<Analysis> = Vec::new();
            let mut names = Vec::new();
            for a in &analyses {
                let Some(level) = level_of(*a) else {
                    bail!(Usage(format!("cannot optimize `{}`", a.name())));
                };
                names.push(level.name());
                plans.push(Box::new(move |e| histogram(level, e, &catalog::symbolic())));
            }
            let mut input = OptimizerInput::new(Epsilon::new(budget)?, Beta::new(beta)?, Alpha::new(0.0)?)?;
            input.min_eps = Epsilon::new(min_eps)?;
            input.delta = Epsilon::new(delta)?;
            input.iter = iter;
            let tols = tolerances.iter().map(|&t| Alpha::new(t)).collect::<Result<Vec<_>, _>>()?;
            let outcomes = choose_eps(&plans, &input, &tols)?;
            println!("{:<12} {:>9}  {:<8} {:>7}  {:>8}", "Histogram", "tolerance", "Status", "epsilon", "alpha");
            for ((name, tol), o) in names.iter().zip(&tolerances).zip(&outcomes) {
                let status = match o.kind {
                    OutcomeKind::Success => "\u{2713}".to_string(),
                    kind => kind.to_string(),
                };
                let alpha = if exact {
                    o.alpha.value().to_string()
                } else {
                    format!("{:.2}", o.alpha.value())
                };
                println!("{name:<12} {tol:>9}  {status:<8} {:>7}  {alpha:>8}", o.epsilon.value());
            }
        }
    }
    Ok(())
}

fn level_of(w: Workload) -> Option<dplan::workloads::Level> {
    match w {
        Workload::ByGen => Some(dplan::workloads::Level::Gen),
        Workload::ByGenAge => Some(dplan::workloads::Level::GenAge),
        Workload::ByGenAgeNat => Some(dplan::workloads::Level::GenAgeNat),
        _ => None,
    }
}

fn load_rows(workload: Workload, input: Option<&Path>) -> anyhow::Result<Arc<Vec<Datum>>> {
    let rows = match (input, workload.dataset()) {
        (Some(path), Some(ds)) => load_csv(path, &ds.schema())?,
        (Some(path), None) => load_csv(path, &dplan::io::Schema::new([]))?,
        (None, Some(ds)) => ds.rows(),
        (None, None) => Vec::new(),
    };
    Ok(Arc::new(rows))
}

fn single(w: Workload, p: &Params, d: &DatasetHandle) -> Query<dplan::NoisyValue> {
    match w.build(p, d) {
        Ok(Built::Single(q)) => q,
        Ok(_) => Query::fail(Error::Execution(format!("`{}` does not yield a single value", w.name()))),
        Err(e) => Query::fail(Error::Execution(e.to_string())),
    }
}

/// Execute the workload and flatten its released numbers in label order.
fn execute(w: Workload, p: &Params, rows: &Arc<Vec<Datum>>, cap: Epsilon, rng: &mut RngState) -> anyhow::Result<Vec<f64>> {
    // surface construction errors (bad bins and the like) before running
    let shape = w.build(p, &catalog::symbolic())?;
    let build = |d: &DatasetHandle| w.build(p, d).expect("validated above");
    Ok(match shape {
        Built::Unit(_) => {
            eval(|d| match build(&d) { Built::Unit(q) => q, _ => unreachable!() }, rows, cap, rng)?;
            Vec::new()
        }
        Built::Single(_) => {
            let out = eval(|d| match build(&d) { Built::Single(q) => q, _ => unreachable!() }, rows, cap, rng)?;
            flatten_payload(&out)
        }
        Built::Levels(_) => {
            let (a, b, c) = eval(|d| match build(&d) { Built::Levels(q) => q, _ => unreachable!() }, rows, cap, rng)?;
            [a, b, c].iter().flat_map(flatten_payload).collect()
        }
        Built::Keyed(_) => {
            let out = eval(|d| match build(&d) { Built::Keyed(q) => q, _ => unreachable!() }, rows, cap, rng)?;
            flatten_keyed(&out)
        }
        Built::List(_) => {
            let out = eval(|d| match build(&d) { Built::List(q) => q, _ => unreachable!() }, rows, cap, rng)?;
            out.iter().flat_map(flatten_payload).collect()
        }
    })
}

fn write_output<F>(out: Option<&Path>, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut csv::Writer<Box<dyn Write>>) -> csv::Result<()>,
{
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut wtr = csv::Writer::from_writer(sink);
    body(&mut wtr)?;
    wtr.flush()?;
    Ok(())
}
