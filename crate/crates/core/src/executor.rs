//! Concrete execution of plans against rows.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::interp::{Interpreter, Mode};
use crate::model::{Epsilon, RegionId, StabilityFactor};
use crate::plan::{PlanValue, Query, ReleaseToken};
use crate::privacy::{budget, BudgetReport};

/// Seedable noise source. Partition branches and Monte-Carlo trials each get
/// an independent substream, so results are reproducible regardless of
/// evaluation order or thread count.
#[derive(Debug, Clone)]
pub struct RngState {
    rng: ChaCha12Rng,
}

impl RngState {
    pub fn seed_from_u64(seed: u64) -> Self {
        RngState {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Stream `trial` of the generator seeded with `seed`.
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        RngState { rng }
    }

    /// Child generator keyed by `index`. Advances the parent.
    pub fn split(&mut self, index: u64) -> Self {
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        let mut rng = ChaCha12Rng::from_seed(seed);
        rng.set_stream(index);
        RngState { rng }
    }

    pub(crate) fn uniform_centered(&mut self) -> f64 {
        self.rng.gen::<f64>() - 0.5
    }
}

/// One draw from Laplace(0, `scale`) by inverse transform.
pub fn sample_laplace(scale: f64, rng: &mut RngState) -> f64 {
    let u = loop {
        let u = rng.uniform_centered();
        // u = -0.5 would give ln(0)
        if u.abs() < 0.5 {
            break u;
        }
    };
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Run the plan built by `build` on `rows`.
///
/// The plan's budget is checked against `cap` before any row is read or any
/// noise is drawn.
pub fn eval<T, F>(build: F, rows: &Arc<Vec<Datum>>, cap: Epsilon, rng: &mut RngState) -> Result<T::Released>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    eval_with(build, rows, cap, rng, true)
}

/// Same as [`eval`] but also returns the budget report.
pub fn eval_with_report<T, F>(
    build: F,
    rows: &Arc<Vec<Datum>>,
    cap: Epsilon,
    rng: &mut RngState,
) -> Result<(T::Released, BudgetReport)>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    let report = admit(&build, cap)?;
    let released = run_concrete(&build, rows, rng, true)?;
    Ok((released, report))
}

/// Exact answer of the plan: every aggregation returns its true statistic.
/// Used as ground truth when measuring observed error.
pub fn eval_noiseless<T, F>(build: F, rows: &Arc<Vec<Datum>>) -> Result<T::Released>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    let mut rng = RngState::seed_from_u64(0);
    run_concrete(&build, rows, &mut rng, false)
}

pub(crate) fn eval_with<T, F>(
    build: F,
    rows: &Arc<Vec<Datum>>,
    cap: Epsilon,
    rng: &mut RngState,
    noise: bool,
) -> Result<T::Released>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    admit(&build, cap)?;
    run_concrete(&build, rows, rng, noise)
}

fn admit<T, F>(build: &F, cap: Epsilon) -> Result<BudgetReport>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    let report = budget(&build(DatasetHandle::symbolic(StabilityFactor::ONE)))?;
    if report.total > cap.value() {
        return Err(Error::BudgetExceeded {
            required: report.total,
            cap: cap.value(),
        });
    }
    Ok(report)
}

fn run_concrete<T, F>(build: &F, rows: &Arc<Vec<Datum>>, rng: &mut RngState, noise: bool) -> Result<T::Released>
where
    T: PlanValue,
    F: Fn(DatasetHandle) -> Query<T>,
{
    let handle = DatasetHandle::with_rows(StabilityFactor::ONE, RegionId::ROOT, Some(Arc::clone(rows)));
    let query = build(handle);
    let outcome = Interpreter::new(Mode::Concrete { rng, noise }).run_to_end(query.node())?;
    T::from_value(outcome.value)?.release(&ReleaseToken::new())
}
