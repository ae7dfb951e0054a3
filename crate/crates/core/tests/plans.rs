mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::*;
use dplan::executor::{eval_with_report, sample_laplace};
use dplan::workloads::cdf::packet_length;
use dplan::workloads::fixtures::Dataset;
use dplan::workloads::{color_histogram, color_histogram_leaky};
use dplan::{
    accuracy, branch, budget, budget_of, check_partition_safety, eval, eval_noiseless, DatasetHandle, Datum, Error,
    NoisyValue, Payload, Query, RngState, StabilityFactor,
};

fn twenty_packets() -> Arc<Vec<Datum>> {
    let rows = fixture(Dataset::Packets);
    Arc::new(rows[..20].to_vec())
}

fn scalar(p: Payload) -> f64 {
    p.as_scalar().unwrap()
}

#[test]
fn filter_keeps_matching_rows() {
    let rows = twenty_packets();
    for bin in [100, 500, 1400] {
        let expected = rows.iter().filter(|r| int_field(r, "length") <= bin).count() as f64;
        let got = eval_noiseless(
            move |d: DatasetHandle| d.filter(move |r| packet_length(r) <= bin).bind(move |x| x.count(eps(1.0))),
            &rows,
        )
        .unwrap();
        assert_eq!(scalar(got), expected);
    }
}

#[test]
fn select_projects_rows() {
    let rows = twenty_packets();
    let expected: f64 = rows.iter().map(|r| (int_field(r, "length") as f64 / 1500.0).min(1.0)).sum();
    let got = eval_noiseless(
        |d: DatasetHandle| {
            d.select(|r| Datum::Real(packet_length(r) as f64 / 1500.0))
                .bind(|x| x.sum(eps(1.0), |v| v.as_f64().unwrap()))
        },
        &rows,
    )
    .unwrap();
    assert!(close(scalar(got), expected, 1e-9));
}

#[test]
fn sum_clips_each_term() {
    let rows = Arc::new(vec![Datum::Real(5.0), Datum::Real(-3.0), Datum::Real(0.5)]);
    let got = eval_noiseless(|d: DatasetHandle| d.sum(eps(1.0), |v| v.as_f64().unwrap()), &rows).unwrap();
    assert_eq!(scalar(got), 0.5);
    let avg = eval_noiseless(|d: DatasetHandle| d.avg(eps(1.0), |v| v.as_f64().unwrap()), &rows).unwrap();
    assert!(close(scalar(avg), 0.5 / 3.0, 1e-12));
    let empty = Arc::new(Vec::new());
    let avg = eval_noiseless(|d: DatasetHandle| d.avg(eps(1.0), |v| v.as_f64().unwrap()), &empty).unwrap();
    assert_eq!(scalar(avg), 0.0);
}

#[test]
fn grouping_builds_key_and_rows() {
    let rows = Arc::new(vec![Datum::text("a"), Datum::text("a"), Datum::text("b")]);
    let groups = eval_noiseless(
        |d: DatasetHandle| {
            d.group_by(|r| r.clone()).bind(|g| {
                let is_a = g.filter(|row| match row {
                    Datum::Tuple(t) => t[0] == Datum::text("a") && t[1] == Datum::List(vec![Datum::text("a"); 2]),
                    _ => false,
                });
                let is_b = g.filter(|row| match row {
                    Datum::Tuple(t) => t[0] == Datum::text("b") && t[1] == Datum::List(vec![Datum::text("b")]),
                    _ => false,
                });
                let all = g.count(eps(1.0));
                dplan::sequence(vec![is_a.bind(|x| x.count(eps(1.0))), is_b.bind(|x| x.count(eps(1.0))), all])
            })
        },
        &rows,
    )
    .unwrap();
    let got: Vec<f64> = groups.into_iter().map(scalar).collect();
    assert_eq!(got, vec![1.0, 1.0, 2.0]);
}

#[test]
fn stability_propagates_into_noise_scale() {
    let sym = DatasetHandle::symbolic(StabilityFactor::ONE);
    let grouped = sym.group_by(|r| r.clone()).bind(|g| g.count(eps(1.0)));
    let v: NoisyValue = dplan::accuracy::interpret(&grouped).unwrap();
    assert_eq!(v.scale(), Some(2.0));
    let joined = sym.filter(|_| true).bind(|a| {
        let b = a.clone();
        a.union(&b).bind(|u| u.intersect(&u.clone())).bind(|x| x.count(eps(0.5)))
    });
    let v: NoisyValue = dplan::accuracy::interpret(&joined).unwrap();
    // union: 1 + 1, then intersect with itself: 2 + 2
    assert_eq!(v.scale(), Some(8.0));
}

#[test]
fn noisy_max_needs_unit_stability_and_has_no_bound() {
    let sym = DatasetHandle::symbolic(StabilityFactor::ONE);
    let q = sym.noisy_max(eps(1.0), |r| r.as_f64().unwrap()).unwrap();
    assert_eq!(budget(&q).unwrap().total, 1.0);
    assert!(accuracy(&q, beta(0.05)).unwrap().alpha.value().is_infinite());

    let grouped = sym.group_by(|r| r.clone()).bind(|g| match g.noisy_max(eps(1.0), |_| 0.0) {
        Ok(q) => q,
        Err(e) => Query::fail(e),
    });
    assert_eq!(budget(&grouped).unwrap_err(), Error::Stability(2));

    let rows = Arc::new(vec![Datum::Real(0.0), Datum::Real(100.0), Datum::Real(1.0)]);
    let idx = eval(
        |d: DatasetHandle| d.noisy_max(eps(1.0), |r| r.as_f64().unwrap()).unwrap(),
        &rows,
        eps(1.0),
        &mut RngState::seed_from_u64(9),
    )
    .unwrap();
    assert_eq!(scalar(idx), 1.0);
}

#[test]
fn partition_routes_rows_to_branches() {
    let rows = Arc::new(["x", "y", "x", "y", "x"].map(Datum::text).to_vec());
    let plan = |d: DatasetHandle| {
        let mut branches = BTreeMap::new();
        branches.insert(Datum::text("x"), branch(|p| p.count(eps(1.0))));
        branches.insert(Datum::text("y"), branch(|p| p.count(eps(1.0))));
        d.partition(|r| r.clone(), branches)
    };
    let exact = eval_noiseless(plan, &rows).unwrap();
    assert_eq!(exact[&Datum::text("x")], Payload::Scalar(3.0));
    assert_eq!(exact[&Datum::text("y")], Payload::Scalar(2.0));

    let n = 4000;
    let mut mean = [0.0; 2];
    for seed in 0..n {
        let noisy = eval(plan, &rows, eps(1.0), &mut RngState::seed_from_u64(seed)).unwrap();
        mean[0] += scalar(noisy[&Datum::text("x")].clone()) / n as f64;
        mean[1] += scalar(noisy[&Datum::text("y")].clone()) / n as f64;
    }
    assert!(close(mean[0], 3.0, 0.1) && close(mean[1], 2.0, 0.1), "{mean:?}");
}

#[test]
fn partition_costs_the_most_expensive_branch() {
    let plan = |d: DatasetHandle| {
        let mut branches = BTreeMap::new();
        branches.insert(Datum::Int(0), branch(|p| p.count(eps(0.5))));
        branches.insert(
            Datum::Int(1),
            branch(|p| {
                let a = p.count(eps(0.25));
                let b = p.count(eps(0.5));
                a.then(b)
            }),
        );
        d.partition(|r| r.clone(), branches).then(d.count(eps(0.1)))
    };
    let report = budget_of(plan).unwrap();
    assert!(close(report.total, 0.85, 1e-15));
    assert_eq!(report.breakdown.len(), 2);
    assert_eq!(report.breakdown[0].1, 0.75);
}

#[test]
fn leaky_partition_is_rejected_everywhere() {
    let e = eps(1.0);
    let sym = DatasetHandle::symbolic(StabilityFactor::ONE);
    let bad = color_histogram_leaky(e, &sym);
    assert!(matches!(budget(&bad), Err(Error::Safety(_))));
    assert!(check_partition_safety(&bad).is_err());
    let bad_alpha = bad.try_map(|m| dplan::norm_inf(&m.into_values().collect::<Vec<_>>()));
    assert!(matches!(accuracy(&bad_alpha, beta(0.05)), Err(Error::Safety(_))));

    let rows = fixture(Dataset::Colors);
    let run = eval(|d: DatasetHandle| color_histogram_leaky(e, &d), &rows, eps(100.0), &mut RngState::seed_from_u64(1));
    assert!(matches!(run, Err(Error::Safety(_))));

    let good = color_histogram(e, &sym);
    assert!(check_partition_safety(&good).is_ok());
    assert_eq!(budget(&good).unwrap().total, 1.0);
    let out = eval(|d: DatasetHandle| color_histogram(e, &d), &rows, e, &mut RngState::seed_from_u64(1)).unwrap();
    assert_eq!(out.len(), 5);
}

#[test]
fn mixing_regions_in_a_join_is_rejected() {
    let plan = |d: DatasetHandle| {
        let outer = d.clone();
        let mut branches = BTreeMap::new();
        branches.insert(
            Datum::Int(0),
            branch(move |p| p.union(&outer).bind(|u| u.count(eps(1.0)))),
        );
        d.partition(|r| r.clone(), branches)
    };
    let err = budget_of(plan).unwrap_err();
    let Error::Safety(v) = err else { panic!("{err:?}") };
    assert!(v.path.contains("[0]"), "{}", v.path);
}

#[test]
fn budget_refusal_happens_before_any_noise() {
    let rows = twenty_packets();
    let mut rng = RngState::seed_from_u64(5);
    let untouched = rng.clone();
    let plan = |d: DatasetHandle| d.count(eps(1.0)).then(d.count(eps(1.0)));
    let err = eval(plan, &rows, eps(1.5), &mut rng).unwrap_err();
    assert_eq!(
        err,
        Error::BudgetExceeded {
            required: 2.0,
            cap: 1.5
        }
    );
    let mut a = rng;
    let mut b = untouched;
    assert_eq!(sample_laplace(1.0, &mut a), sample_laplace(1.0, &mut b));
}

#[test]
fn same_seed_same_result() {
    let rows = twenty_packets();
    let plan = |d: DatasetHandle| d.count(eps(0.3));
    let run = |seed| eval(plan, &rows, eps(1.0), &mut RngState::seed_from_u64(seed)).unwrap();
    assert_eq!(run(11), run(11));
    assert_ne!(run(11), run(12));
    let (value, report) = eval_with_report(plan, &rows, eps(1.0), &mut RngState::seed_from_u64(11)).unwrap();
    assert_eq!(value, run(11));
    assert_eq!(report.total, 0.3);
}

#[test]
fn pure_plans_are_free() {
    let q = Query::pure(4.0).map(|x: f64| x * 2.0);
    assert_eq!(budget(&q).unwrap().total, 0.0);
    let out = eval(move |_d: DatasetHandle| q.clone(), &Arc::new(Vec::new()), eps(1e-9), &mut RngState::seed_from_u64(0));
    assert_eq!(out.unwrap(), 8.0);
}

#[test]
fn failing_plans_report_their_error() {
    let q: Query<NoisyValue> = Query::fail(Error::Empty("add"));
    assert_eq!(budget(&q).unwrap_err(), Error::Empty("add"));
}
