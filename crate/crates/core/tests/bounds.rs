mod common;

use common::*;
use dplan::accuracy::{add, chernoff_bound, laplace_icdf, neg, norm_1, norm_2, norm_inf, rmsd, scale, union_bound, BoundKind};
use dplan::{accuracy_of, DatasetHandle, Error, ICdf, NoisyValue};

fn counts(n: usize, e: f64) -> Vec<NoisyValue> {
    let plan = |d: DatasetHandle| {
        let qs = (0..n).map(|_| d.count(eps(e))).collect();
        dplan::sequence(qs)
    };
    dplan::accuracy::interpret(&plan(DatasetHandle::symbolic(dplan::StabilityFactor::ONE))).unwrap()
}

fn at(v: &NoisyValue, b: f64) -> f64 {
    v.error_bound(beta(b)).value()
}

#[test]
fn laplace_bound_of_a_single_count() {
    let r = accuracy_of(|d| d.count(eps(1.0)), beta(0.05)).unwrap();
    assert!(close(r.alpha.value(), 20f64.ln(), 1e-12));
    let r = accuracy_of(|d| d.avg(eps(0.5), |_| 0.0), beta(0.05)).unwrap();
    assert!(close(r.alpha.value(), 4.0 * 20f64.ln(), 1e-12));
}

#[test]
fn chernoff_ten_unit_scales() {
    let f = chernoff_bound(&[1.0; 10]).unwrap();
    let a = f.eval(beta(0.005)).value();
    assert!(close(a, 21.894, 0.001), "{a}");
    assert!(close(a, chernoff_alpha(&[1.0; 10], 0.005), 1e-9));
}

#[test]
fn union_matches_reference() {
    for n in [2, 3, 17] {
        let scales: Vec<f64> = (1..=n).map(|i| i as f64 / 3.0).collect();
        let icdfs: Vec<ICdf> = scales.iter().map(|&b| laplace_icdf(b)).collect();
        let f = union_bound(&icdfs).unwrap();
        for b in [0.01, 0.1, 0.5] {
            assert!(close(f.eval(beta(b)).value(), union_alpha(&scales, b), 1e-9));
        }
    }
}

#[test]
fn crossover_between_union_and_chernoff() {
    let u2 = union_alpha(&[1.0; 2], 0.1);
    let c2 = chernoff_alpha(&[1.0; 2], 0.1);
    assert!(close(u2, 5.9915, 1e-4) && close(c2, 8.473, 1e-3));
    assert!(u2 < c2);
    let u100 = union_alpha(&[1.0; 100], 0.1);
    let c100 = chernoff_alpha(&[1.0; 100], 0.1);
    assert!(close(u100, 690.78, 0.01) && close(c100, 48.955, 1e-3));
    assert!(c100 < u100);

    // add picks whichever is smaller
    let two = add(&counts(2, 1.0)).unwrap();
    assert!(close(at(&two, 0.1), u2, 1e-9));
    assert_eq!(two.trace().last().unwrap().tighter_at(beta(0.1)), BoundKind::Union);
    let hundred = add(&counts(100, 1.0)).unwrap();
    assert!(close(at(&hundred, 0.1), c100, 1e-9));
    assert_eq!(hundred.trace().last().unwrap().tighter_at(beta(0.1)), BoundKind::Chernoff);
}

#[test]
fn tainted_operand_forces_union() {
    let cs = counts(4, 1.0);
    let pair = add(&cs[..2]).unwrap();
    let mixed = add(&[pair.clone(), cs[2].clone(), cs[3].clone()]).unwrap();
    assert_eq!(mixed.trace().last().unwrap().kind, BoundKind::Union);
    for b in [0.05, 0.2] {
        let expected = at(&pair, b / 3.0) + 2.0 * laplace_alpha(1.0, b / 3.0);
        assert!(close(at(&mixed, b), expected, 1e-9));
    }
}

#[test]
fn repeated_operand_forces_union() {
    let cs = counts(1, 1.0);
    let twice = add(&[cs[0].clone(), cs[0].clone()]).unwrap();
    assert!(close(at(&twice, 0.1), union_alpha(&[1.0, 1.0], 0.1), 1e-12));
}

#[test]
fn add_contracts() {
    let empty: [NoisyValue; 0] = [];
    assert_eq!(add(&empty).unwrap_err(), Error::Empty("add"));
    let cs = counts(1, 0.5);
    let same = add(&cs).unwrap();
    assert!(!same.is_tainted());
    assert_eq!(same.scale(), Some(2.0));
    let sum = add(&counts(3, 1.0)).unwrap();
    assert!(sum.is_tainted());
    assert_eq!(sum.labels().len(), 3);
}

#[test]
fn negation_and_scaling() {
    let c = counts(1, 1.0).remove(0);
    let n = neg(&c);
    assert!(!n.is_tainted());
    assert_eq!(n.labels(), c.labels());
    assert!(close(at(&n, 0.1), at(&c, 0.1), 0.0));
    let s = scale(&c, -0.25);
    assert_eq!(s.scale(), Some(0.25));
    assert!(close(at(&s, 0.1), 0.25 * at(&c, 0.1), 1e-12));
}

#[test]
fn norms_match_reference() {
    let cs = counts(5, 0.5);
    let b = 0.1;
    let each = laplace_alpha(2.0, b / 5.0);
    assert!(close(at(&norm_inf(&cs).unwrap(), b), each, 1e-9));
    assert!(close(at(&norm_1(&cs).unwrap(), b), 5.0 * each, 1e-9));
    assert!(close(at(&norm_2(&cs).unwrap(), b), 5f64.sqrt() * each, 1e-9));
    assert!(close(at(&rmsd(&cs).unwrap(), b), each, 1e-9));
    assert!(norm_inf(&cs).unwrap().is_tainted());
}

#[test]
fn domain_errors() {
    let f = laplace_icdf(1.0);
    assert!(f.try_eval(0.0).is_err());
    assert!(f.try_eval(1.0).is_err());
    assert!(union_bound(&[f]).is_err());
    assert!(chernoff_bound(&[]).is_err());
}
