mod common;

use common::*;
use dplan::accuracy::{add, interpret, norm_1, norm_2, norm_inf, rmsd};
use dplan::{budget, budget_of, sequence, DatasetHandle, NoisyValue, Query, StabilityFactor};
use proptest::prelude::*;

fn symbolic() -> DatasetHandle {
    DatasetHandle::symbolic(StabilityFactor::ONE)
}

// fresh untainted values with Laplace scales `scales`
fn fresh(scales: &[f64]) -> Vec<NoisyValue> {
    let d = symbolic();
    interpret(&sequence(scales.iter().map(|&b| d.count(eps(1.0 / b))).collect())).unwrap()
}

fn scales(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..20.0, 2..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn laplace_bound_shrinks_as_beta_grows(b in 0.05f64..20.0, lo in 0.001f64..0.5, gap in 0.0f64..0.49) {
        let v = &fresh(&[b, b])[0];
        let hi = lo + gap;
        prop_assert!(v.error_bound(beta(hi)) <= v.error_bound(beta(lo)));
        prop_assert!(close(v.error_bound(beta(lo)).value(), laplace_alpha(b, lo), 1e-9 * b.max(1.0)));
    }

    #[test]
    fn add_of_fresh_values_takes_the_tighter_bound(s in scales(12), b in 0.001f64..0.5) {
        let sum = add(&fresh(&s)).unwrap();
        let want = union_alpha(&s, b).min(chernoff_alpha(&s, b));
        prop_assert!(close(sum.error_bound(beta(b)).value(), want, 1e-9 * want));
        prop_assert!(sum.is_tainted());
        prop_assert_eq!(sum.labels().len(), s.len());
    }

    #[test]
    fn add_of_tainted_values_is_the_union_bound(s in scales(8), b in 0.001f64..0.5) {
        let vs = fresh(&s);
        let left = add(&vs[..vs.len() / 2 + 1]).unwrap();
        let right = vs[vs.len() / 2 + 1..].to_vec();
        let mut operands = vec![left.clone()];
        operands.extend(right.iter().cloned());
        if operands.len() < 2 {
            return Ok(());
        }
        let sum = add(&operands).unwrap();
        let n = operands.len() as f64;
        let want: f64 = operands.iter().map(|v| v.error_bound(beta(b / n)).value()).sum();
        prop_assert!(close(sum.error_bound(beta(b)).value(), want, 1e-9 * want));
    }

    #[test]
    fn repeated_operand_falls_back_to_union(s in 0.05f64..20.0, b in 0.001f64..0.5) {
        let v = fresh(&[s]).remove(0);
        let sum = add(&[v.clone(), v]).unwrap();
        let want = union_alpha(&[s, s], b);
        prop_assert!(close(sum.error_bound(beta(b)).value(), want, 1e-9 * want));
        prop_assert_eq!(sum.labels().len(), 1);
    }

    #[test]
    fn norm_ordering(s in scales(10), b in 0.001f64..0.5) {
        let vs = fresh(&s);
        let at = |v: NoisyValue| v.error_bound(beta(b)).value();
        let inf = at(norm_inf(&vs).unwrap());
        let two = at(norm_2(&vs).unwrap());
        let one = at(norm_1(&vs).unwrap());
        let rms = at(rmsd(&vs).unwrap());
        let eps = 1e-9 * one;
        prop_assert!(inf <= two + eps && two <= one + eps);
        prop_assert!(rms <= two + eps);
        let per: Vec<f64> = s.iter().map(|&x| laplace_alpha(x, b / s.len() as f64)).collect();
        prop_assert!(close(one, per.iter().sum(), eps));
        prop_assert!(close(inf, per.iter().cloned().fold(0.0, f64::max), eps));
    }

    #[test]
    fn sequential_budgets_add(es in prop::collection::vec(0.01f64..3.0, 1..10)) {
        let d = symbolic();
        let q = sequence(es.iter().map(|&e| d.count(eps(e))).collect());
        let total = budget(&q).unwrap().total;
        prop_assert!(close(total, es.iter().sum(), 1e-12));
    }

    #[test]
    fn partition_costs_its_most_expensive_branch(es in prop::collection::vec(0.01f64..3.0, 1..8)) {
        let es2 = es.clone();
        let total = budget_of(move |d: DatasetHandle| {
            let branches = es2
                .iter()
                .enumerate()
                .map(|(i, &e)| (dplan::Datum::Int(i as i64), dplan::branch(move |part| part.count(eps(e)))))
                .collect();
            d.partition(|row| row.clone(), branches)
        })
        .unwrap()
        .total;
        prop_assert_eq!(total, es.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn accuracy_improves_with_epsilon(e in 0.01f64..5.0, k in 1.0f64..4.0, n in 2usize..12) {
        let alpha = |e: f64| {
            let d = symbolic();
            let q: Query<NoisyValue> = sequence((0..n).map(|_| d.count(eps(e))).collect()).try_map(|vs| add(&vs));
            dplan::accuracy(&q, beta(0.05)).unwrap().alpha
        };
        prop_assert!(alpha(e * k) <= alpha(e));
    }

    #[test]
    fn stability_multiplies_under_grouping(levels in 0usize..4, e in 0.1f64..2.0) {
        let v = dplan::accuracy_of(move |d: DatasetHandle| {
            fn grouped(d: DatasetHandle, levels: usize, e: f64) -> Query<NoisyValue> {
                if levels == 0 {
                    return d.count(eps(e));
                }
                d.group_by(|row| row.clone()).bind(move |g| grouped(g, levels - 1, e))
            }
            grouped(d, levels, e)
        }, beta(0.05)).unwrap();
        let want = laplace_alpha(2f64.powi(levels as i32) / e, 0.05);
        prop_assert!(close(v.alpha.value(), want, 1e-9 * want));
    }
}
