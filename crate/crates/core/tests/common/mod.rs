#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use dplan::io::load_csv;
use dplan::workloads::fixtures::Dataset;
use dplan::{Beta, Datum, Epsilon};

pub fn eps(x: f64) -> Epsilon {
    Epsilon::new(x).unwrap()
}

pub fn beta(x: f64) -> Beta {
    Beta::new(x).unwrap()
}

pub fn fixture_path(ds: Dataset) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(ds.file_name())
}

pub fn fixture(ds: Dataset) -> Arc<Vec<Datum>> {
    Arc::new(load_csv(fixture_path(ds), &ds.schema()).unwrap())
}

pub fn int_field(row: &Datum, name: &str) -> i64 {
    row.field(name).and_then(Datum::as_i64).unwrap()
}

pub fn text_field<'a>(row: &'a Datum, name: &str) -> &'a str {
    row.field(name).and_then(Datum::as_str).unwrap()
}

// Reference formulas, written out independently of the library.

pub fn laplace_alpha(scale: f64, beta: f64) -> f64 {
    scale * (1.0 / beta).ln()
}

pub fn union_alpha(scales: &[f64], beta: f64) -> f64 {
    let n = scales.len() as f64;
    scales.iter().map(|b| laplace_alpha(*b, beta / n)).sum()
}

pub fn chernoff_alpha(scales: &[f64], beta: f64) -> f64 {
    let sum_sq: f64 = scales.iter().map(|b| b * b).sum();
    let b_max = scales.iter().cloned().fold(0.0, f64::max);
    let log_term = (2.0 / beta).ln();
    let nu = sum_sq.sqrt().max(b_max * log_term.sqrt());
    (nu + 0.00001) * (8.0 * log_term).sqrt()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
