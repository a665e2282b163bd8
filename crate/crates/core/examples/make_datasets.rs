//! Regenerates the example datasets under `data/`.
//!
//! cargo run -p dispmod --example make_datasets -- <repo root>

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dispmod::exec::substream;
use dispmod::families::Family;
use dispmod::links::Link;
use dispmod::model::{mu_phi, Dataset, ModelSpec};
use rand::Rng;

fn write(path: &Path, names: &[&str], y: &[f64], rows: &[Vec<f64>]) {
    let mut out = format!("y,{}\n", names.join(","));
    for (yi, r) in y.iter().zip(rows) {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{yi:?},{}", cells.join(","));
    }
    std::fs::write(path, out).expect("write dataset");
}

fn simulate(model: &ModelSpec, names: &[&str], n: usize, truth: &[f64], seed: u64, path: &Path) {
    let mut rng = substream(seed, 0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| names.iter().map(|_| (rng.random::<f64>() * 1000.0).round() / 1000.0).collect())
        .collect();
    let cov: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let base = Dataset::new(vec![0.0; n], rows.clone(), cov).unwrap();
    let p = model.p();
    let (mu, phi) = mu_phi(model, &base, &truth[..p], &truth[p..]).unwrap();
    let y: Vec<f64> = mu
        .iter()
        .zip(&phi)
        .map(|(&m, &f)| (model.family.sample(m, f, &mut rng).unwrap() * 1e6).round() / 1e6)
        .collect();
    write(path, names, &y, &rows);
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let gamma = ModelSpec::from_exprs(Family::Gamma, Link::Log, Link::Log, "b0 + b1*x1", Some("t0 + t1*x2"), &names(&["x1", "x2"]))
        .unwrap();
    simulate(&gamma, &["x1", "x2"], 40, &[1.0, 0.5, 1.5, -0.5], 2024, &root.join("data/gamma/gamma.csv"));

    let normal = ModelSpec::from_exprs(Family::Normal, Link::Identity, Link::Log, "b0 + b1*x1", Some("t0"), &names(&["x1"]))
        .unwrap();
    simulate(&normal, &["x1"], 30, &[2.0, -1.0, 1.0], 7, &root.join("data/normal/normal.csv"));

    let nonlinear = ModelSpec::from_exprs(
        Family::ReciprocalGamma,
        Link::Sqrt,
        Link::Log,
        "b0 + b1*x1 + x2^b2",
        Some("t0 + t1*x1 + x2^t2"),
        &names(&["x1", "x2"]),
    )
    .unwrap();
    simulate(&nonlinear, &["x1", "x2"], 40, &[0.5, 1.0, 2.0, 1.0, 2.0, 3.0], 11, &root.join("data/nonlinear/reciprocal_gamma.csv"));
}
