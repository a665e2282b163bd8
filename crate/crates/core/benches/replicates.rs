//! Sequential versus parallel execution of bootstrap and Monte Carlo
//! replicates. Without the `parallel` feature both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dispmod::bootstrap::{bootstrap_bias, BootstrapPlan, BootstrapScheme};
use dispmod::exec::{substream, Execution};
use dispmod::families::Family;
use dispmod::fit::fit_mle;
use dispmod::links::Link;
use dispmod::model::{mu_phi, Dataset, ModelSpec};
use dispmod::simulate::{run_study, CovariateLaw, StudyConfig};
use rand::Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn gamma_model() -> ModelSpec {
    let names = vec!["x1".to_string(), "x2".to_string()];
    ModelSpec::from_exprs(Family::Gamma, Link::Log, Link::Log, "b0 + b1*x1", Some("t0 + t1*x2"), &names).unwrap()
}

fn gamma_data(n: usize) -> Dataset {
    let model = gamma_model();
    let mut rng = substream(1, 0);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    let base = Dataset::new(vec![1.0; n], rows, vec!["x1".into(), "x2".into()]).unwrap();
    let (mu, phi) = mu_phi(&model, &base, &[1.0, 0.5], &[1.5, -0.5]).unwrap();
    let y = mu.iter().zip(&phi).map(|(&m, &p)| Family::Gamma.sample(m, p, &mut rng).unwrap()).collect();
    base.with_response(y)
}

fn bootstrap(c: &mut Criterion) {
    let model = gamma_model();
    let data = gamma_data(40);
    let fit = fit_mle(&model, &data, None).unwrap();
    let mut group = c.benchmark_group("bootstrap_b200");
    group.sample_size(10);
    for (name, execution) in MODES {
        let mut plan = BootstrapPlan::new(BootstrapScheme::ParametricFixedX, 200, 7);
        plan.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(name), &plan, |b, plan| {
            b.iter(|| bootstrap_bias(&model, &data, &fit, plan).unwrap())
        });
    }
    group.finish();
}

fn study(c: &mut Criterion) {
    let mut group = c.benchmark_group("study_r64_b20");
    group.sample_size(10);
    for (name, execution) in MODES {
        let mut cfg = StudyConfig::nonlinear_reciprocal_gamma(20, 3).unwrap();
        cfg.model = gamma_model();
        cfg.true_params = vec![1.0, 0.5, 1.5, -0.5];
        cfg.n = 40;
        cfg.covariate_law = CovariateLaw::Uniform01;
        cfg.replications = 64;
        cfg.bootstrap_b = 20;
        cfg.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| b.iter(|| run_study(cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bootstrap, study);
criterion_main!(benches);
