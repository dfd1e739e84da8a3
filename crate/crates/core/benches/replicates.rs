use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use abic::bias::{mc_kappa_study, mc_sigma2_study, MuMode, StudyOptions};
use abic::marginal::MarginalLikelihood;
use abic::problems::{phillips_problem, synthesize_observations};
use abic::selection::{select_with, Case, SearchOptions};
use abic::{Execution, PriorModel};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sigma2_study(c: &mut Criterion) {
    let g = phillips_problem(32).unwrap();
    let (_, truth) = synthesize_observations(&g.design, &g.exact_solution, 1e-4, 42).unwrap();
    let prior = PriorModel::standard(32);
    let mut group = c.benchmark_group("sigma2_study_r2000");
    for (name, execution) in MODES {
        let opts = StudyOptions {
            execution,
            ..StudyOptions::new(2000, 7)
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_sigma2_study(&g.design, &truth, &prior, 1e-4, 1e-4, MuMode::ZeroMu, &opts).unwrap())
        });
    }
    group.finish();
}

fn kappa_study(c: &mut Criterion) {
    let g = phillips_problem(16).unwrap();
    let (_, truth) = synthesize_observations(&g.design, &g.exact_solution, 1e-4, 42).unwrap();
    let prior = PriorModel::standard(16);
    let mut group = c.benchmark_group("kappa_study_r100");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = StudyOptions {
            execution,
            ..StudyOptions::new(100, 7)
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_kappa_study(&g.design, &truth, &prior, 1e-4, Case::Case1, &SearchOptions::default(), &opts).unwrap())
        });
    }
    group.finish();
}

fn grid_search(c: &mut Criterion) {
    let g = phillips_problem(64).unwrap();
    let (y, _) = synthesize_observations(&g.design, &g.exact_solution, 1e-4, 42).unwrap();
    let problem = g.design.with_observations(y).unwrap();
    let lik = MarginalLikelihood::new(&problem, &PriorModel::standard(64), Default::default()).unwrap();
    let mut group = c.benchmark_group("select_case1_n64");
    for (name, execution) in MODES {
        let opts = SearchOptions {
            execution,
            ..SearchOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| select_with(&lik, abic::marginal::Objective::Case1, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sigma2_study, kappa_study, grid_search);
criterion_main!(benches);
