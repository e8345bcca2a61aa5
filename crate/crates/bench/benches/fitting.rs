use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fermi_income::analysis::synth_table;
use fermi_income::fit::{grid_oracle, lm_fit, select_model, FitConfig, ParamBox};
use fermi_income::ingest::{to_cumulative, IncomeBasis, MeanOffset, Period, TableKind, TableMeta, UnitHolder};
use fermi_income::{CumulativePoints, ModelFamily, ModelParams};

fn points(kind: TableKind, params: ModelParams, sigma: f64) -> CumulativePoints {
    let meta = TableMeta {
        country: "Bench".into(),
        period: Period::year(2008),
        kind,
        basis: IncomeBasis::Net,
        holder: UnitHolder::Individual,
        currency: "EUR".into(),
        scale_factor: 1.0,
    };
    let table = synth_table(&params, ModelFamily::FermiDirac, meta, MeanOffset::default(), sigma, 7).unwrap();
    to_cumulative(&table, MeanOffset::default())
}

fn bench_lm(c: &mut Criterion) {
    let upper = points(TableKind::UpperLimit, ModelParams::new(0.3074, 10.56, 4.621), 0.0);
    let mean = points(TableKind::MeanIncome, ModelParams::new(0.4007, 10.36, 4.9), 0.01);
    let config = FitConfig::default();

    let mut group = c.benchmark_group("lm_fit");
    for (name, pts) in [("upper_noiseless", &upper), ("mean_noisy", &mean)] {
        for family in ModelFamily::ALL {
            group.bench_with_input(BenchmarkId::new(name, family.short()), pts, |b, pts| {
                b.iter(|| lm_fit(black_box(pts), family, &config))
            });
        }
    }
    group.finish();

    c.bench_function("select_model/mean_noisy", |b| b.iter(|| select_model(black_box(&mean), &config)));
}

fn bench_grid(c: &mut Criterion) {
    let truth = ModelParams::new(0.4007, 10.36, 4.9);
    let pts = points(TableKind::MeanIncome, truth, 0.01);
    let bounds = ParamBox::around(&truth, 0.3);
    c.bench_function("grid_oracle/21^3", |b| {
        b.iter(|| grid_oracle(black_box(&pts), ModelFamily::FermiDirac, &bounds, [21, 21, 21]))
    });
}

criterion_group!(benches, bench_lm, bench_grid);
criterion_main!(benches);
