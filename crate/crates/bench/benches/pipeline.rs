use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lgdlab_core::cashflow::realized_lgd_portfolio;
use lgdlab_core::delta_os::{expand_spell, rlgd_delta_os_portfolio};
use lgdlab_core::features::{build_feature_matrix, design_matrix, targets, FEATURE_NAMES};
use lgdlab_core::gbt::{train, GbtParams};
use lgdlab_core::synth::{generate_macro, generate_portfolio, GenConfig};
use lgdlab_core::{DefaultReason, DefaultSpell, DiscountPolicy, FinalStatus, MacroSeries, MonthIndex, Observation};

fn fixture() -> (Vec<DefaultSpell>, MacroSeries) {
    let cfg = GenConfig {
        n_borrowers: 200,
        ..GenConfig::default()
    };
    let series = generate_macro(cfg.seed, cfg.start, cfg.end).unwrap();
    let spells = generate_portfolio(&cfg, &series).unwrap();
    (spells, series)
}

fn flat_spell(n_obs: u32) -> DefaultSpell {
    let d0 = MonthIndex::from_ym(2010, 1).unwrap();
    DefaultSpell {
        borrower_id: 1,
        spell_index: 0,
        default_date: d0,
        out_date: None,
        reason: DefaultReason::Days90,
        final_status: FinalStatus::NotResolved,
        cover_value_index: 1.0,
        unsecured_rate: 0.05,
        secured_rate: 0.03,
        observations: (0..n_obs)
            .map(|i| Observation {
                reporting_date: d0.plus(i as i32),
                outstanding: 1000.0,
                cash_recovery: 0.0,
                collateral_recovery: 0.0,
                cost: 0.0,
                write_off: 0.0,
            })
            .collect(),
    }
}

fn bench_generator(c: &mut Criterion) {
    let cfg = GenConfig {
        n_borrowers: 200,
        ..GenConfig::default()
    };
    let series = generate_macro(cfg.seed, cfg.start, cfg.end).unwrap();
    c.bench_function("generate_portfolio_200", |b| {
        b.iter(|| generate_portfolio(black_box(&cfg), &series).unwrap())
    });
}

fn bench_engines(c: &mut Criterion) {
    let (spells, series) = fixture();
    let policy = DiscountPolicy::default();
    c.bench_function("workout_lgd_200", |b| {
        b.iter(|| realized_lgd_portfolio(black_box(&spells), &policy, &series).unwrap())
    });
    c.bench_function("delta_os_lgd_200", |b| {
        b.iter(|| rlgd_delta_os_portfolio(black_box(&spells), &policy, &series).unwrap())
    });
}

fn bench_expansion(c: &mut Criterion) {
    let mut group = c.benchmark_group("expand_spell");
    for n in [12u32, 60, 130] {
        let spell = flat_spell(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &spell, |b, s| {
            b.iter(|| expand_spell(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn bench_features_and_training(c: &mut Criterion) {
    let (spells, series) = fixture();
    let policy = DiscountPolicy::default();
    let cash = realized_lgd_portfolio(&spells, &policy, &series).unwrap();
    let os = rlgd_delta_os_portfolio(&spells, &policy, &series).unwrap();
    c.bench_function("build_feature_matrix_200", |b| {
        b.iter(|| build_feature_matrix(&spells, &cash, &os, &series, &policy).unwrap())
    });

    let rows = build_feature_matrix(&spells, &cash, &os, &series, &policy).unwrap();
    let data = design_matrix(&rows, &FEATURE_NAMES).unwrap();
    let y = targets(&rows);
    let params = GbtParams {
        learning_rate: 0.1,
        max_depth: 3,
        n_estimators: 10,
        ..GbtParams::default()
    };
    let mut group = c.benchmark_group("gbt");
    group.sample_size(10);
    group.bench_function("train_10_trees", |b| {
        b.iter(|| train(black_box(&params), &data, &y).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_generator,
    bench_engines,
    bench_expansion,
    bench_features_and_training
);
criterion_main!(benches);
