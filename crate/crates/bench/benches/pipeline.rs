use cityscale_bench::{table, world};
use cityscale_core::synthetic::{city_layer, generate_events};
use cityscale_core::{
    assign_events, compute_attractiveness, fit_power_law, generate_table, infer_homes, log_bin,
    window_exponents, CountryCode, SyntheticSpec, WindowContext,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("scaling");
    for n in [50, 1000, 20_000] {
        let t = table(n);
        group.bench_with_input(BenchmarkId::new("fit", n), &t, |b, t| b.iter(|| fit_power_law(black_box(t))));
        group.bench_with_input(BenchmarkId::new("log_bin", n), &t, |b, t| b.iter(|| log_bin(black_box(t), 5)));
    }
    group.finish();
}

fn stages(c: &mut Criterion) {
    let w = world(60, 50_000);
    let events = &w.generated.events;
    let target: CountryCode = "ES".parse().unwrap();
    let country_of = |lat, lon| {
        w.countries.locate(lat, lon).0.and_then(|i| w.countries.regions[i].id.parse().ok())
    };

    let mut group = c.benchmark_group("stages");
    group.sample_size(20);
    group.bench_function("assign_cities", |b| b.iter(|| assign_events(black_box(events), &w.cities)));
    group.bench_function("infer_homes", |b| b.iter(|| infer_homes(black_box(events), country_of, 1)));

    let homes = infer_homes(events, country_of, 1);
    let origins = homes.event_origins(events);
    let assignment = assign_events(events, &w.cities);
    group.bench_function("attractiveness", |b| {
        b.iter(|| compute_attractiveness(events, &assignment, &origins, target, &w.cities))
    });
    group.bench_function("temporal_windows", |b| {
        b.iter(|| {
            window_exponents(WindowContext {
                events,
                assignment: &assignment,
                origins: &origins,
                layer: &w.cities,
                target,
            })
        })
    });
    group.finish();
}

fn synthetic(c: &mut Criterion) {
    let mut spec = SyntheticSpec::new(60, 2e4, 5e6, 1.5, 3);
    spec.events_per_unit = 20_000;
    let cities = city_layer(&generate_table(&spec).unwrap().table).unwrap();
    let mut group = c.benchmark_group("synthetic");
    group.sample_size(20);
    group.bench_function("generate_events", |b| b.iter(|| generate_events(black_box(&spec), &cities, 2012)));
    group.finish();
}

criterion_group!(benches, scaling, stages, synthetic);
criterion_main!(benches);
