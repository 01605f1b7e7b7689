use criterion::{criterion_group, criterion_main, Criterion};
use sgcca::{fit_baseline, fit_bcd, fit_gp, BcdConfig, GpConfig, Scheme, Variant};
use sgcca_bench::{synthetic, SPARSITY};

fn fits(c: &mut Criterion) {
    let (bs, dg) = synthetic(0);
    let mut group = c.benchmark_group("fit_horst");
    group.sample_size(30);
    for variant in Variant::ALL {
        let cfg = BcdConfig::new(variant, Scheme::Horst, SPARSITY.to_vec());
        group.bench_function(format!("bcd_{variant}"), |b| {
            b.iter(|| fit_bcd(&bs, &dg, &cfg).unwrap())
        });
    }
    let cfg = BcdConfig::new(Variant::P3, Scheme::Horst, SPARSITY.to_vec());
    group.bench_function("baseline", |b| {
        b.iter(|| fit_baseline(&bs, &dg, &cfg).unwrap())
    });
    let cfg = GpConfig::new(Variant::P3, SPARSITY.to_vec());
    group.bench_function("gp_p3", |b| b.iter(|| fit_gp(&bs, &dg, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, fits);
criterion_main!(benches);
