use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mishbench_bench::ramp;
use mishbench_core::kernels::Kernel;
use mishbench_core::{ActivationKind, Buffer, Precision, Variant};

const LEN: usize = 1 << 16;

fn kernels() -> Vec<(&'static str, Kernel)> {
    vec![
        ("relu", Kernel::new(ActivationKind::Relu)),
        ("swish", Kernel::new(ActivationKind::swish())),
        ("gelu", Kernel::new(ActivationKind::Gelu)),
        ("mish_naive", Kernel::new(ActivationKind::Mish).variant(Variant::Naive)),
        ("mish_fused", Kernel::new(ActivationKind::Mish).variant(Variant::Fused)),
    ]
}

fn passes(c: &mut Criterion) {
    for precision in [Precision::Single, Precision::Double] {
        let x = ramp(precision, LEN);
        let upstream = Buffer::from_f64(precision, &vec![1.0; LEN]);
        let mut fwd = c.benchmark_group(format!("forward_{precision}"));
        fwd.throughput(Throughput::Elements(LEN as u64));
        for (name, k) in kernels() {
            let mut y = Buffer::zeros(precision, LEN);
            fwd.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| k.forward(&x, &mut y).unwrap()));
        }
        fwd.finish();

        let mut bwd = c.benchmark_group(format!("backward_{precision}"));
        bwd.throughput(Throughput::Elements(LEN as u64));
        for (name, k) in kernels() {
            let mut y = Buffer::zeros(precision, LEN);
            let mut g = Buffer::zeros(precision, LEN);
            let cache = k.forward(&x, &mut y).unwrap();
            bwd.bench_function(BenchmarkId::from_parameter(name), |b| {
                b.iter(|| k.backward(&cache, &upstream, &mut g).unwrap())
            });
        }
        bwd.finish();
    }
}

criterion_group!(benches, passes);
criterion_main!(benches);
