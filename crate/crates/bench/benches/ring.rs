use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vfhe_core::ring::modarith::find_ntt_prime;
use vfhe_core::ring::{derive_rng, sample_poly, Distribution, NttDirection, Representation, RingParams};

fn ring(c: &mut Criterion) {
    let mut group = c.benchmark_group("ring");
    for log_n in [10u32, 12, 13] {
        let n = 1usize << log_n;
        let moduli: Vec<u64> = (0..3).map(|i| find_ntt_prime(50, 2 * n as u64, i).unwrap()).collect();
        let params = RingParams::new(n, &moduli).unwrap();
        let mut rng = derive_rng(1, "bench");
        let a = sample_poly(&params, Distribution::Uniform, &mut rng);
        let b = sample_poly(&params, Distribution::Uniform, &mut rng);
        let (an, bn) = (a.to_form(Representation::Ntt), b.to_form(Representation::Ntt));
        group.bench_with_input(BenchmarkId::new("ntt_forward", n), &a, |bch, a| {
            bch.iter(|| black_box(a.ntt_transform(NttDirection::Forward).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("mul_coeff", n), &(a, b), |bch, (a, b)| {
            bch.iter(|| black_box(a.mul(b).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("mul_ntt", n), &(an, bn), |bch, (a, b)| {
            bch.iter(|| black_box(a.mul(b).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, ring);
criterion_main!(benches);
