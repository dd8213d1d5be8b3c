use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vfhe_core::bgv::{BgvConfig, BgvParams};
use vfhe_core::offload::{random_ciphertext, recompute_check, tensor_untrusted, LimbPolicy, Verifier};
use vfhe_core::ring::modarith::find_ntt_prime;
use vfhe_core::ring::{derive_rng, RingParams};

fn params(n: usize) -> Arc<BgvParams> {
    let moduli: Vec<u64> = (0..2).map(|i| find_ntt_prime(30, 2 * n as u64, i).unwrap()).collect();
    BgvParams::new(RingParams::new(n, &moduli).unwrap(), 65537, BgvConfig::default()).unwrap()
}

fn offload(c: &mut Criterion) {
    let params = params(4096);
    let mut group = c.benchmark_group("offload");
    group.sample_size(10);
    for k in [1usize, 8, 64] {
        let mut rng = derive_rng(k as u64, "bench");
        let pairs: Vec<_> =
            (0..k).map(|_| (random_ciphertext(&params, &mut rng), random_ciphertext(&params, &mut rng))).collect();
        let outs: Vec<_> = pairs.iter().map(|(a, b)| tensor_untrusted(a, b, None).unwrap()).collect();
        let mut verifier = Verifier::new(&params, 0, LimbPolicy::First, 7).unwrap();
        group.bench_function(BenchmarkId::new("verify", k), |b| {
            b.iter(|| black_box(verifier.check_batch(&pairs, &outs).unwrap().accepted))
        });
        group.bench_function(BenchmarkId::new("recompute", k), |b| {
            b.iter(|| black_box(recompute_check(&pairs, &outs).unwrap().0))
        });
    }
    group.finish();
}

criterion_group!(benches, offload);
criterion_main!(benches);
