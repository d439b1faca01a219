use criterion::{criterion_group, criterion_main, Criterion};
use y00_bench::wedge_soft;
use y00_core::attacks::{exhaustive_likelihood_attack, fca_bit_flip, AttackParams};
use y00_core::keystream::LfsrSpec;

fn attacks(c: &mut Criterion) {
    let mut g = c.benchmark_group("attacks");
    g.sample_size(10);
    let lfsr16 = LfsrSpec::from_u64(16, 0x100b, 0xace1).unwrap();
    let soft16 = wedge_soft(&lfsr16, 1024, 1e4, 50);
    g.bench_function("exhaustive_degree16_n50", |b| {
        b.iter(|| exhaustive_likelihood_attack(&soft16, &lfsr16, &AttackParams::default().with_qumodes(50)).unwrap())
    });
    let lfsr31 = LfsrSpec::from_u64(31, 0x9, 0x0bad_cafe).unwrap();
    let soft31 = wedge_soft(&lfsr31, 1024, 1.5e4, 1500);
    g.bench_function("fca_degree31_n1500", |b| {
        b.iter(|| fca_bit_flip(&soft31, &lfsr31, &AttackParams::default().with_qumodes(1500)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, attacks);
criterion_main!(benches);
