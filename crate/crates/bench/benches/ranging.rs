use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use v2xpos_bench::{delayed_rx, ofdm_config, reference_waveform};
use v2xpos_core::ranging::{pdoa_estimate, toa_estimate, TonePair};
use v2xpos_core::waveform::{gen_ofdm_reference, gen_two_tone};

fn bench_waveform_generation(c: &mut Criterion) {
    let cfg = ofdm_config(1);
    c.bench_function("gen_ofdm_reference/2048", |b| {
        b.iter(|| gen_ofdm_reference(&cfg, 1).unwrap())
    });
    c.bench_function("gen_two_tone/2048", |b| {
        b.iter(|| gen_two_tone(&cfg, 1, 12).unwrap())
    });
}

fn bench_toa(c: &mut Criterion) {
    let mut group = c.benchmark_group("toa_estimate");
    for oversample in [1usize, 4] {
        let reference = reference_waveform(oversample);
        let rx = delayed_rx(&reference, 213.7, 30.0);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("L{oversample}")),
            &oversample,
            |b, _| b.iter(|| toa_estimate(&rx, &reference).unwrap()),
        );
    }
    group.finish();
}

fn bench_pdoa(c: &mut Criterion) {
    let cfg = ofdm_config(1);
    let pair = TonePair::new(&cfg, 1, 12).unwrap();
    let tone = gen_two_tone(&cfg, 1, 12).unwrap();
    let rx = delayed_rx(&tone, 213.7, 30.0);
    c.bench_function("pdoa_estimate/2048", |b| {
        b.iter(|| pdoa_estimate(&rx, &pair).unwrap())
    });
}

criterion_group!(benches, bench_waveform_generation, bench_toa, bench_pdoa);
criterion_main!(benches);
