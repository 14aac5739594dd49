use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sps_bench::poisson_stream;
use sps_core::correlate::{cross_correlate, StreamCorrelator};

fn batch(c: &mut Criterion) {
    let mut g = c.benchmark_group("cross_correlate");
    g.sample_size(10);
    for &rate_mhz in &[1.0, 10.0] {
        let duration = 1_000_000_000_000; // 1 s
        let a = poisson_stream(1, rate_mhz * 1e6, duration, 1);
        let b = poisson_stream(2, rate_mhz * 1e6, duration, 2);
        g.throughput(Throughput::Elements((a.len() + b.len()) as u64));
        g.bench_with_input(
            BenchmarkId::new("40ns_1ps", rate_mhz),
            &(a, b),
            |bch, (a, b)| bch.iter(|| cross_correlate(a, b, 1, 40_000).unwrap()),
        );
    }
    g.finish();
}

fn streaming(c: &mut Criterion) {
    let duration = 200_000_000_000;
    let block = 10_000_000_000;
    let a = poisson_stream(1, 10e6, duration, 3);
    let b = poisson_stream(2, 10e6, duration, 4);
    let mut g = c.benchmark_group("stream_correlator");
    g.sample_size(10);
    g.throughput(Throughput::Elements((a.len() + b.len()) as u64));
    g.bench_function("10MHz_blocks_10ms", |bch| {
        bch.iter(|| {
            let mut sc = StreamCorrelator::new(1, 40_000, (1, 2)).unwrap();
            let (mut ia, mut ib) = (0, 0);
            let mut upto = block;
            while upto <= duration {
                let ea = ia + a.tags[ia..].partition_point(|&t| t < upto);
                let eb = ib + b.tags[ib..].partition_point(|&t| t < upto);
                sc.push(&a.tags[ia..ea], &b.tags[ib..eb], upto).unwrap();
                ia = ea;
                ib = eb;
                upto += block;
            }
            sc.finish()
        })
    });
    g.finish();
}

criterion_group!(benches, batch, streaming);
criterion_main!(benches);
