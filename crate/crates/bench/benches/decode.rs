use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use streamlat::decoder::PrecomputedScores;
use streamlat::harness::{
    generate_benchmark, run_variant, Benchmark, BenchmarkSpec, RunConfig, Variant, VariantConfig,
};
use streamlat::ingest::{segment_all, SegmenterConfig, SegmenterEvent};
use streamlat::model::wer;
use streamlat::{Chunk, Decoder, Frame, SearchConfig};

fn bench() -> Benchmark {
    generate_benchmark(&BenchmarkSpec {
        n_streams: 2,
        words_per_stream: 120,
        ..BenchmarkSpec::default()
    })
    .expect("valid spec")
}

fn first_segment(bench: &Benchmark) -> Vec<Frame> {
    let events = segment_all(SegmenterConfig::default(), bench.streams[0].data.frames.iter().cloned()).unwrap();
    let mut frames = Vec::new();
    for ev in events {
        match ev {
            SegmenterEvent::FrameForwarded { frame, .. } => frames.push(frame),
            SegmenterEvent::SegmentEnd { .. } => break,
            SegmenterEvent::SegmentStart { .. } => {}
        }
    }
    frames
}

fn decode_chunks(c: &mut Criterion) {
    let bench = bench();
    let frames = first_segment(&bench);
    let am = PrecomputedScores {
        state_count: bench.spec.state_count,
    };
    let dec = Decoder::new(&bench.lm, &bench.lexicon, SearchConfig::default()).unwrap();
    let mut group = c.benchmark_group("decode_segment");
    group.throughput(Throughput::Elements(frames.len() as u64));
    for size in [10, 40] {
        let chunks: Vec<Chunk> = frames
            .chunks(size)
            .enumerate()
            .map(|(i, part)| Chunk::new(part.to_vec(), 0, i as u32).unwrap())
            .collect();
        group.bench_function(format!("chunk_{size}"), |b| {
            b.iter_batched(
                || dec.init_search(0),
                |mut st| {
                    for chunk in &chunks {
                        dec.decode_chunk(&mut st, chunk, &am).unwrap();
                    }
                    st.end_of_segment(0).unwrap();
                    black_box(dec.finalize_segment(&mut st).unwrap())
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn variants(c: &mut Criterion) {
    let bench = bench();
    let cfg = RunConfig::default();
    let mut group = c.benchmark_group("run_variant");
    group.sample_size(10);
    for v in [Variant::Baseline2, Variant::Update] {
        group.bench_function(v.slug(), |b| {
            b.iter(|| black_box(run_variant(&VariantConfig::of(v), &bench, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn word_error_rate(c: &mut Criterion) {
    let bench = bench();
    let reference = bench.streams[0].reference.texts();
    let mut hypothesis = reference.clone();
    for (i, w) in hypothesis.iter_mut().enumerate() {
        if i % 7 == 0 {
            *w = "noise";
        }
    }
    c.bench_function("wer_120_words", |b| b.iter(|| black_box(wer(&reference, &hypothesis))));
    let short = ["a", "b", "c", "a", "b", "c", "a", "b"];
    let other = ["b", "c", "a", "a", "c", "b", "a"];
    c.bench_function("wer_8_words", |b| b.iter(|| black_box(wer(&short, &other))));
}

criterion_group!(benches, decode_chunks, variants, word_error_rate);
criterion_main!(benches);
