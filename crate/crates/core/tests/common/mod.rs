#![allow(dead_code)]

use std::collections::BTreeMap;

use streamlat::decoder::{AcousticScorer, PrecomputedScores};
use streamlat::harness::{generate_benchmark, BenchStream, Benchmark, BenchmarkSpec};
use streamlat::ingest::{segment_all, SegmenterConfig, SegmenterEvent};
use streamlat::{Chunk, Decoder, Frame, Hypothesis, SearchConfig};

/// A few short streams over a small vocabulary: fast to decode, still
/// confusable enough for the search to revise itself.
pub fn small_spec(seed: u64) -> BenchmarkSpec {
    BenchmarkSpec {
        seed,
        n_streams: 4,
        words_per_stream: 60,
        vocab_size: 40,
        lm_training_words: 4000,
        successors: 6,
        segment_seconds: (1.0, 4.0),
        gap_seconds: (0.6, 1.2),
        edge_silence_seconds: 0.5,
        sigma: 1.5,
        hard_fraction: 0.2,
        hard_seconds: (0.5, 1.5),
        ..BenchmarkSpec::default()
    }
}

pub fn small_bench(seed: u64) -> Benchmark {
    generate_benchmark(&small_spec(seed)).expect("valid spec")
}

/// Frames of every detected segment, keyed by segment id.
pub fn segments(stream: &BenchStream) -> BTreeMap<u32, Vec<Frame>> {
    let events = segment_all(SegmenterConfig::default(), stream.data.frames.iter().cloned()).unwrap();
    let mut out: BTreeMap<u32, Vec<Frame>> = BTreeMap::new();
    for ev in events {
        match ev {
            SegmenterEvent::SegmentStart { segment_id, .. } => {
                out.insert(segment_id, Vec::new());
            }
            SegmenterEvent::FrameForwarded { segment_id, frame } => {
                out.get_mut(&segment_id).unwrap().push(frame);
            }
            SegmenterEvent::SegmentEnd { .. } => {}
        }
    }
    out
}

pub fn scorer(bench: &Benchmark) -> PrecomputedScores {
    PrecomputedScores {
        state_count: bench.spec.state_count,
    }
}

/// Decodes one segment in chunks of `chunk` frames (0 means whole segment).
pub fn decode_segment(
    dec: &Decoder<'_>,
    am: &dyn AcousticScorer,
    segment_id: u32,
    frames: &[Frame],
    chunk: usize,
) -> Hypothesis {
    let size = if chunk == 0 { frames.len().max(1) } else { chunk };
    let mut st = dec.init_search(segment_id);
    for (i, part) in frames.chunks(size).enumerate() {
        let c = Chunk::new(part.to_vec(), segment_id, i as u32).unwrap();
        dec.decode_chunk(&mut st, &c, am).unwrap();
    }
    st.end_of_segment(segment_id).unwrap();
    dec.finalize_segment(&mut st).unwrap()
}

pub fn decoder(bench: &Benchmark) -> Decoder<'_> {
    Decoder::new(&bench.lm, &bench.lexicon, SearchConfig::default()).unwrap()
}
