mod common;

use common::{decode_segment, decoder, scorer, segments, small_bench, small_spec};
use streamlat::harness::generate_benchmark;
use streamlat::{Chunk, Decoder, SearchConfig};

#[test]
fn chunking_does_not_change_the_result() {
    for seed in [1, 2] {
        let bench = small_bench(seed);
        let dec = decoder(&bench);
        let am = scorer(&bench);
        for stream in &bench.streams {
            for (id, frames) in segments(stream) {
                let whole = decode_segment(&dec, &am, id, &frames, 0);
                for size in [1, 7, 40] {
                    let part = decode_segment(&dec, &am, id, &frames, size);
                    assert_eq!(part.texts(), whole.texts(), "seed {seed} segment {id} chunk {size}");
                    assert_eq!(part.score(), whole.score());
                    assert_eq!(part.words(), whole.words());
                }
            }
        }
    }
}

#[test]
fn noiseless_scores_recover_the_reference() {
    let spec = streamlat::harness::BenchmarkSpec {
        sigma: 0.0,
        ..small_spec(3)
    };
    let bench = generate_benchmark(&spec).unwrap();
    let dec = decoder(&bench);
    let am = scorer(&bench);
    for stream in &bench.streams {
        let mut words = Vec::new();
        for (id, frames) in segments(stream) {
            let hyp = decode_segment(&dec, &am, id, &frames, 40);
            words.extend(hyp.texts().into_iter().map(str::to_string));
        }
        assert_eq!(words, stream.reference.texts());
    }
}

#[test]
fn active_tokens_respect_the_cap() {
    let bench = small_bench(4);
    let cfg = SearchConfig {
        max_active: 25,
        ..SearchConfig::default()
    };
    let dec = Decoder::new(&bench.lm, &bench.lexicon, cfg).unwrap();
    let am = scorer(&bench);
    let segs = segments(&bench.streams[0]);
    let (&id, frames) = segs.iter().next().unwrap();
    let mut st = dec.init_search(id);
    for (i, part) in frames.chunks(5).enumerate() {
        let c = Chunk::new(part.to_vec(), id, i as u32).unwrap();
        let out = dec.decode_chunk(&mut st, &c, &am).unwrap();
        assert!(st.active_count() <= 25);
        assert!(out.token_frames <= 25 * part.len() as u64);
        let keys = st.active_keys();
        let mut dedup = keys.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), keys.len(), "recombination left duplicate keys");
    }
}

#[test]
fn decoding_is_repeatable() {
    let bench = small_bench(5);
    let am = scorer(&bench);
    let run = || {
        let dec = decoder(&bench);
        segments(&bench.streams[1])
            .iter()
            .map(|(&id, f)| decode_segment(&dec, &am, id, f, 40))
            .collect::<Vec<_>>()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert!(a.iter().all(|h| h.score().is_finite()));
}
