mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use common::{segments, small_bench};
use streamlat::harness::{
    build_report, commitment_latencies, flush_sweep, references, run_variant, score_log, word_latencies, Benchmark,
    RunConfig, RunLog, Variant, VariantConfig,
};
use streamlat::{Error, EventKind, Transcript};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn fixture() -> RunLog {
    RunLog::read(BufReader::new(File::open(data("update_fixture.log")).unwrap())).unwrap()
}

fn fixture_refs() -> BTreeMap<String, Transcript> {
    let t = Transcript::read(BufReader::new(File::open(data("s0.ref.tsv")).unwrap())).unwrap();
    BTreeMap::from([("s0".to_string(), t)])
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn fixture_latencies_match_hand_computation() {
    let log = fixture();
    let mut words = word_latencies(&log.events).unwrap();
    words.sort_by(f64::total_cmp);
    let expected = [0.1, 0.4, 0.5, 0.7, 0.8];
    assert_eq!(words.len(), expected.len());
    assert!(words.iter().zip(expected).all(|(a, b)| close(*a, b)), "{words:?}");

    let mut commits = commitment_latencies(&log.events).unwrap();
    commits.sort_by(f64::total_cmp);
    let expected = [0.7, 1.0, 1.2];
    assert!(commits.iter().zip(expected).all(|(a, b)| close(*a, b)), "{commits:?}");
}

#[test]
fn fixture_report_matches_hand_computation() {
    let report = build_report(&[fixture()], &fixture_refs()).unwrap();
    let v = report.variant("Update").unwrap();
    // then/the substitution plus the dropped second "the"
    assert_eq!((v.errors, v.reference_words), (2, 6));
    assert!(close(v.wer, 2.0 / 6.0));
    assert!(close(v.mean_rtf, 0.4));
    assert!(close(v.mean_word_latency, 0.5));
    assert!(close(v.max_word_latency, 0.8));
    assert!(close(v.mean_commitment_latency, 2.9 / 3.0));
    assert!(close(v.max_commitment_latency, 1.2));
    assert_eq!(v.histogram.total(), 5);
    assert_eq!(report.seeds, vec![7]);
    let table = report.overall_table();
    assert!(table.starts_with("System       |    WER |   RTF | Commit. Latency | Word Latency\n"));
    assert!(
        table.contains("Update       |  33.33 |  0.40 |            0.97 |         0.50"),
        "{table}"
    );
}

#[test]
fn truncated_log_is_incomplete() {
    let text = fixture().to_text();
    let cut = text.replace("# end\n", "");
    assert!(matches!(RunLog::read(cut.as_bytes()), Err(Error::IncompleteRun(_))));
    let no_end: String = text
        .lines()
        .filter(|l| !l.contains("SegmentEnd"))
        .map(|l| format!("{l}\n"))
        .collect();
    let log = RunLog::read(no_end.as_bytes()).unwrap();
    assert!(matches!(word_latencies(&log.events), Err(Error::IncompleteRun(_))));
    let garbled = text.replace("\"t_emit\":1.0", "\"t_emit\":");
    assert!(matches!(
        RunLog::read(garbled.as_bytes()),
        Err(Error::Parse { line: 6, .. })
    ));
}

#[test]
fn duplicate_variants_are_rejected() {
    assert!(build_report(&[fixture(), fixture()], &fixture_refs()).is_err());
}

#[test]
fn segmenter_finds_every_generated_segment() {
    let bench = small_bench(21);
    for s in &bench.streams {
        assert_eq!(segments(s).len(), s.truth_segments.len(), "{}", s.meta.name);
    }
}

#[test]
fn exact_searches_agree() {
    let cfg = RunConfig::default();
    for seed in [22, 23] {
        let bench = small_bench(seed);
        let mut finals = Vec::new();
        for v in [Variant::Baseline1, Variant::Baseline2, Variant::Portion] {
            let mut vc = VariantConfig::of(v);
            vc.adaptive_pruning = false;
            let run = run_variant(&vc, &bench, &cfg).unwrap();
            finals.push(run.streams.iter().flat_map(|s| s.finals.clone()).collect::<Vec<_>>());
        }
        assert_eq!(finals[0], finals[1], "seed {seed}");
        assert_eq!(finals[0], finals[2], "seed {seed}");
    }
}

#[test]
fn event_kinds_follow_the_variant() {
    let bench = small_bench(24);
    let cfg = RunConfig::default();
    for v in Variant::ALL {
        let run = run_variant(&VariantConfig::of(v), &bench, &cfg).unwrap();
        let has = |k| run.events().any(|e| e.kind == k);
        assert_eq!(has(EventKind::Update), VariantConfig::of(v).update, "{v}");
        if matches!(v, Variant::Baseline1 | Variant::Baseline2) {
            assert!(!has(EventKind::Stable) && !has(EventKind::Flush), "{v}");
        }
        let starts = run.events().filter(|e| e.kind == EventKind::SegmentStart).count();
        let ends = run.events().filter(|e| e.kind == EventKind::SegmentEnd).count();
        assert_eq!(starts, ends);
    }
}

#[test]
fn runs_are_deterministic() {
    let bench = small_bench(25);
    let cfg = RunConfig::default();
    let v = VariantConfig::of(Variant::Update);
    let a = RunLog::from_run(&run_variant(&v, &bench, &cfg).unwrap()).to_text();
    let b = RunLog::from_run(&run_variant(&v, &bench, &cfg).unwrap()).to_text();
    assert_eq!(a, b);
    assert!(a.contains("# flags {"));
}

#[test]
fn unlimited_sweep_row_is_plain_portion() {
    let bench = small_bench(26);
    let cfg = RunConfig::default();
    let rows = flush_sweep(&bench, &cfg, &[f64::INFINITY, 2.0, 1.0]).unwrap();
    let thresholds: Vec<f64> = rows.iter().map(|r| r.threshold).collect();
    assert_eq!(thresholds, [1.0, 2.0, f64::INFINITY]);
    let plain = run_variant(&VariantConfig::of(Variant::Portion), &bench, &cfg).unwrap();
    let scored = score_log(&RunLog::from_run(&plain), &references(&bench)).unwrap();
    let inf = rows.last().unwrap();
    assert_eq!(inf.flushes, 0);
    assert_eq!(inf.wer, scored.wer);
    assert_eq!(inf.max_word_latency, scored.max_word_latency);
    assert_eq!(inf.mean_word_latency, scored.mean_word_latency);
    assert!(flush_sweep(&bench, &cfg, &[f64::NAN]).is_err());
    assert!(flush_sweep(&bench, &cfg, &[0.0]).is_err());
}

#[test]
fn flush_is_rejected_without_partial_output() {
    assert!(VariantConfig::of(Variant::Baseline2).with_flush(3.0).is_err());
    assert!(VariantConfig::of(Variant::Baseline1).with_flush(f64::INFINITY).is_ok());
    assert!(VariantConfig::of(Variant::Portion).with_flush(3.0).is_ok());
}

#[test]
fn benchmark_directory_round_trip() {
    let bench = small_bench(27);
    let dir = tempfile::tempdir().unwrap();
    bench.write_dir(dir.path()).unwrap();
    let loaded = Benchmark::load_dir(dir.path()).unwrap();
    assert_eq!(loaded.spec, bench.spec);
    assert_eq!(loaded.streams.len(), bench.streams.len());
    let cfg = RunConfig::default();
    let v = VariantConfig::of(Variant::Portion);
    let a = run_variant(&v, &bench, &cfg).unwrap();
    let b = run_variant(&v, &loaded, &cfg).unwrap();
    assert_eq!(a.events().collect::<Vec<_>>(), b.events().collect::<Vec<_>>());
    for (x, y) in bench.streams.iter().zip(&loaded.streams) {
        assert_eq!(x.reference, y.reference);
        assert_eq!(x.data, y.data);
    }
}
