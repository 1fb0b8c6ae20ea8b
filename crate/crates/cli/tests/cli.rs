use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");

fn streamlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamlat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &[&str] = &["--seed", "3", "--streams", "2", "--words", "40", "--vocab", "30"];

fn synth_small(dir: &Path) -> PathBuf {
    let out = dir.join("bench");
    let mut args = vec!["synth", "--out", s(&out)];
    args.extend_from_slice(SMALL);
    let res = streamlat(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    out
}

fn run_log(bench: &Path, variant: &str, log: &Path, extra: &[&str]) -> String {
    let mut args = vec!["run", "--variant", variant, "--bench", s(bench), "--log", s(log)];
    args.extend_from_slice(extra);
    let res = streamlat(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    fs::read_to_string(log).unwrap()
}

#[test]
fn golden_logs_give_the_golden_report() {
    let tmp = TempDir::new().unwrap();
    let hist = tmp.path().join("hist.tsv");
    let json = tmp.path().join("report.json");
    let res = streamlat(&[
        "report",
        "--logs",
        &format!("{DATA}/*.log"),
        "--refs",
        DATA,
        "--hist",
        s(&hist),
        "--json",
        s(&json),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let golden = fs::read_to_string(format!("{DATA}/report.golden.txt")).unwrap();
    assert_eq!(stdout(&res), golden);

    // three Update words, all 0.1 s late, and an empty overflow bin
    let hist = fs::read_to_string(hist).unwrap();
    let lines: Vec<&str> = hist.lines().collect();
    assert_eq!(lines.len(), 121);
    assert_eq!(lines[0], "0.00\t3");
    assert_eq!(lines[120], "30.00\t0");
    assert!(lines[1..].iter().all(|l| l.ends_with("\t0")));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    let names: Vec<&str> = report["variants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["Baseline-1", "Baseline-2", "Portion", "Update", "Update-NA"]);
    assert_eq!(report["seeds"], serde_json::json!([7]));
}

#[test]
fn report_is_repeatable() {
    let args = ["report", "--logs", &format!("{DATA}/*.log"), "--refs", DATA];
    assert_eq!(streamlat(&args).stdout, streamlat(&args).stdout);
}

#[test]
fn unreadable_logs_exit_with_input_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.log"), "# streamlat 0.1.0\nnot json\n").unwrap();
    let res = streamlat(&["report", "--logs", &format!("{}/*.log", s(tmp.path())), "--refs", DATA]);
    assert_eq!(code(&res), 3);
    let res = streamlat(&["report", "--logs", &format!("{}/*.none", s(tmp.path())), "--refs", DATA]);
    assert_eq!(code(&res), 3);
}

#[test]
fn invalid_spec_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let res = streamlat(&["synth", "--streams", "0", "--out", s(&tmp.path().join("b"))]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("stream"), "{}", stderr(&res));
    assert!(!tmp.path().join("b").exists());
}

#[test]
fn bad_flags_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let bench = s(tmp.path());
    assert_eq!(
        code(&streamlat(&[
            "run",
            "--variant",
            "update",
            "--bench",
            bench,
            "--wav",
            "a.wav"
        ])),
        2
    );
    assert_eq!(code(&streamlat(&["run", "--variant", "nonsense", "--bench", bench])), 2);
    assert_eq!(
        code(&streamlat(&[
            "run",
            "--variant",
            "update",
            "--bench",
            bench,
            "--frobnicate"
        ])),
        2
    );
    assert_eq!(
        code(&streamlat(&[
            "run",
            "--variant",
            "update",
            "--bench",
            bench,
            "--chunk-frames",
            "0"
        ])),
        2
    );
    assert_eq!(
        code(&streamlat(&[
            "run",
            "--variant",
            "baseline1",
            "--bench",
            bench,
            "--flush-threshold",
            "3"
        ])),
        2
    );
    assert_eq!(code(&streamlat(&["sweep", "--bench", bench, "--thresholds", "1,x"])), 2);
    assert_eq!(code(&streamlat(&["sweep", "--bench", bench, "--thresholds", "0,1"])), 2);
}

#[test]
fn missing_benchmark_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let res = streamlat(&["run", "--variant", "update", "--bench", s(&tmp.path().join("absent"))]);
    assert_eq!(code(&res), 3);
}

#[test]
fn synth_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (da, db) = (synth_small(a.path()), synth_small(b.path()));
    let mut names: Vec<_> = fs::read_dir(&da).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3 + 3 * 2, "{names:?}");
    for n in names {
        assert_eq!(fs::read(da.join(&n)).unwrap(), fs::read(db.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn run_writes_a_complete_log() {
    let tmp = TempDir::new().unwrap();
    let bench = synth_small(tmp.path());
    let text = run_log(&bench, "update", &tmp.path().join("u.log"), &[]);
    assert!(text.starts_with("# streamlat "));
    assert!(text.contains("# seed 3\n"));
    assert!(text.ends_with("# end\n"));
    let flags = text.lines().find_map(|l| l.strip_prefix("# flags ")).unwrap();
    let flags: serde_json::Value = serde_json::from_str(flags).unwrap();
    assert_eq!(flags["run"]["chunk_frames"], 40);
    let starts = text.matches("\"kind\":\"SegmentStart\"").count();
    let ends = text.matches("\"kind\":\"SegmentEnd\"").count();
    assert!(starts > 0);
    assert_eq!(starts, ends);

    let again = run_log(&bench, "update", &tmp.path().join("u2.log"), &[]);
    assert_eq!(text, again);
}

#[test]
fn short_flush_threshold_forces_flushes() {
    let tmp = TempDir::new().unwrap();
    let bench = synth_small(tmp.path());
    let plain = run_log(&bench, "portion", &tmp.path().join("p.log"), &[]);
    assert!(!plain.contains("\"kind\":\"Flush\""));
    let text = run_log(
        &bench,
        "portion",
        &tmp.path().join("f.log"),
        &["--flush-threshold", "0.3"],
    );
    assert!(text.contains("\"kind\":\"Flush\""));
    assert!(text.contains("\"flush_threshold\":0.3"));
}

#[test]
fn single_stream_from_a_score_file() {
    let tmp = TempDir::new().unwrap();
    let bench = synth_small(tmp.path());
    let frames = fs::read_dir(&bench)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "frames"))
        .unwrap();
    let text = run_log(
        &bench,
        "portion",
        &tmp.path().join("one.log"),
        &["--scores", s(&frames)],
    );
    assert_eq!(text.matches("# stream ").count(), 1);
}

#[test]
fn sweep_rows_are_sorted_and_inf_matches_portion() {
    let tmp = TempDir::new().unwrap();
    let bench = synth_small(tmp.path());
    let res = streamlat(&["sweep", "--bench", s(&bench), "--thresholds", "inf,3,1"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let table = stdout(&res);
    let rows: Vec<Vec<String>> = table
        .lines()
        .skip(2)
        .map(|l| l.split('|').map(|c| c.trim().to_string()).collect())
        .collect();
    let thresholds: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(thresholds, ["1.00", "3.00", "inf"]);

    run_log(&bench, "portion", &tmp.path().join("portion.log"), &[]);
    let rep = streamlat(&[
        "report",
        "--logs",
        &format!("{}/portion.log", s(tmp.path())),
        "--refs",
        s(&bench),
        "--json",
        s(&tmp.path().join("r.json")),
    ]);
    assert_eq!(code(&rep), 0, "{}", stderr(&rep));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r.json")).unwrap()).unwrap();
    let portion = &r["variants"][0];
    let inf = &rows[2];
    assert_eq!(inf[1], format!("{:.2}", 100.0 * portion["wer"].as_f64().unwrap()));
    assert_eq!(inf[2], format!("{:.2}", portion["max_word_latency"].as_f64().unwrap()));
    assert_eq!(inf[3], format!("{:.2}", portion["mean_word_latency"].as_f64().unwrap()));
    assert_eq!(inf[4], "0");
}

/// 16 kHz 16-bit mono PCM: a loud tone for the first half, silence after.
fn write_wav(path: &Path, samples: usize) {
    let data = (samples * 2) as u32;
    let mut b = Vec::with_capacity(44 + data as usize);
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&16_000u32.to_le_bytes());
    b.extend_from_slice(&32_000u32.to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&data.to_le_bytes());
    for i in 0..samples {
        let v: i16 = if i < samples / 2 && i % 2 == 0 {
            12_000
        } else if i < samples / 2 {
            -12_000
        } else {
            0
        };
        b.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, b).unwrap();
}

#[test]
fn wav_energies_replace_the_score_file_energies() {
    let tmp = TempDir::new().unwrap();
    let bench = synth_small(tmp.path());
    let meta = fs::read_dir(&bench)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| s(p).ends_with(".meta.json"))
        .unwrap();
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(&meta).unwrap()).unwrap();
    let name = meta["name"].as_str().unwrap();
    let frames = meta["frame_count"].as_u64().unwrap() as usize;
    let scores = bench.join(format!("{name}.frames"));

    let wav = tmp.path().join("a.wav");
    write_wav(&wav, frames * 160);
    let text = run_log(
        &bench,
        "update",
        &tmp.path().join("w.log"),
        &["--scores", s(&scores), "--wav", s(&wav)],
    );
    assert!(text.ends_with("# end\n"));
    assert!(text.contains("\"kind\":\"SegmentEnd\""));

    write_wav(&wav, frames * 80);
    let res = streamlat(&[
        "run",
        "--variant",
        "update",
        "--bench",
        s(&bench),
        "--scores",
        s(&scores),
        "--wav",
        s(&wav),
    ]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("frames"), "{}", stderr(&res));
}
