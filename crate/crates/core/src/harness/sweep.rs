use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bench::Benchmark;
use super::metrics::{build_report, score_log, LatencyReport, RunLog};
use super::run::{run_variant, RunConfig, RunOutput, Variant, VariantConfig};
use crate::error::{Error, Result};
use crate::model::Transcript;
use crate::protocol::EventKind;
use crate::pruning::CostModel;

/// Reference transcripts keyed by stream name.
pub fn references(bench: &Benchmark) -> BTreeMap<String, Transcript> {
    bench
        .streams
        .iter()
        .map(|s| (s.meta.name.clone(), s.reference.clone()))
        .collect()
}

/// Every system once, in the fixed order.
pub fn run_suite(bench: &Benchmark, cfg: &RunConfig) -> Result<Vec<RunOutput>> {
    Variant::ALL
        .iter()
        .map(|&v| run_variant(&VariantConfig::of(v), bench, cfg))
        .collect()
}

pub fn suite_report(bench: &Benchmark, cfg: &RunConfig) -> Result<(Vec<RunLog>, LatencyReport)> {
    let logs: Vec<RunLog> = run_suite(bench, cfg)?.iter().map(RunLog::from_run).collect();
    let report = build_report(&logs, &references(bench))?;
    Ok((logs, report))
}

/// Longest wait between consecutive outputs of one segment, counting its
/// start, every commit and its end.
pub fn max_emission_gap(run: &RunOutput) -> f64 {
    let mut worst = 0.0f64;
    for s in &run.streams {
        let mut last: Option<(u32, f64)> = None;
        for ev in &s.events {
            if ev.kind == EventKind::Update {
                continue;
            }
            if let Some((seg, t)) = last {
                if seg == ev.segment_id {
                    worst = worst.max(ev.emit_time - t);
                }
            }
            last = Some((ev.segment_id, ev.emit_time));
        }
    }
    worst
}

pub fn max_chunk_cost(run: &RunOutput) -> f64 {
    run.streams
        .iter()
        .flat_map(|s| s.chunks.iter())
        .map(|c| c.cost)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// seconds; infinite means no flush
    pub threshold: f64,
    pub wer: f64,
    pub max_word_latency: f64,
    pub mean_word_latency: f64,
    pub max_emission_gap: f64,
    pub max_chunk_cost: f64,
    pub flushes: usize,
}

/// Portion runs, one per threshold, sorted ascending with infinity last.
pub fn flush_sweep(bench: &Benchmark, cfg: &RunConfig, thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    let mut sorted = thresholds.to_vec();
    if sorted.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidInput("threshold is NaN".into()));
    }
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let refs = references(bench);
    sorted
        .into_iter()
        .map(|t| {
            let variant = VariantConfig::of(Variant::Portion).with_flush(t)?;
            let run = run_variant(&variant, bench, cfg)?;
            let scored = score_log(&RunLog::from_run(&run), &refs)?;
            Ok(SweepRow {
                threshold: t,
                wer: scored.wer,
                max_word_latency: scored.max_word_latency,
                mean_word_latency: scored.mean_word_latency,
                max_emission_gap: max_emission_gap(&run),
                max_chunk_cost: max_chunk_cost(&run),
                flushes: run.events().filter(|e| e.kind == EventKind::Flush).count(),
            })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{:>9} | {:>6} | {:>16} | {:>17} | {:>7}\n{}\n",
        "Threshold",
        "WER",
        "Max Word Latency",
        "Mean Word Latency",
        "Flushes",
        "-".repeat(68)
    );
    for r in rows {
        let t = if r.threshold.is_finite() {
            format!("{:.2}", r.threshold)
        } else {
            "inf".to_string()
        };
        s.push_str(&format!(
            "{:>9} | {:>6.2} | {:>16.2} | {:>17.2} | {:>7}\n",
            t,
            100.0 * r.wer,
            r.max_word_latency,
            r.mean_word_latency,
            r.flushes
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub model: CostModel,
    /// fixed-beam RTF on the benchmark without hard regions
    pub nominal_rtf: f64,
    /// fixed-beam RTF over chunks that overlap a hard region
    pub hard_rtf: f64,
}

fn fixed_beam_run(bench: &Benchmark, cfg: &RunConfig) -> Result<RunOutput> {
    let mut v = VariantConfig::of(Variant::Baseline2);
    v.adaptive_pruning = false;
    run_variant(&v, bench, cfg)
}

/// Solves `c1` so that fixed-beam decoding of the benchmark without hard
/// regions runs at `target_rtf`, keeping `c0`. Cost is linear in `c1`, so
/// one measuring pass suffices.
pub fn calibrate_cost_model(bench: &Benchmark, cfg: &RunConfig, c0: f64, target_rtf: f64) -> Result<Calibration> {
    if !(target_rtf > 0.0 && target_rtf.is_finite()) {
        return Err(Error::InvalidInput(format!("target RTF {target_rtf}")));
    }
    let easy = super::bench::generate_benchmark(&bench.spec.without_hard_regions())?;
    let probe = fixed_beam_run(&easy, cfg)?;
    let (mut chunks, mut token_frames, mut audio) = (0u64, 0u64, 0.0f64);
    for c in probe.streams.iter().flat_map(|s| s.chunks.iter()) {
        chunks += 1;
        token_frames += c.token_frames;
        audio += c.audio_end - c.audio_start;
    }
    let c1 = (target_rtf * audio - c0 * chunks as f64) / token_frames.max(1) as f64;
    let model = CostModel::new(c0, c1)?;

    let mut tuned = *cfg;
    tuned.search.cost = model;
    let nominal = fixed_beam_run(&easy, &tuned)?;
    let nominal_rtf = overall_rtf(&nominal);
    let hard = fixed_beam_run(bench, &tuned)?;
    let (mut cost, mut audio) = (0.0, 0.0);
    for (s, run) in bench.streams.iter().zip(&hard.streams) {
        for c in &run.chunks {
            let overlaps = s.hard_regions.iter().any(|r| {
                let fms = bench.spec.frame_ms as f64 / 1000.0;
                (r.start as f64 * fms) < c.audio_end && (r.end as f64 * fms) > c.audio_start
            });
            if overlaps {
                cost += c.cost;
                audio += c.audio_end - c.audio_start;
            }
        }
    }
    Ok(Calibration {
        model,
        nominal_rtf,
        hard_rtf: if audio > 0.0 { cost / audio } else { 0.0 },
    })
}

pub fn overall_rtf(run: &RunOutput) -> f64 {
    let audio: f64 = run.streams.iter().map(|s| s.audio_seconds).sum();
    let cost: f64 = run.streams.iter().map(|s| s.cost_seconds).sum();
    if audio > 0.0 {
        cost / audio
    } else {
        0.0
    }
}
