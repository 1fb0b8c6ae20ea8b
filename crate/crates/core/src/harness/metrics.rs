use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::run::{RunOutput, Variant};
use crate::error::{Error, Result};
use crate::model::{wer, Transcript, WerBreakdown};
use crate::protocol::{decode_event, encode_event, DisplayState, EmissionEvent, EventKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Per-stream totals carried in a log footer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub name: String,
    pub first_segment: u32,
    pub segments: u32,
    pub audio_seconds: f64,
    pub cost_seconds: f64,
}

/// A complete event log: header, events of every stream, footer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub version: String,
    pub variant: Variant,
    pub seed: u64,
    /// effective settings, echoed verbatim
    pub flags: serde_json::Value,
    pub events: Vec<EmissionEvent>,
    pub streams: Vec<StreamSummary>,
}

impl RunLog {
    pub fn from_run(run: &RunOutput) -> Self {
        let flags = serde_json::json!({
            "variant": run.variant,
            "run": run.config,
        });
        Self {
            version: VERSION.to_string(),
            variant: run.variant.variant,
            seed: run.seed,
            flags,
            events: run.events().cloned().collect(),
            streams: run
                .streams
                .iter()
                .map(|s| StreamSummary {
                    name: s.name.clone(),
                    first_segment: s.first_segment,
                    segments: s.segments,
                    audio_seconds: s.audio_seconds,
                    cost_seconds: s.cost_seconds,
                })
                .collect(),
        }
    }

    /// `#` lines carry the header and footer; every other line is an event.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# streamlat {}", self.version)?;
        writeln!(out, "# variant {}", self.variant.name())?;
        writeln!(out, "# seed {}", self.seed)?;
        writeln!(out, "# flags {}", serde_json::to_string(&self.flags)?)?;
        for ev in &self.events {
            writeln!(out, "{}", encode_event(ev))?;
        }
        for s in &self.streams {
            writeln!(out, "# stream {}", serde_json::to_string(s)?)?;
        }
        writeln!(out, "# end")?;
        Ok(out.flush()?)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut version = None;
        let mut variant = None;
        let mut seed = None;
        let mut flags = serde_json::Value::Null;
        let mut events = Vec::new();
        let mut streams = Vec::new();
        let mut ended = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let parse_err = |msg: String| Error::Parse { line: lineno, msg };
            if line.trim().is_empty() {
                continue;
            }
            if ended {
                return Err(parse_err("content after end marker".into()));
            }
            let Some(comment) = line.strip_prefix("# ") else {
                events.push(decode_event(&line).map_err(|e| parse_err(e.to_string()))?);
                continue;
            };
            let (key, value) = comment.split_once(' ').unwrap_or((comment, ""));
            match key {
                "streamlat" => version = Some(value.to_string()),
                "variant" => variant = Some(value.parse::<Variant>().map_err(|e| parse_err(e.to_string()))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| parse_err(e.to_string()))?),
                "flags" => flags = serde_json::from_str(value).map_err(|e| parse_err(e.to_string()))?,
                "stream" => streams.push(serde_json::from_str(value).map_err(|e| parse_err(e.to_string()))?),
                "end" => ended = true,
                _ => return Err(parse_err(format!("unknown header {key:?}"))),
            }
        }
        if !ended {
            return Err(Error::IncompleteRun("log has no end marker".into()));
        }
        let missing = |what: &str| Error::IncompleteRun(format!("log header lacks {what}"));
        Ok(Self {
            version: version.ok_or_else(|| missing("a version"))?,
            variant: variant.ok_or_else(|| missing("the variant"))?,
            seed: seed.ok_or_else(|| missing("the seed"))?,
            flags,
            events,
            streams,
        })
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("logs are UTF-8")
    }
}

/// Applies every event, then checks that each started segment ended.
pub fn replay(events: &[EmissionEvent]) -> Result<DisplayState> {
    let mut display = DisplayState::new();
    for ev in events {
        display.apply_event(ev)?;
    }
    if let Some((id, _)) = display.segments().find(|(_, s)| !s.ended) {
        return Err(Error::IncompleteRun(format!("segment {id} has no SegmentEnd")));
    }
    Ok(display)
}

/// Last update time minus hypothesized end, for every finalized word.
pub fn word_latencies(events: &[EmissionEvent]) -> Result<Vec<f64>> {
    let display = replay(events)?;
    Ok(display
        .segments()
        .flat_map(|(_, s)| s.committed.iter())
        .map(|d| d.last_update - d.word.end)
        .collect())
}

/// Emission time minus the audio end of what each commit finalized. A
/// segment end counts against the last word of the segment.
pub fn commitment_latencies(events: &[EmissionEvent]) -> Result<Vec<f64>> {
    let display = replay(events)?;
    let mut out = Vec::new();
    for ev in events {
        match ev.kind {
            EventKind::Stable | EventKind::Flush => {
                if let Some(last) = ev.words.last() {
                    out.push(ev.emit_time - last.end);
                }
            }
            EventKind::SegmentEnd => {
                let seg = display.segment(ev.segment_id).expect("replayed above");
                if let Some(last) = seg.committed.last() {
                    out.push(ev.emit_time - last.word.end);
                }
            }
            EventKind::SegmentStart | EventKind::Update => {}
        }
    }
    Ok(out)
}

pub const HISTOGRAM_BIN: f64 = 0.25;
pub const HISTOGRAM_RANGE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// values at or beyond the range
    pub overflow: u64,
}

impl Histogram {
    /// Negative values land in the first bin.
    pub fn of(values: &[f64]) -> Self {
        let bins = (HISTOGRAM_RANGE / HISTOGRAM_BIN).round() as usize;
        let mut counts = vec![0u64; bins];
        let mut overflow = 0;
        for &v in values {
            let b = (v.max(0.0) / HISTOGRAM_BIN).floor() as usize;
            match counts.get_mut(b) {
                Some(c) => *c += 1,
                None => overflow += 1,
            }
        }
        Self {
            bin_width: HISTOGRAM_BIN,
            counts,
            overflow,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    /// `bin_start count` lines; the overflow bin starts at the range end.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{:.2}\t{c}", i as f64 * self.bin_width);
        }
        let _ = writeln!(s, "{:.2}\t{}", self.counts.len() as f64 * self.bin_width, self.overflow);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub wer: f64,
    pub errors: usize,
    pub reference_words: usize,
    pub mean_rtf: f64,
    pub mean_commitment_latency: f64,
    pub mean_word_latency: f64,
    pub max_commitment_latency: f64,
    pub max_word_latency: f64,
    pub word_count: usize,
    pub commit_count: usize,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub version: String,
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantReport>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Hypothesis words of each stream, segments in order.
pub fn stream_hypotheses(log: &RunLog) -> Result<Vec<(String, Vec<String>)>> {
    let display = replay(&log.events)?;
    let mut out = Vec::new();
    for s in &log.streams {
        let mut words = Vec::new();
        for id in s.first_segment..s.first_segment + s.segments {
            let seg = display
                .segment(id)
                .ok_or_else(|| Error::IncompleteRun(format!("segment {id} of {} never started", s.name)))?;
            words.extend(seg.texts().into_iter().map(str::to_string));
        }
        out.push((s.name.clone(), words));
    }
    Ok(out)
}

/// Pooled scores of one run against the references, keyed by stream name.
pub fn score_log(log: &RunLog, refs: &BTreeMap<String, Transcript>) -> Result<VariantReport> {
    let mut breakdown = WerBreakdown::default();
    for (name, hyp) in stream_hypotheses(log)? {
        let reference = refs
            .get(&name)
            .ok_or_else(|| Error::InvalidInput(format!("no reference transcript for {name}")))?;
        breakdown = breakdown.merge(&wer(&reference.texts(), &hyp));
    }
    let words = word_latencies(&log.events)?;
    let commits = commitment_latencies(&log.events)?;
    let audio: f64 = log.streams.iter().map(|s| s.audio_seconds).sum();
    let cost: f64 = log.streams.iter().map(|s| s.cost_seconds).sum();
    Ok(VariantReport {
        name: log.variant.name().to_string(),
        wer: breakdown.wer,
        errors: breakdown.errors(),
        reference_words: breakdown.reference_length,
        mean_rtf: if audio > 0.0 { cost / audio } else { 0.0 },
        mean_commitment_latency: mean(&commits),
        mean_word_latency: mean(&words),
        max_commitment_latency: max(&commits),
        max_word_latency: max(&words),
        word_count: words.len(),
        commit_count: commits.len(),
        histogram: Histogram::of(&words),
    })
}

/// One row per variant, in the fixed system order.
pub fn build_report(logs: &[RunLog], refs: &BTreeMap<String, Transcript>) -> Result<LatencyReport> {
    let mut by_variant: BTreeMap<Variant, &RunLog> = BTreeMap::new();
    for log in logs {
        if by_variant.insert(log.variant, log).is_some() {
            return Err(Error::InvalidInput(format!("two logs for {}", log.variant)));
        }
    }
    let variants = by_variant
        .values()
        .map(|log| score_log(log, refs))
        .collect::<Result<Vec<_>>>()?;
    let seeds: BTreeSet<u64> = logs.iter().map(|l| l.seed).collect();
    Ok(LatencyReport {
        version: VERSION.to_string(),
        seeds: seeds.into_iter().collect(),
        variants,
    })
}

impl LatencyReport {
    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn overall_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} | {:>6} | {:>5} | {:>15} | {:>12}",
            "System", "WER", "RTF", "Commit. Latency", "Word Latency"
        );
        let _ = writeln!(s, "{}", "-".repeat(63));
        for v in &self.variants {
            let _ = writeln!(
                s,
                "{:<12} | {:>6.2} | {:>5.2} | {:>15.2} | {:>12.2}",
                v.name,
                100.0 * v.wer,
                v.mean_rtf,
                v.mean_commitment_latency,
                v.mean_word_latency
            );
        }
        s
    }

    pub fn peak_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} | {:>19} | {:>16}",
            "System", "Max Commit. Latency", "Max Word Latency"
        );
        let _ = writeln!(s, "{}", "-".repeat(53));
        for v in &self.variants {
            let _ = writeln!(
                s,
                "{:<12} | {:>19.2} | {:>16.2}",
                v.name, v.max_commitment_latency, v.max_word_latency
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "streamlat {} seed {}\n\n{}\n{}",
            self.version,
            seeds.join(","),
            self.overall_table(),
            self.peak_table()
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}
