use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bench::{BenchStream, Benchmark};
use crate::decoder::{Decoder, DecoderState, PrecomputedScores, SearchConfig};
use crate::error::{Error, Result};
use crate::ingest::{
    segment_all, BufferWriter, Chunk, ChunkRead, ClockMode, Frame, ReplayClock, Segmenter, SegmenterConfig,
    SegmenterEvent, StreamBuffer, DEFAULT_BUFFER_CAPACITY, DEFAULT_CHUNK_FRAMES,
};
use crate::model::{Hypothesis, TimedWord};
use crate::protocol::{diff_update, EmissionEvent, EventKind};
use crate::pruning::{PruneController, DEFAULT_NARROW_FACTOR};
use crate::stability::{maybe_flush, stable_prefix, FlushConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "Baseline-1")]
    Baseline1,
    #[serde(rename = "Baseline-2")]
    Baseline2,
    Portion,
    Update,
    #[serde(rename = "Update-NA")]
    UpdateNa,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Baseline1,
        Variant::Baseline2,
        Variant::Portion,
        Variant::Update,
        Variant::UpdateNa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline1 => "Baseline-1",
            Variant::Baseline2 => "Baseline-2",
            Variant::Portion => "Portion",
            Variant::Update => "Update",
            Variant::UpdateNa => "Update-NA",
        }
    }

    /// Command-line spelling.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Baseline1 => "baseline1",
            Variant::Baseline2 => "baseline2",
            Variant::Portion => "portion",
            Variant::Update => "update",
            Variant::UpdateNa => "update-na",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.slug() == s || v.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant {s:?}")))
    }
}

/// System flags; the constructor fixes them per variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub variant: Variant,
    pub run_on: bool,
    pub adaptive_pruning: bool,
    pub partial_hypothesis: bool,
    pub update: bool,
    /// seconds; infinite disables the forced flush
    pub flush_threshold: f64,
}

impl VariantConfig {
    pub fn of(variant: Variant) -> Self {
        let (run_on, adaptive_pruning, partial_hypothesis, update) = match variant {
            Variant::Baseline1 => (false, false, false, false),
            Variant::Baseline2 => (true, true, false, false),
            Variant::Portion => (true, true, true, false),
            Variant::Update => (true, true, true, true),
            Variant::UpdateNa => (true, false, true, true),
        };
        Self {
            variant,
            run_on,
            adaptive_pruning,
            partial_hypothesis,
            update,
            flush_threshold: f64::INFINITY,
        }
    }

    /// Flushing needs partial output; other variants reject a threshold.
    pub fn with_flush(mut self, threshold: f64) -> Result<Self> {
        let flush = FlushConfig::after(threshold)?;
        if flush.enabled && !self.partial_hypothesis {
            return Err(Error::InvalidInput(format!(
                "{} emits no partial output to flush",
                self.variant
            )));
        }
        self.flush_threshold = threshold;
        Ok(self)
    }

    fn flush(&self) -> FlushConfig {
        FlushConfig::after(self.flush_threshold).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub chunk_frames: usize,
    pub search: SearchConfig,
    pub narrow_factor: f64,
    pub segmenter: SegmenterConfig,
    pub buffer_capacity: usize,
    pub clock: ClockMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chunk_frames: DEFAULT_CHUNK_FRAMES,
            search: SearchConfig::default(),
            narrow_factor: DEFAULT_NARROW_FACTOR,
            segmenter: SegmenterConfig::default(),
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            clock: ClockMode::Virtual,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_frames == 0 || self.buffer_capacity < self.chunk_frames {
            return Err(Error::InvalidInput(format!(
                "chunk of {} frames with a buffer of {}",
                self.chunk_frames, self.buffer_capacity
            )));
        }
        self.search.validate()?;
        self.segmenter.validate()?;
        PruneController::new(self.search.beam, self.narrow_factor)?;
        Ok(())
    }
}

/// Timing of one decoded chunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub segment: u32,
    pub audio_start: f64,
    pub audio_end: f64,
    pub start: f64,
    pub finish: f64,
    pub cost: f64,
    pub beam: f64,
    pub backlog: f64,
    pub token_frames: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub name: String,
    pub first_segment: u32,
    pub segments: u32,
    pub audio_seconds: f64,
    pub cost_seconds: f64,
    pub events: Vec<EmissionEvent>,
    pub chunks: Vec<ChunkRecord>,
    pub finals: Vec<Hypothesis>,
    pub max_backlog: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub variant: VariantConfig,
    pub config: RunConfig,
    pub seed: u64,
    pub streams: Vec<StreamRun>,
}

impl RunOutput {
    pub fn events(&self) -> impl Iterator<Item = &EmissionEvent> {
        self.streams.iter().flat_map(|s| s.events.iter())
    }

    pub fn max_backlog(&self) -> f64 {
        self.streams.iter().map(|s| s.max_backlog).fold(0.0, f64::max)
    }
}

/// Decoder side of one stream: turns chunks and segment ends into events.
struct Recognizer<'a> {
    dec: Decoder<'a>,
    variant: VariantConfig,
    flush: FlushConfig,
    ctl: PruneController,
    am: PrecomputedScores,
    frame_ms: u32,
    state: Option<DecoderState>,
    batch: Vec<Frame>,
    shown: Vec<TimedWord>,
    last_emission: f64,
    prev_audio_end: Option<f64>,
    out: StreamRun,
}

impl<'a> Recognizer<'a> {
    fn new(
        bench: &'a Benchmark,
        variant: VariantConfig,
        cfg: &RunConfig,
        name: String,
        first_segment: u32,
    ) -> Result<Self> {
        Ok(Self {
            dec: Decoder::new(&bench.lm, &bench.lexicon, cfg.search)?,
            variant,
            flush: variant.flush(),
            ctl: PruneController::new(cfg.search.beam, cfg.narrow_factor)?,
            am: PrecomputedScores {
                state_count: bench.lexicon.state_count(),
            },
            frame_ms: cfg.search.frame_ms,
            state: None,
            batch: Vec::new(),
            shown: Vec::new(),
            last_emission: 0.0,
            prev_audio_end: None,
            out: StreamRun {
                name,
                first_segment,
                segments: 0,
                audio_seconds: 0.0,
                cost_seconds: 0.0,
                events: Vec::new(),
                chunks: Vec::new(),
                finals: Vec::new(),
                max_backlog: 0.0,
            },
        })
    }

    fn emit(&mut self, ev: EmissionEvent) {
        self.out.events.push(ev);
    }

    fn open(&mut self, segment: u32, now: f64) {
        if self.state.as_ref().is_some_and(|s| s.segment_id() == segment) {
            return;
        }
        self.state = Some(self.dec.init_search(segment));
        self.shown.clear();
        self.last_emission = now;
        self.out.segments += 1;
        self.emit(EmissionEvent::new(EventKind::SegmentStart, segment, now, Vec::new()));
    }

    fn on_chunk(&mut self, chunk: Chunk, clock: &mut ReplayClock) -> Result<()> {
        if !self.variant.run_on {
            self.batch.extend_from_slice(chunk.frames());
            return Ok(());
        }
        let start = clock.now();
        let segment = chunk.segment_id();
        self.open(segment, start);
        let (out, finish) = self.decode(&chunk, clock)?;

        if self.variant.partial_hypothesis {
            let state = self.state.as_mut().expect("segment is open");
            if self.variant.update {
                let tail = &out.best.words()[state.released_words()..];
                if let Some((from, words)) = diff_update(&self.shown, tail) {
                    self.shown = tail.to_vec();
                    self.out
                        .events
                        .push(EmissionEvent::update(segment, finish, from, words));
                }
            }
            let portion = stable_prefix(&self.dec, state)?;
            if !portion.is_empty() {
                self.commit(EventKind::Stable, segment, finish, portion.words);
            }
            let state = self.state.as_mut().expect("segment is open");
            if let Some(flush) = maybe_flush(&self.dec, state, finish, self.last_emission, &self.flush)? {
                self.commit(EventKind::Flush, segment, finish, flush.words);
            }
        }
        Ok(())
    }

    fn commit(&mut self, kind: EventKind, segment: u32, at: f64, words: Vec<TimedWord>) {
        let n = words.len().min(self.shown.len());
        self.shown.drain(..n);
        self.last_emission = at;
        self.emit(EmissionEvent::new(kind, segment, at, words));
    }

    /// Decodes one chunk, charges its cost and adapts the beam.
    fn decode(&mut self, chunk: &Chunk, clock: &mut ReplayClock) -> Result<(crate::decoder::ChunkOutput, f64)> {
        let start = clock.now();
        let audio_start = chunk.frames()[0].time;
        let audio_end = chunk.frames()[chunk.len() - 1].end_time(self.frame_ms);
        if let Some(prev) = self.prev_audio_end {
            self.ctl.idle(audio_start - prev);
        }
        self.prev_audio_end = Some(audio_end);
        let state = self.state.as_mut().expect("segment is open");
        let beam = if self.variant.adaptive_pruning {
            self.ctl.current_beam()
        } else {
            self.ctl.nominal_beam()
        };
        state.set_beam(beam);
        let out = self.dec.decode_chunk(state, chunk, &self.am)?;
        let finish = clock.advance(out.work)?;
        let cost = finish - start;
        let audio = audio_end - audio_start;
        self.ctl.observe_chunk(audio, cost);
        self.out.audio_seconds += audio;
        self.out.cost_seconds += cost;
        self.out.max_backlog = self.out.max_backlog.max(self.ctl.backlog());
        self.out.chunks.push(ChunkRecord {
            segment: chunk.segment_id(),
            audio_start,
            audio_end,
            start,
            finish,
            cost,
            beam,
            backlog: self.ctl.backlog(),
            token_frames: out.token_frames,
        });
        Ok((out, finish))
    }

    fn on_end(&mut self, segment: u32, clock: &mut ReplayClock) -> Result<()> {
        if !self.variant.run_on {
            let start = clock.now();
            self.state = None;
            self.open(segment, start);
            let frames = std::mem::take(&mut self.batch);
            if !frames.is_empty() {
                let chunk = Chunk::new(frames, segment, 0)?;
                self.decode(&chunk, clock)?;
            }
        } else {
            let now = clock.now();
            self.open(segment, now);
        }
        let now = clock.now();
        let state = self.state.as_mut().expect("segment is open");
        state.end_of_segment(segment)?;
        let released = state.released_words();
        let final_hyp = self.dec.finalize_segment(state)?;
        let tail = final_hyp.words()[released..].to_vec();
        if self.variant.update {
            if let Some((from, words)) = diff_update(&self.shown, &tail) {
                self.emit(EmissionEvent::update(segment, now, from, words));
            }
            self.emit(EmissionEvent::new(EventKind::SegmentEnd, segment, now, Vec::new()));
        } else {
            self.emit(EmissionEvent::new(EventKind::SegmentEnd, segment, now, tail));
        }
        self.shown.clear();
        self.out.finals.push(final_hyp);
        self.state = None;
        Ok(())
    }
}

fn shift(ev: SegmenterEvent, offset: u32) -> SegmenterEvent {
    match ev {
        SegmenterEvent::SegmentStart { segment_id, time } => SegmenterEvent::SegmentStart {
            segment_id: segment_id + offset,
            time,
        },
        SegmenterEvent::FrameForwarded { segment_id, frame } => SegmenterEvent::FrameForwarded {
            segment_id: segment_id + offset,
            frame,
        },
        SegmenterEvent::SegmentEnd { segment_id, time } => SegmenterEvent::SegmentEnd {
            segment_id: segment_id + offset,
            time,
        },
    }
}

/// Segmenter output with the capture time at which each event exists.
fn timed_segmentation(stream: &BenchStream, cfg: &SegmenterConfig, offset: u32) -> Result<Vec<(f64, SegmenterEvent)>> {
    let fms = stream.data.frame_ms;
    let mut seg = Segmenter::new(*cfg)?;
    let mut out = Vec::new();
    for f in &stream.data.frames {
        let arrival = f.end_time(fms);
        out.extend(seg.step(f.clone())?.into_iter().map(|e| (arrival, shift(e, offset))));
    }
    let end = stream.duration();
    out.extend(seg.finish().into_iter().map(|e| (end, shift(e, offset))));
    Ok(out)
}

/// Returns false when the buffer is full.
fn deliver(writer: &mut BufferWriter, ev: &SegmenterEvent) -> Result<bool> {
    match ev {
        SegmenterEvent::SegmentStart { segment_id, .. } => writer.start_segment(*segment_id)?,
        SegmenterEvent::FrameForwarded { frame, .. } => return Ok(writer.write(std::slice::from_ref(frame))? == 1),
        SegmenterEvent::SegmentEnd { .. } => writer.end_segment()?,
    }
    Ok(true)
}

fn consume(rec: &mut Recognizer<'_>, read: ChunkRead, clock: &mut ReplayClock) -> Result<bool> {
    match read {
        ChunkRead::Chunk(chunk) => rec.on_chunk(chunk, clock)?,
        ChunkRead::EndOfSegment(id) => rec.on_end(id, clock)?,
        ChunkRead::NotYetAvailable | ChunkRead::Closed => return Ok(false),
    }
    Ok(true)
}

fn run_stream_virtual(
    bench: &Benchmark,
    stream: &BenchStream,
    variant: VariantConfig,
    cfg: &RunConfig,
    events: Vec<(f64, SegmenterEvent)>,
    offset: u32,
) -> Result<StreamRun> {
    let mut rec = Recognizer::new(bench, variant, cfg, stream.meta.name.clone(), offset)?;
    let (mut writer, mut reader) = StreamBuffer::with_capacity(cfg.buffer_capacity);
    let mut clock = ReplayClock::virtual_at(0.0);
    let mut next = 0;
    loop {
        let now = clock.now();
        while next < events.len() && events[next].0 <= now {
            if !deliver(&mut writer, &events[next].1)? {
                break;
            }
            next += 1;
        }
        if next == events.len() {
            writer.close();
        }
        match reader.read_chunk(cfg.chunk_frames) {
            ChunkRead::Closed => break,
            ChunkRead::NotYetAvailable => {
                if next == events.len() || events[next].0 <= now {
                    return Err(Error::Protocol("replay stalled with input pending".into()));
                }
                clock.wait_until(events[next].0);
            }
            read => {
                consume(&mut rec, read, &mut clock)?;
            }
        }
    }
    Ok(rec.out)
}

fn run_stream_wall(
    bench: &Benchmark,
    stream: &BenchStream,
    variant: VariantConfig,
    cfg: &RunConfig,
    offset: u32,
) -> Result<StreamRun> {
    let mut rec = Recognizer::new(bench, variant, cfg, stream.meta.name.clone(), offset)?;
    let (mut writer, mut reader) = StreamBuffer::with_capacity(cfg.buffer_capacity);
    let mut clock = ReplayClock::new(ClockMode::Wall);
    let seg_cfg = cfg.segmenter;
    std::thread::scope(|scope| -> Result<()> {
        let producer = scope.spawn(move || -> Result<()> {
            let mut capture = ReplayClock::new(ClockMode::Wall);
            let mut seg = Segmenter::new(seg_cfg)?;
            let fms = stream.data.frame_ms;
            let push = |writer: &mut BufferWriter, evs: Vec<SegmenterEvent>| -> Result<()> {
                for ev in evs {
                    while !deliver(writer, &shift(ev.clone(), offset))? {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                }
                Ok(())
            };
            for f in &stream.data.frames {
                capture.wait_until(f.end_time(fms));
                let evs = seg.step(f.clone())?;
                push(&mut writer, evs)?;
            }
            push(&mut writer, seg.finish())?;
            writer.close();
            Ok(())
        });
        loop {
            match reader.read_chunk_timeout(cfg.chunk_frames, Duration::from_millis(50)) {
                ChunkRead::Closed => break,
                ChunkRead::NotYetAvailable => {}
                read => {
                    consume(&mut rec, read, &mut clock)?;
                }
            }
        }
        producer
            .join()
            .map_err(|_| Error::Protocol("capture thread panicked".into()))?
    })?;
    Ok(rec.out)
}

/// Segments per stream, for assigning run-wide segment ids.
fn segment_offsets(bench: &Benchmark, cfg: &SegmenterConfig) -> Result<Vec<u32>> {
    let counts = bench
        .streams
        .par_iter()
        .map(|s| {
            let evs = segment_all(*cfg, s.data.frames.iter().cloned())?;
            Ok(evs
                .iter()
                .filter(|e| matches!(e, SegmenterEvent::SegmentStart { .. }))
                .count() as u32)
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(counts
        .iter()
        .scan(0u32, |acc, &n| {
            let first = *acc;
            *acc += n;
            Some(first)
        })
        .collect())
}

/// Runs one system over every stream of the benchmark. Streams run in
/// parallel; results do not depend on the thread count.
pub fn run_variant(variant: &VariantConfig, bench: &Benchmark, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.search.frame_ms != bench.spec.frame_ms || cfg.segmenter.frame_ms != bench.spec.frame_ms {
        return Err(Error::InvalidInput(format!(
            "run configured for {} ms frames, benchmark uses {} ms",
            cfg.search.frame_ms, bench.spec.frame_ms
        )));
    }
    let offsets = segment_offsets(bench, &cfg.segmenter)?;
    let streams = match cfg.clock {
        ClockMode::Virtual => bench
            .streams
            .par_iter()
            .zip(offsets.par_iter())
            .map(|(s, &off)| {
                let events = timed_segmentation(s, &cfg.segmenter, off)?;
                run_stream_virtual(bench, s, *variant, cfg, events, off)
            })
            .collect::<Result<Vec<_>>>()?,
        // live replay: one stream after another, each in real time
        ClockMode::Wall => bench
            .streams
            .iter()
            .zip(&offsets)
            .map(|(s, &off)| run_stream_wall(bench, s, *variant, cfg, off))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(RunOutput {
        variant: *variant,
        config: *cfg,
        seed: bench.spec.seed,
        streams,
    })
}
