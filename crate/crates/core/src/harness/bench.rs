use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::decoder::{splitmix, HardRegion, PronLexicon, StateId, SyntheticScorer, SILENCE_STATE};
use crate::error::{Error, Result};
use crate::ingest::{read_stream, write_stream, Frame, StreamData, StreamMeta};
use crate::lm::{load_arpa, train_backoff, write_arpa, NGramModel, WordId};
use crate::model::{millis, TimedWord, Transcript};

/// Everything the generator needs; equal specs give byte-identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub n_streams: usize,
    pub words_per_stream: usize,
    pub vocab_size: usize,
    pub lm_order: usize,
    pub lm_training_words: usize,
    pub lm_discount: f64,
    /// successors preferred by each word in the text source
    pub successors: usize,
    /// probability of a successor drawn uniformly instead
    pub uniform_mix: f64,
    pub frame_ms: u32,
    pub state_count: usize,
    pub states_per_word: usize,
    /// frames per state, inclusive range
    pub state_frames: (u32, u32),
    pub segment_seconds: (f64, f64),
    pub gap_seconds: (f64, f64),
    pub edge_silence_seconds: f64,
    pub pause_probability: f64,
    /// inclusive range
    pub pause_frames: (u32, u32),
    pub speech_energy: f32,
    pub silence_energy: f32,
    pub energy_jitter: f32,
    pub margin: f32,
    pub sigma: f32,
    /// share of all frames inside hard regions
    pub hard_fraction: f64,
    pub hard_seconds: (f64, f64),
    pub hard_margin: f32,
    pub hard_competitors: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_streams: 8,
            words_per_stream: 600,
            vocab_size: 200,
            lm_order: 3,
            lm_training_words: 50_000,
            lm_discount: 0.5,
            successors: 12,
            uniform_mix: 0.15,
            frame_ms: 10,
            state_count: 64,
            states_per_word: 3,
            state_frames: (4, 10),
            segment_seconds: (8.0, 25.0),
            gap_seconds: (1.0, 2.0),
            edge_silence_seconds: 1.0,
            pause_probability: 0.05,
            pause_frames: (5, 15),
            speech_energy: -2.0,
            silence_energy: -9.0,
            energy_jitter: 0.5,
            margin: 3.0,
            sigma: 1.0,
            hard_fraction: 0.10,
            hard_seconds: (3.0, 6.0),
            hard_margin: 2.5,
            hard_competitors: 6,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.n_streams == 0 {
            return bad("at least one stream is required");
        }
        if self.words_per_stream == 0 {
            return bad("streams need at least one word");
        }
        if self.vocab_size == 0 {
            return bad("vocabulary must not be empty");
        }
        if self.state_count < 2 || self.states_per_word == 0 || self.frame_ms == 0 {
            return bad("state inventory, states per word and frame duration must be positive");
        }
        if self.state_frames.0 == 0 || self.state_frames.0 > self.state_frames.1 {
            return bad("state durations must be a non-empty range of positive frame counts");
        }
        let ordered = |r: (f64, f64)| r.0 >= 0.0 && r.0 <= r.1 && r.1.is_finite();
        if !ordered(self.segment_seconds) || !ordered(self.gap_seconds) || !ordered(self.hard_seconds) {
            return bad("time ranges must be ordered and non-negative");
        }
        if self.pause_frames.0 > self.pause_frames.1 {
            return bad("pause range must be ordered");
        }
        if !(0.0..=1.0).contains(&self.pause_probability)
            || !(0.0..1.0).contains(&self.hard_fraction)
            || !(0.0..=1.0).contains(&self.uniform_mix)
        {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(self.margin > 0.0 && self.hard_margin > 0.0 && self.sigma >= 0.0) {
            return bad("margins must be positive and sigma non-negative");
        }
        if self.successors == 0 || self.lm_training_words < 2 {
            return bad("text source needs successors and training text");
        }
        Ok(())
    }

    /// Same generator with every hard region removed.
    pub fn without_hard_regions(&self) -> Self {
        Self {
            hard_fraction: 0.0,
            ..self.clone()
        }
    }

    fn rng(&self, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(purpose);
        rng
    }
}

/// One generated recording with its ground truth.
#[derive(Debug, Clone)]
pub struct BenchStream {
    pub meta: StreamMeta,
    pub data: StreamData,
    pub reference: Transcript,
    /// speech spans as generated, in seconds
    pub truth_segments: Vec<(f64, f64)>,
    pub hard_regions: Vec<HardRegion>,
    pub alignment: Vec<StateId>,
}

impl BenchStream {
    pub fn duration(&self) -> f64 {
        millis(self.data.frames.len() as u64 * u64::from(self.data.frame_ms))
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub lm: NGramModel,
    pub lexicon: PronLexicon,
    pub streams: Vec<BenchStream>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

fn make_vocabulary(spec: &BenchmarkSpec) -> Vec<String> {
    let mut rng = spec.rng(1);
    let mut vocab: Vec<String> = Vec::with_capacity(spec.vocab_size);
    while vocab.len() < spec.vocab_size {
        let syllables = rng.random_range(1..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        if rng.random_bool(0.3) {
            w.push_str(["n", "r", "s", "t"][rng.random_range(0..4)]);
        }
        if !vocab.contains(&w) {
            vocab.push(w);
        }
    }
    vocab
}

/// Sparse bigram source: each word prefers a few successors.
struct TextSource {
    successors: Vec<(Vec<WordId>, WeightedIndex<f64>)>,
    uniform_mix: f64,
    vocab: usize,
}

impl TextSource {
    fn new(spec: &BenchmarkSpec) -> Self {
        let mut rng = spec.rng(2);
        let v = spec.vocab_size;
        let k = spec.successors.min(v);
        let weights: Vec<f64> = (0..k).map(|r| 1.0 / (r as f64 + 1.0)).collect();
        let successors = (0..v)
            .map(|_| {
                let picks = rand::seq::index::sample(&mut rng, v, k)
                    .into_iter()
                    .map(|i| i as WordId)
                    .collect();
                (picks, WeightedIndex::new(&weights).expect("positive weights"))
            })
            .collect();
        Self {
            successors,
            uniform_mix: spec.uniform_mix,
            vocab: v,
        }
    }

    fn generate(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<WordId> {
        let mut out = Vec::with_capacity(n);
        let mut prev = rng.random_range(0..self.vocab) as WordId;
        for _ in 0..n {
            let next = if rng.random_bool(self.uniform_mix) {
                rng.random_range(0..self.vocab) as WordId
            } else {
                let (picks, dist) = &self.successors[prev as usize];
                picks[dist.sample(rng)]
            };
            out.push(next);
            prev = next;
        }
        out
    }
}

fn seconds_to_frames(s: f64, frame_ms: u32) -> u64 {
    (s * 1000.0 / f64::from(frame_ms)).round() as u64
}

fn build_stream(
    spec: &BenchmarkSpec,
    index: usize,
    source: &TextSource,
    vocab: &[String],
    lexicon: &PronLexicon,
) -> Result<BenchStream> {
    let mut rng = spec.rng(100 + index as u64);
    let words = source.generate(&mut rng, spec.words_per_stream);
    let fms = spec.frame_ms;
    let frame_time = |f: u64| millis(f * u64::from(fms));

    let mut alignment: Vec<StateId> = Vec::new();
    let push = |alignment: &mut Vec<StateId>, s: StateId, n: u64| {
        alignment.extend(std::iter::repeat_n(s, n as usize));
    };
    let edge = seconds_to_frames(spec.edge_silence_seconds, fms);
    push(&mut alignment, SILENCE_STATE, edge);

    let mut reference = Vec::with_capacity(words.len());
    let mut truth_segments = Vec::new();
    let mut segment_spans: Vec<(u64, u64)> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let target = seconds_to_frames(rng.random_range(spec.segment_seconds.0..=spec.segment_seconds.1), fms);
        let seg_start = alignment.len() as u64;
        while i < words.len() && (alignment.len() as u64) - seg_start < target {
            if alignment.len() as u64 > seg_start && rng.random_bool(spec.pause_probability) {
                let n = rng.random_range(spec.pause_frames.0..=spec.pause_frames.1);
                push(&mut alignment, SILENCE_STATE, u64::from(n));
            }
            let w = words[i];
            let start = alignment.len() as u64;
            for &s in lexicon.states(w) {
                let n = rng.random_range(spec.state_frames.0..=spec.state_frames.1);
                push(&mut alignment, s, u64::from(n));
            }
            let end = alignment.len() as u64;
            reference.push(TimedWord::new(
                vocab[w as usize].clone(),
                frame_time(start),
                frame_time(end),
            )?);
            i += 1;
        }
        let seg_end = alignment.len() as u64;
        truth_segments.push((frame_time(seg_start), frame_time(seg_end)));
        segment_spans.push((seg_start, seg_end));
        let gap = if i < words.len() {
            seconds_to_frames(rng.random_range(spec.gap_seconds.0..=spec.gap_seconds.1), fms)
        } else {
            edge
        };
        push(&mut alignment, SILENCE_STATE, gap);
    }

    // hard regions inside speech, until the requested share is covered
    let total = alignment.len() as u64;
    let target_hard = (spec.hard_fraction * total as f64) as u64;
    let mut hard_regions: Vec<HardRegion> = Vec::new();
    let mut covered = 0u64;
    let mut attempts = 0;
    while covered < target_hard && attempts < 10_000 {
        attempts += 1;
        let (s0, s1) = segment_spans[rng.random_range(0..segment_spans.len())];
        let len = seconds_to_frames(rng.random_range(spec.hard_seconds.0..=spec.hard_seconds.1), fms).max(1);
        if s1 - s0 <= len {
            continue;
        }
        let start = rng.random_range(s0..s1 - len);
        let end = start + len.min(target_hard - covered).max(1);
        if hard_regions.iter().any(|r| start < r.end + 100 && r.start < end + 100) {
            continue;
        }
        hard_regions.push(HardRegion {
            start,
            end,
            margin: spec.hard_margin,
            competitors: spec.hard_competitors,
        });
        covered += end - start;
    }
    hard_regions.sort_by_key(|r| r.start);

    let scorer = SyntheticScorer {
        alignment: alignment.clone(),
        state_count: spec.state_count,
        margin: spec.margin,
        sigma: spec.sigma,
        hard_regions: hard_regions.clone(),
        seed: splitmix(spec.seed ^ (index as u64).wrapping_mul(0x9e37)),
    };
    let jitter =
        Normal::new(0.0f32, spec.energy_jitter).map_err(|e| Error::InvalidSpec(format!("energy jitter: {e}")))?;
    let frames = (0..total)
        .map(|f| {
            let base = if alignment[f as usize] != SILENCE_STATE {
                spec.speech_energy
            } else {
                spec.silence_energy
            };
            Ok(Frame::new(
                f,
                fms,
                base + jitter.sample(&mut rng),
                scorer.synth_scores(f)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let name = format!("stream_{index:02}");
    Ok(BenchStream {
        meta: StreamMeta {
            reference: format!("{name}.ref.tsv"),
            name,
            seed: scorer.seed,
            frame_count: total,
        },
        data: StreamData {
            frame_ms: fms,
            state_count: spec.state_count as u32,
            frames,
        },
        reference: Transcript::new(reference)?,
        truth_segments,
        hard_regions,
        alignment,
    })
}

/// Generates the whole benchmark in memory.
pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    let vocab = make_vocabulary(spec);
    let source = TextSource::new(spec);
    let training = source.generate(&mut spec.rng(3), spec.lm_training_words);
    let lm = train_backoff(&vocab, &training, spec.lm_order, spec.lm_discount)?;
    let lexicon = PronLexicon::derive(&vocab, spec.states_per_word, spec.state_count)?;
    let streams = (0..spec.n_streams)
        .map(|i| build_stream(spec, i, &source, &vocab, &lexicon))
        .collect::<Result<Vec<_>>>()?;
    Ok(Benchmark {
        spec: spec.clone(),
        lm,
        lexicon,
        streams,
    })
}

pub const SPEC_FILE: &str = "bench.json";
pub const LM_FILE: &str = "lm.arpa";
pub const LEXICON_FILE: &str = "lexicon.tsv";

impl Benchmark {
    /// Writes `bench.json`, `lm.arpa`, `lexicon.tsv` and, per stream,
    /// `<name>.frames`, `<name>.meta.json` and `<name>.ref.tsv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join(SPEC_FILE))?);
        serde_json::to_writer_pretty(&mut out, &self.spec)?;
        out.write_all(b"\n")?;
        out.flush()?;
        write_arpa(&self.lm, BufWriter::new(File::create(dir.join(LM_FILE))?))?;
        let mut lex = BufWriter::new(File::create(dir.join(LEXICON_FILE))?);
        for (i, w) in self.lm.vocabulary().iter().enumerate() {
            writeln!(lex, "{w}\t{}", self.lexicon.states(i as WordId).len())?;
        }
        lex.flush()?;
        for s in &self.streams {
            let path = dir.join(format!("{}.frames", s.meta.name));
            let mut out = BufWriter::new(File::create(&path)?);
            write_stream(&mut out, &s.data)?;
            out.flush()?;
            s.meta.write(&StreamMeta::path_for(&path))?;
            let mut out = BufWriter::new(File::create(dir.join(&s.meta.reference))?);
            s.reference.write(&mut out)?;
            out.flush()?;
        }
        Ok(())
    }

    /// Reads a directory written by [`write_dir`](Self::write_dir). Truth
    /// segments and hard regions are not stored and come back empty.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let spec: BenchmarkSpec = serde_json::from_reader(BufReader::new(File::open(dir.join(SPEC_FILE))?))?;
        spec.validate()?;
        let lm = load_arpa(&dir.join(LM_FILE))?;
        let counts =
            PronLexicon::read_state_counts(BufReader::new(File::open(dir.join(LEXICON_FILE))?), lm.vocabulary())?;
        let lexicon = PronLexicon::with_state_counts(lm.vocabulary(), &counts, spec.state_count)?;
        let mut metas: Vec<_> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.to_string_lossy().ends_with(".meta.json"))
            .collect();
        metas.sort();
        if metas.is_empty() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no stream metadata in {}", dir.display()),
            )));
        }
        let mut streams = Vec::with_capacity(metas.len());
        for meta_path in metas {
            let meta = StreamMeta::read(&meta_path)?;
            let data = read_stream(BufReader::new(File::open(dir.join(format!("{}.frames", meta.name)))?))?;
            if data.frames.len() as u64 != meta.frame_count {
                return Err(Error::InvalidInput(format!(
                    "{}: {} frames, metadata says {}",
                    meta.name,
                    data.frames.len(),
                    meta.frame_count
                )));
            }
            let reference = Transcript::read(BufReader::new(File::open(dir.join(&meta.reference))?))?;
            streams.push(BenchStream {
                meta,
                data,
                reference,
                truth_segments: Vec::new(),
                hard_regions: Vec::new(),
                alignment: Vec::new(),
            });
        }
        Ok(Self {
            spec,
            lm,
            lexicon,
            streams,
        })
    }
}
