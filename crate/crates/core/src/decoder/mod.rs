//! Time-synchronous token-passing search over chunks.

mod lexicon;
mod scorer;
mod trace;

use std::cell::RefCell;
use std::cmp::Ordering;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

pub use lexicon::{PronLexicon, StateId, DEFAULT_STATES_PER_WORD, SILENCE_STATE};
pub use scorer::{AcousticScorer, HardRegion, PrecomputedScores, SyntheticScorer};
pub use trace::{TraceEntry, TraceRef, ROOT};

pub(crate) use scorer::splitmix;
use trace::TraceArena;

use crate::error::{Error, Result};
use crate::ingest::{Chunk, DEFAULT_FRAME_MS};
use crate::lm::{NGramModel, WordId, MAX_ORDER};
use crate::model::{millis, Hypothesis, TimedWord};
use crate::pruning::{CostModel, DEFAULT_NOMINAL_BEAM};

pub const DEFAULT_MAX_ACTIVE: usize = 2000;

const SIL_UNIT: u32 = u32::MAX - 1;
const ROOT_UNIT: u32 = u32::MAX;
const NO_EXIT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam: f64,
    pub max_active: usize,
    pub lm_weight: f64,
    pub frame_ms: u32,
    pub cost: CostModel,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beam: DEFAULT_NOMINAL_BEAM,
            max_active: DEFAULT_MAX_ACTIVE,
            lm_weight: 1.0,
            frame_ms: DEFAULT_FRAME_MS,
            cost: CostModel::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beam > 0.0 && self.beam.is_finite()) || self.max_active == 0 {
            return Err(Error::InvalidInput(format!(
                "beam {} / max-active {} invalid",
                self.beam, self.max_active
            )));
        }
        if !(self.lm_weight >= 0.0 && self.lm_weight.is_finite()) || self.frame_ms == 0 {
            return Err(Error::InvalidInput("bad LM weight or frame duration".into()));
        }
        self.cost.validate()
    }
}

/// The last `order - 1` words, oldest first. Unused slots stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
struct History {
    words: [WordId; MAX_ORDER - 1],
    len: u8,
}

impl std::hash::Hash for History {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let packed = self
            .words
            .iter()
            .fold(u128::from(self.len), |acc, &w| (acc << 32) | u128::from(w));
        state.write_u128(packed);
    }
}

impl History {
    fn as_slice(&self) -> &[WordId] {
        &self.words[..usize::from(self.len)]
    }

    fn push(&self, w: WordId, keep: usize) -> Self {
        let mut out = *self;
        if keep == 0 {
            return Self::default();
        }
        if usize::from(out.len) == keep {
            out.words.copy_within(1..keep, 0);
            out.words[keep - 1] = w;
        } else {
            out.words[usize::from(out.len)] = w;
            out.len += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token {
    unit: u32,
    state: u16,
    hist: History,
    score: f64,
    word_start: u64,
    trace: TraceRef,
}

type Key = (u32, u16, History);

impl Token {
    fn key(&self) -> Key {
        (self.unit, self.state, self.hist)
    }

    pub(crate) fn trace(&self) -> TraceRef {
        self.trace
    }
}

/// Higher score first; ties go to the smaller word id, then the earlier
/// word start.
fn rank(a: &Token, b: &Token) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.unit.cmp(&b.unit))
        .then(a.word_start.cmp(&b.word_start))
        .then(a.state.cmp(&b.state))
        .then(a.hist.cmp(&b.hist))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    tok: Token,
    // index into the frame's exit list, NO_EXIT when `tok.trace` is final
    exit: u32,
}

#[derive(Debug, Clone, Copy)]
struct Exit {
    word: WordId,
    start: u64,
    end: u64,
    parent: TraceRef,
    node: Option<TraceRef>,
}

#[derive(Default)]
struct Frontier {
    cands: Vec<Candidate>,
    scores: Vec<f64>,
    index: FxHashMap<Key, u32>,
    best: f64,
    beam: f64,
}

impl Frontier {
    fn reset(&mut self, beam: f64) {
        // a sparse table after a busy frame costs cache misses on every probe
        if self.index.capacity() > 4 * self.index.len().max(1024) {
            self.index = FxHashMap::default();
        } else {
            self.index.clear();
        }
        self.cands.clear();
        self.best = f64::NEG_INFINITY;
        self.beam = beam;
    }

    fn offer(&mut self, c: Candidate) {
        // anything under the running threshold stays under the final one
        if c.tok.score < self.best - self.beam {
            return;
        }
        match self.index.entry(c.tok.key()) {
            std::collections::hash_map::Entry::Occupied(e) => {
                let slot = &mut self.cands[*e.get() as usize];
                if c.tok.score > slot.tok.score {
                    *slot = c;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(self.cands.len() as u32);
                self.cands.push(c);
            }
        }
        if c.tok.score > self.best {
            self.best = c.tok.score;
        }
    }
}

/// Search state of one segment.
pub struct DecoderState {
    segment_id: u32,
    tokens: Vec<Token>,
    arena: TraceArena,
    first_frame: Option<u64>,
    frames_consumed: u64,
    beam: f64,
    cursor: TraceRef,
    cursor_frame: u64,
    input_ended: bool,
    closed: bool,
    frontier: Frontier,
}

impl std::fmt::Debug for DecoderState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecoderState")
            .field("segment_id", &self.segment_id)
            .field("active", &self.tokens.len())
            .field("frames_consumed", &self.frames_consumed)
            .field("beam", &self.beam)
            .field("cursor_frame", &self.cursor_frame)
            .field("closed", &self.closed)
            .finish()
    }
}

impl DecoderState {
    pub fn segment_id(&self) -> u32 {
        self.segment_id
    }

    pub fn active_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn frames_consumed(&self) -> u64 {
        self.frames_consumed
    }

    /// Index of the first frame of the segment, once one has been seen.
    pub fn first_frame(&self) -> Option<u64> {
        self.first_frame
    }

    pub fn beam(&self) -> f64 {
        self.beam
    }

    pub fn set_beam(&mut self, beam: f64) {
        self.beam = beam;
    }

    /// Frame up to which output has been released.
    pub fn cursor_frame(&self) -> u64 {
        self.cursor_frame
    }

    pub fn cursor(&self) -> TraceRef {
        self.cursor
    }

    /// Number of words released so far.
    pub fn released_words(&self) -> usize {
        self.arena.depth(self.cursor) as usize
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn live_trace_entries(&self) -> usize {
        self.arena.live()
    }

    /// Marks the segment's input as complete, enabling finalization.
    pub fn end_of_segment(&mut self, segment_id: u32) -> Result<()> {
        if segment_id != self.segment_id {
            return Err(Error::Protocol(format!(
                "end of segment {segment_id} sent to segment {}",
                self.segment_id
            )));
        }
        self.input_ended = true;
        Ok(())
    }

    /// (word or unit, state, history) of every active token; distinct by
    /// construction.
    pub fn active_keys(&self) -> Vec<(u32, u16, Vec<WordId>)> {
        self.tokens
            .iter()
            .map(|t| (t.unit, t.state, t.hist.as_slice().to_vec()))
            .collect()
    }

    pub(crate) fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub(crate) fn best_token(&self) -> Option<&Token> {
        self.tokens.iter().min_by(|a, b| rank(a, b))
    }

    pub(crate) fn trace_path(&self, from: TraceRef, stop: TraceRef) -> Vec<TraceEntry> {
        self.arena.path(from, stop)
    }

    pub(crate) fn trace_depth(&self, node: TraceRef) -> u32 {
        self.arena.depth(node)
    }

    pub(crate) fn common_ancestor(&self, a: TraceRef, b: TraceRef) -> TraceRef {
        self.arena.common_ancestor(a, b)
    }

    /// Moves the released-output cursor down to `node`, which must extend
    /// the current cursor.
    pub(crate) fn advance_cursor(&mut self, node: TraceRef) {
        debug_assert!(self.arena.is_ancestor(self.cursor, node));
        if node != self.cursor {
            self.cursor_frame = self.arena.get(node).end_frame;
            self.cursor = node;
        }
    }

    /// Drops every token whose history does not pass through `node`.
    pub(crate) fn retain_descendants(&mut self, node: TraceRef) {
        let arena = &self.arena;
        self.tokens.retain(|t| arena.is_ancestor(node, t.trace));
        self.collect_garbage();
    }

    fn collect_garbage(&mut self) {
        let holders = self.tokens.iter().map(|t| t.trace).chain([self.cursor]);
        self.arena.collect(holders);
        debug_assert!(self
            .arena
            .audit(self.tokens.iter().map(|t| t.trace).chain([self.cursor])));
    }
}

/// Result of decoding one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkOutput {
    pub best: Hypothesis,
    /// sum over frames of the active token count after pruning
    pub token_frames: u64,
    /// virtual processing time
    pub work: f64,
}

/// Weighted natural-log LM scores of every word after one history.
#[derive(Debug, Clone)]
struct LmRow {
    scores: Box<[f64]>,
    max: f64,
    /// best score among the words entered through each HMM state
    bucket_max: Box<[f64]>,
}

/// Holds the shared, read-only models and a cache of weighted LM rows that
/// outlives segments.
#[derive(Clone)]
pub struct Decoder<'m> {
    lm: &'m NGramModel,
    lexicon: &'m PronLexicon,
    config: SearchConfig,
    lm_rows: RefCell<FxHashMap<History, LmRow>>,
    /// words by first state, ascending
    buckets: Vec<Vec<WordId>>,
}

impl std::fmt::Debug for Decoder<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Decoder")
            .field("vocab", &self.lm.vocab_size())
            .field("config", &self.config)
            .field("cached_rows", &self.lm_rows.borrow().len())
            .finish()
    }
}

impl<'m> Decoder<'m> {
    pub fn new(lm: &'m NGramModel, lexicon: &'m PronLexicon, config: SearchConfig) -> Result<Self> {
        config.validate()?;
        if lexicon.len() != lm.vocab_size() {
            return Err(Error::InvalidInput(format!(
                "lexicon covers {} words, LM has {}",
                lexicon.len(),
                lm.vocab_size()
            )));
        }
        let mut buckets = vec![Vec::new(); lexicon.state_count()];
        for w in 0..lexicon.len() as WordId {
            buckets[usize::from(lexicon.states(w)[0])].push(w);
        }
        Ok(Self {
            lm,
            lexicon,
            config,
            lm_rows: RefCell::default(),
            buckets,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn lm(&self) -> &'m NGramModel {
        self.lm
    }

    pub fn lexicon(&self) -> &'m PronLexicon {
        self.lexicon
    }

    pub fn init_search(&self, segment_id: u32) -> DecoderState {
        DecoderState {
            segment_id,
            tokens: vec![Token {
                unit: ROOT_UNIT,
                state: 0,
                hist: History::default(),
                score: 0.0,
                word_start: 0,
                trace: ROOT,
            }],
            arena: TraceArena::default(),
            first_frame: None,
            frames_consumed: 0,
            beam: self.config.beam,
            cursor: ROOT,
            cursor_frame: 0,
            input_ended: false,
            closed: false,
            frontier: Frontier::default(),
        }
    }

    fn history_len(&self) -> usize {
        self.lm.order() - 1
    }

    pub fn decode_chunk(
        &self,
        state: &mut DecoderState,
        chunk: &Chunk,
        am: &dyn AcousticScorer,
    ) -> Result<ChunkOutput> {
        if state.closed || state.input_ended {
            return Err(Error::Protocol(format!(
                "segment {} no longer accepts audio",
                state.segment_id
            )));
        }
        if chunk.segment_id() != state.segment_id {
            return Err(Error::Ordering(format!(
                "chunk of segment {} fed to segment {}",
                chunk.segment_id(),
                state.segment_id
            )));
        }
        if let Some(first) = state.first_frame {
            let expected = first + state.frames_consumed;
            if chunk.first_index() != expected {
                return Err(Error::Ordering(format!(
                    "chunk starts at frame {}, expected {expected}",
                    chunk.first_index()
                )));
            }
        } else {
            state.first_frame = Some(chunk.first_index());
        }
        if am.state_count() != self.lexicon.state_count() {
            return Err(Error::InvalidInput(format!(
                "scorer has {} states, lexicon {}",
                am.state_count(),
                self.lexicon.state_count()
            )));
        }
        let mut token_frames = 0u64;
        for frame in chunk.frames() {
            let scores = am.frame_scores(frame)?;
            self.step(state, frame.index, &scores)?;
            token_frames += state.tokens.len() as u64;
        }
        state.collect_garbage();
        Ok(ChunkOutput {
            best: self.best_hypothesis(state)?,
            token_frames,
            work: self.config.cost.chunk_cost(token_frames),
        })
    }

    fn lm_row<'s>(&self, rows: &'s mut FxHashMap<History, LmRow>, hist: History) -> &'s LmRow {
        rows.entry(hist).or_insert_with(|| {
            let scores: Box<[f64]> = self
                .lm
                .score_row(hist.as_slice())
                .into_iter()
                .map(|s| self.config.lm_weight * (f64::from(s) * std::f64::consts::LN_10))
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bucket_max = self
                .buckets
                .iter()
                .map(|ws| ws.iter().map(|&w| scores[w as usize]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            LmRow {
                scores,
                max,
                bucket_max,
            }
        })
    }

    fn step(&self, st: &mut DecoderState, frame: u64, am: &[f32]) -> Result<()> {
        let keep = self.history_len();
        let mut fr = std::mem::take(&mut st.frontier);
        fr.reset(st.beam);
        let sil = f64::from(am[usize::from(SILENCE_STATE)]);

        // within-unit moves
        for t in &st.tokens {
            match t.unit {
                ROOT_UNIT => {}
                SIL_UNIT => fr.offer(Candidate {
                    tok: Token {
                        score: t.score + sil,
                        ..*t
                    },
                    exit: NO_EXIT,
                }),
                w => {
                    let states = self.lexicon.states(w);
                    let s = usize::from(t.state);
                    fr.offer(Candidate {
                        tok: Token {
                            score: t.score + f64::from(am[usize::from(states[s])]),
                            ..*t
                        },
                        exit: NO_EXIT,
                    });
                    if s + 1 < states.len() {
                        fr.offer(Candidate {
                            tok: Token {
                                state: t.state + 1,
                                score: t.score + f64::from(am[usize::from(states[s + 1])]),
                                ..*t
                            },
                            exit: NO_EXIT,
                        });
                    }
                }
            }
        }

        // boundaries, grouped by the history they lead into
        let mut exits: Vec<Exit> = Vec::new();
        let mut groups: Vec<(History, f64, TraceRef, u32)> = Vec::new();
        let mut group_of: FxHashMap<History, usize> = FxHashMap::default();
        for t in &st.tokens {
            let (hist, trace, exit) = match t.unit {
                ROOT_UNIT => (History::default(), ROOT, NO_EXIT),
                SIL_UNIT => (t.hist, t.trace, NO_EXIT),
                w => {
                    if usize::from(t.state) + 1 != self.lexicon.states(w).len() {
                        continue;
                    }
                    exits.push(Exit {
                        word: w,
                        start: t.word_start,
                        end: frame,
                        parent: t.trace,
                        node: None,
                    });
                    (t.hist.push(w, keep), ROOT, (exits.len() - 1) as u32)
                }
            };
            match group_of.get(&hist) {
                Some(&g) => {
                    if t.score > groups[g].1 {
                        groups[g] = (hist, t.score, trace, exit);
                    }
                }
                None => {
                    group_of.insert(hist, groups.len());
                    groups.push((hist, t.score, trace, exit));
                }
            }
        }
        // word-initial states, best acoustic score first
        let mut entry_states: Vec<(f64, usize)> = (0..self.buckets.len())
            .filter(|&s| !self.buckets[s].is_empty())
            .map(|s| (f64::from(am[s]), s))
            .collect();
        entry_states.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let am_max = entry_states.first().map_or(f64::NEG_INFINITY, |e| e.0);
        let mut rows = self.lm_rows.borrow_mut();
        for &(hist, base, trace, exit) in &groups {
            let entry = |unit, score| Candidate {
                tok: Token {
                    unit,
                    state: 0,
                    hist,
                    score,
                    word_start: frame,
                    trace,
                },
                exit,
            };
            fr.offer(entry(SIL_UNIT, base + sil));
            let row = self.lm_row(&mut rows, hist);
            if base + row.max + am_max < fr.best - fr.beam {
                continue;
            }
            for &(ac, state) in &entry_states {
                if base + row.max + ac < fr.best - fr.beam {
                    break;
                }
                if base + row.bucket_max[state] + ac < fr.best - fr.beam {
                    continue;
                }
                for &w in &self.buckets[state] {
                    let score = base + row.scores[w as usize] + ac;
                    if score >= fr.best - fr.beam {
                        fr.offer(entry(w, score));
                    }
                }
            }
        }

        drop(rows);
        if !fr.best.is_finite() {
            return Err(Error::HardPruning { frame });
        }
        let threshold = fr.best - fr.beam;
        fr.cands.retain(|c| c.tok.score >= threshold);
        let cap = self.config.max_active;
        if fr.cands.len() > cap {
            // the cap-th best score; ties at the cut are settled by `rank`
            fr.scores.clear();
            fr.scores.extend(fr.cands.iter().map(|c| c.tok.score));
            let (_, &mut cut, _) = fr.scores.select_nth_unstable_by(cap - 1, |a, b| b.total_cmp(a));
            let mut ties: Vec<Candidate> = fr
                .cands
                .iter()
                .filter(|c| c.tok.score.total_cmp(&cut) == Ordering::Equal)
                .copied()
                .collect();
            fr.cands.retain(|c| c.tok.score.total_cmp(&cut) == Ordering::Greater);
            ties.sort_unstable_by(|a, b| rank(&a.tok, &b.tok));
            ties.truncate(cap - fr.cands.len());
            fr.cands.extend(ties);
        }

        st.tokens.clear();
        for c in &fr.cands {
            let mut tok = c.tok;
            if c.exit != NO_EXIT {
                let e = &mut exits[c.exit as usize];
                tok.trace = *e
                    .node
                    .get_or_insert_with(|| st.arena.push(e.word, e.start, e.end, e.parent));
            }
            st.tokens.push(tok);
        }
        st.frontier = fr;
        st.frames_consumed += 1;
        Ok(())
    }

    pub fn word_text(&self, w: WordId) -> &'m str {
        self.lm.word(w).unwrap_or("<?>")
    }

    fn frame_time(&self, frame: u64) -> f64 {
        millis(frame * u64::from(self.config.frame_ms))
    }

    pub(crate) fn entries_to_words(&self, entries: &[TraceEntry]) -> Result<Vec<TimedWord>> {
        entries
            .iter()
            .map(|e| {
                TimedWord::new(
                    self.word_text(e.word),
                    self.frame_time(e.start_frame),
                    self.frame_time(e.end_frame),
                )
            })
            .collect()
    }

    /// Traceback of `tok`, plus its current word when it sits on the word's
    /// last state.
    fn traceback(&self, st: &DecoderState, tok: &Token) -> Result<Hypothesis> {
        let mut words = self.entries_to_words(&st.arena.path(tok.trace, ROOT))?;
        if tok.unit < SIL_UNIT && usize::from(tok.state) + 1 == self.lexicon.states(tok.unit).len() {
            let end = st.first_frame.unwrap_or(0) + st.frames_consumed;
            words.push(TimedWord::new(
                self.word_text(tok.unit),
                self.frame_time(tok.word_start),
                self.frame_time(end),
            )?);
        }
        Hypothesis::new(words, tok.score, st.segment_id)
    }

    /// Current best partial hypothesis.
    pub fn best_hypothesis(&self, st: &DecoderState) -> Result<Hypothesis> {
        match st.best_token() {
            Some(tok) => self.traceback(st, tok),
            None => Err(Error::HardPruning {
                frame: st.frames_consumed,
            }),
        }
    }

    /// Best complete hypothesis: the best token that may end the segment,
    /// or the best token at all when none can.
    pub fn finalize_segment(&self, st: &mut DecoderState) -> Result<Hypothesis> {
        if st.closed {
            return Err(Error::Protocol(format!("segment {} already finalized", st.segment_id)));
        }
        if !st.input_ended {
            return Err(Error::Protocol(format!("segment {} is still open", st.segment_id)));
        }
        let can_end = |t: &&Token| match t.unit {
            ROOT_UNIT | SIL_UNIT => true,
            w => usize::from(t.state) + 1 == self.lexicon.states(w).len(),
        };
        let best = st
            .tokens
            .iter()
            .filter(can_end)
            .min_by(|a, b| rank(a, b))
            .or_else(|| st.best_token())
            .copied();
        let hyp = match best {
            Some(tok) if st.frames_consumed > 0 => self.traceback(st, &tok)?,
            _ => Hypothesis::empty(st.segment_id),
        };
        st.closed = true;
        st.tokens.clear();
        st.arena = TraceArena::default();
        Ok(hyp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Frame;
    use crate::lm::read_arpa;

    fn one_word_lm() -> NGramModel {
        read_arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n0\tyes\n\n\\end\\\n".as_bytes()).unwrap()
    }

    #[test]
    fn single_frame_single_word() {
        let lm = one_word_lm();
        let lex = PronLexicon::derive(lm.vocabulary(), 1, 2).unwrap();
        let dec = Decoder::new(&lm, &lex, SearchConfig::default()).unwrap();
        let mut st = dec.init_search(0);
        assert_eq!(st.active_count(), 1);
        let frame = Frame::new(0, 10, -1.0, vec![-5.0, 0.0]);
        let chunk = Chunk::new(vec![frame], 0, 0).unwrap();
        let am = PrecomputedScores { state_count: 2 };
        let out = dec.decode_chunk(&mut st, &chunk, &am).unwrap();
        assert_eq!(out.best.texts(), vec!["yes"]);
        assert_eq!(out.best.words()[0].start, 0.0);
        st.end_of_segment(0).unwrap();
        let fin = dec.finalize_segment(&mut st).unwrap();
        assert_eq!(fin.texts(), vec!["yes"]);
        assert_eq!(fin.score(), 0.0);
    }

    #[test]
    fn finalize_requires_end_of_segment() {
        let lm = one_word_lm();
        let lex = PronLexicon::derive(lm.vocabulary(), 1, 2).unwrap();
        let dec = Decoder::new(&lm, &lex, SearchConfig::default()).unwrap();
        let mut st = dec.init_search(3);
        assert!(matches!(dec.finalize_segment(&mut st), Err(Error::Protocol(_))));
        assert!(st.end_of_segment(4).is_err());
        st.end_of_segment(3).unwrap();
        assert!(dec.finalize_segment(&mut st).unwrap().is_empty());
        assert!(dec.finalize_segment(&mut st).is_err());
    }

    #[test]
    fn chunk_checks() {
        let lm = one_word_lm();
        let lex = PronLexicon::derive(lm.vocabulary(), 1, 2).unwrap();
        let dec = Decoder::new(&lm, &lex, SearchConfig::default()).unwrap();
        let am = PrecomputedScores { state_count: 2 };
        let mk = |i: u64, seg| Chunk::new(vec![Frame::new(i, 10, 0.0, vec![0.0, 0.0])], seg, 0).unwrap();
        let mut st = dec.init_search(1);
        assert!(matches!(
            dec.decode_chunk(&mut st, &mk(0, 2), &am),
            Err(Error::Ordering(_))
        ));
        dec.decode_chunk(&mut st, &mk(5, 1), &am).unwrap();
        assert!(matches!(
            dec.decode_chunk(&mut st, &mk(7, 1), &am),
            Err(Error::Ordering(_))
        ));
        dec.decode_chunk(&mut st, &mk(6, 1), &am).unwrap();
        assert!(dec
            .decode_chunk(&mut st, &mk(7, 1), &PrecomputedScores { state_count: 3 })
            .is_err());
    }

    #[test]
    fn history_keeps_the_most_recent_words() {
        let h = History::default().push(1, 2).push(2, 2).push(3, 2);
        assert_eq!(h.as_slice(), &[2, 3]);
        assert_eq!(History::default().push(1, 0).as_slice(), &[] as &[WordId]);
    }
}
