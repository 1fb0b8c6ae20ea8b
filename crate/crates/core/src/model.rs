//! Core domain types shared by every stage of the pipeline, plus word error
//! rate scoring.
//!
//! All times are seconds held as `f64` and quantized to whole milliseconds,
//! so that they survive a decimal text round-trip bit-exactly.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rounds a time in seconds to the 1 ms grid.
pub fn quantize(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

/// Converts a count of milliseconds into quantized seconds.
pub fn millis(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// A hypothesized or reference word with its time span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub text: String,
    pub start: f64,
    pub end: f64,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start: f64, end: f64) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("bad word text {text:?}")));
        }
        if !(start >= 0.0 && start < end && end.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "word {text:?} has invalid span [{start}, {end})"
            )));
        }
        Ok(Self {
            text,
            start: quantize(start),
            end: quantize(end),
        })
    }
}

fn check_ordering(words: &[TimedWord]) -> Result<()> {
    for pair in words.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::Ordering(format!(
                "{:?} [{}, {}) overlaps {:?} [{}, {})",
                pair[0].text, pair[0].start, pair[0].end, pair[1].text, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(())
}

/// A time-aligned word sequence produced by the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    words: Vec<TimedWord>,
    score: f64,
    segment_id: u32,
}

impl Hypothesis {
    pub fn new(words: Vec<TimedWord>, score: f64, segment_id: u32) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score {score}")));
        }
        check_ordering(&words)?;
        Ok(Self {
            words,
            score,
            segment_id,
        })
    }

    pub fn empty(segment_id: u32) -> Self {
        Self {
            words: Vec::new(),
            score: 0.0,
            segment_id,
        }
    }

    pub fn words(&self) -> &[TimedWord] {
        &self.words
    }

    pub fn into_words(self) -> Vec<TimedWord> {
        self.words
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn segment_id(&self) -> u32 {
        self.segment_id
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.texts().join(" "))
    }
}

/// Joins two hypotheses of the same segment; scores add.
pub fn concat_hypothesis(prefix: Hypothesis, suffix: Hypothesis) -> Result<Hypothesis> {
    if prefix.segment_id != suffix.segment_id {
        return Err(Error::Ordering(format!(
            "segment mismatch: {} vs {}",
            prefix.segment_id, suffix.segment_id
        )));
    }
    if let (Some(last), Some(first)) = (prefix.words.last(), suffix.words.first()) {
        if last.end > first.start {
            return Err(Error::Ordering(format!(
                "prefix ends at {} after suffix starts at {}",
                last.end, first.start
            )));
        }
    }
    let mut words = prefix.words;
    words.extend(suffix.words);
    Hypothesis::new(words, prefix.score + suffix.score, prefix.segment_id)
}

/// Reference word sequence of a recording.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    words: Vec<TimedWord>,
}

impl Transcript {
    pub fn new(words: Vec<TimedWord>) -> Result<Self> {
        check_ordering(&words)?;
        Ok(Self { words })
    }

    pub fn words(&self) -> &[TimedWord] {
        &self.words
    }

    pub fn texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }

    /// Parses `word<TAB>start<TAB>end` lines.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(text), Some(start), Some(end), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected word<TAB>start<TAB>end".into(),
                });
            };
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad time {s:?}: {e}"),
                })
            };
            let word = TimedWord::new(text, parse(start)?, parse(end)?).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            words.push(word);
        }
        Self::new(words)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for w in &self.words {
            writeln!(out, "{}\t{:.3}\t{:.3}", w.text, w.start, w.end)?;
        }
        Ok(())
    }
}

/// Edit-operation counts of an alignment, and the resulting error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_length: usize,
    pub wer: f64,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// Pools two breakdowns as if their references were concatenated.
    pub fn merge(&self, other: &WerBreakdown) -> WerBreakdown {
        let mut out = WerBreakdown {
            substitutions: self.substitutions + other.substitutions,
            deletions: self.deletions + other.deletions,
            insertions: self.insertions + other.insertions,
            reference_length: self.reference_length + other.reference_length,
            wer: 0.0,
        };
        out.wer = rate(out.errors(), out.reference_length);
        out
    }
}

impl Default for WerBreakdown {
    fn default() -> Self {
        Self {
            substitutions: 0,
            deletions: 0,
            insertions: 0,
            reference_length: 0,
            wer: 0.0,
        }
    }
}

// An empty reference divides by one, so pure insertions still count.
fn rate(errors: usize, reference_length: usize) -> f64 {
    errors as f64 / reference_length.max(1) as f64
}

// Equal-length tokens are compared without early exit or library call, so
// the outcome costs no data-dependent branch.
#[inline]
fn same(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Unit-cost Levenshtein alignment of `hypothesis` against `reference`.
///
/// Ties on the backtrace prefer substitution (or match), then insertion,
/// then deletion, which only affects the breakdown and never the rate.
pub fn wer<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> WerBreakdown {
    let (n, m) = (reference.len(), hypothesis.len());
    if n.max(m) < 17 {
        small::<17, R, H>(reference, hypothesis)
    } else if n.max(m) < 64 {
        small::<64, R, H>(reference, hypothesis)
    } else {
        align(n, m, |i, j| same(reference[i].as_ref(), hypothesis[j].as_ref()))
    }
}

/// Both sides hold fewer than `N <= 64` tokens.
#[inline(always)]
fn small<const N: usize, R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> WerBreakdown {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut peq = [0u64; N];
    let short = |t: &str| t.len() < 8;
    if reference.iter().all(|t| short(t.as_ref())) && hypothesis.iter().all(|t| short(t.as_ref())) {
        let mut fr = [0u64; N];
        for (f, t) in fr.iter_mut().zip(reference) {
            *f = pack(t.as_ref());
        }
        for (p, t) in peq.iter_mut().zip(hypothesis) {
            let b = pack(t.as_ref());
            *p = fr[..n].iter().rev().fold(0, |acc, &a| acc << 1 | u64::from(a == b));
        }
    } else {
        for (p, t) in peq.iter_mut().zip(hypothesis) {
            let b = t.as_ref();
            *p = reference
                .iter()
                .rev()
                .fold(0, |acc, a| acc << 1 | u64::from(same(a.as_ref(), b)));
        }
    }
    align_bits::<N>(n, m, &peq)
}

// Injective for tokens shorter than eight bytes: the length occupies the top
// byte and the bytes follow.
#[inline]
fn pack(t: &str) -> u64 {
    t.bytes().fold(t.len() as u64, |acc, b| acc << 8 | u64::from(b))
}

/// Bit-parallel [`align`] for fewer than `N <= 64` tokens a side. Bit `i` of
/// `peq[j]` marks `reference[i] == hypothesis[j]`. For column `j`, bit `i` of
/// `pv`/`mv` marks the cost rising/falling from row `i` to `i + 1`, and bit
/// `i` of `ph`/`mh` the cost at row `i` rising/falling from column `j - 1`.
/// The backtrace steps between neighbours by those deltas.
#[inline(always)]
fn align_bits<const N: usize>(n: usize, m: usize, peq: &[u64; N]) -> WerBreakdown {
    debug_assert!(n < N && m < N && N <= 64);
    let (mut pv, mut mv) = ([0u64; N], [0u64; N]);
    let (mut ph, mut mh) = ([0u64; N], [0u64; N]);
    let (mut p, mut q) = (!0u64, 0u64);
    pv[0] = p;
    for j in 0..m {
        let e = peq[j];
        let xv = e | q;
        let xh = ((e & p).wrapping_add(p) ^ p) | e;
        // row 0 costs j, so its horizontal step is always +1
        let h = (q | !(xh | p)) << 1 | 1;
        let l = (p & xh) << 1;
        p = l | !(xv | h);
        q = h & xv;
        (pv[j + 1], mv[j + 1], ph[j + 1], mh[j + 1]) = (p, q, h, l);
    }
    let step = |plus: u64, minus: u64, k: usize| (plus >> k & 1) as i64 - (minus >> k & 1) as i64;
    let mut here = n as i64 + (1..=m).map(|j| step(ph[j], mh[j], n)).sum::<i64>();

    let (mut subs, mut dels, mut inss) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        let hit = peq[j - 1] >> (i - 1) & 1 == 1;
        let left = here - step(ph[j], mh[j], i);
        let diag = left - step(pv[j - 1], mv[j - 1], i - 1);
        if here == diag + i64::from(!hit) {
            subs += usize::from(!hit);
            (i, j, here) = (i - 1, j - 1, diag);
        } else if here == left + 1 {
            inss += 1;
            (j, here) = (j - 1, left);
        } else {
            dels += 1;
            here -= step(pv[j], mv[j], i - 1);
            i -= 1;
        }
    }
    dels += i;
    inss += j;
    WerBreakdown {
        substitutions: subs,
        deletions: dels,
        insertions: inss,
        reference_length: n,
        wer: rate(subs + dels + inss, n),
    }
}

#[inline(always)]
fn align(n: usize, m: usize, eq: impl Fn(usize, usize) -> bool) -> WerBreakdown {
    const STACK_CELLS: usize = 128;
    let width = m + 1;
    let cells = (n + 1) * width;
    let mut stack = [0u32; STACK_CELLS];
    let mut heap = Vec::new();
    let cost: &mut [u32] = if cells <= STACK_CELLS {
        &mut stack[..cells]
    } else {
        heap.resize(cells, 0);
        &mut heap
    };
    for (j, c) in cost[..width].iter_mut().enumerate() {
        *c = j as u32;
    }
    for i in 1..=n {
        let (prev, cur) = cost[(i - 1) * width..(i + 1) * width].split_at_mut(width);
        let mut left = i as u32;
        cur[0] = left;
        for j in 1..=m {
            let diag = prev[j - 1] + u32::from(!eq(i - 1, j - 1));
            left = diag.min(prev[j] + 1).min(left + 1);
            cur[j] = left;
        }
    }

    let (mut subs, mut dels, mut inss) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let hit = eq(i - 1, j - 1);
            if here == cost[(i - 1) * width + j - 1] + u32::from(!hit) {
                subs += usize::from(!hit);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == cost[i * width + j - 1] + 1 {
            inss += 1;
            j -= 1;
        } else {
            dels += 1;
            i -= 1;
        }
    }

    WerBreakdown {
        substitutions: subs,
        deletions: dels,
        insertions: inss,
        reference_length: n,
        wer: rate(subs + dels + inss, n),
    }
}
