//! Back-off n-gram language model in ARPA format.
//!
//! Probabilities are stored as log10, as in the file. Scoring follows the
//! usual Katz recursion: use the longest stored n-gram, adding the back-off
//! weights of every context that had to be shortened on the way.

mod arpa;
mod build;

pub use arpa::{load_arpa, read_arpa, write_arpa};
pub use build::train_backoff;

use rustc_hash::FxHashMap;

pub type WordId = u32;

/// Id returned for strings outside the vocabulary when there is no `<unk>`.
pub const UNKNOWN_WORD: WordId = WordId::MAX;

/// log10 probability of a word the model has never seen.
pub const DEFAULT_UNK_LOG10: f32 = -7.0;

pub const UNK_TOKEN: &str = "<unk>";

/// Upper bound on the model order supported by the packed n-gram keys.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub prob: f32,
    pub backoff: f32,
}

pub(crate) fn pack(words: &[WordId]) -> u128 {
    words.iter().fold(0u128, |key, &w| (key << 32) | u128::from(w))
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    vocab: Vec<String>,
    ids: FxHashMap<String, WordId>,
    /// `tables[k - 1]` holds the k-grams.
    tables: Vec<FxHashMap<u128, Entry>>,
    /// packed context -> stored continuations with their log10 probability
    successors: FxHashMap<(usize, u128), Vec<(WordId, f32)>>,
    unk: Option<WordId>,
    unk_log10: f32,
}

impl NGramModel {
    pub(crate) fn from_parts(vocab: Vec<String>, tables: Vec<FxHashMap<u128, Entry>>) -> Self {
        let ids: FxHashMap<String, WordId> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as WordId))
            .collect();
        let unk = ids.get(UNK_TOKEN).copied();
        let mut successors: FxHashMap<(usize, u128), Vec<(WordId, f32)>> = FxHashMap::default();
        for (k, table) in tables.iter().enumerate() {
            for (&key, e) in table {
                // the last word sits in the low 32 bits
                let w = (key & u128::from(u32::MAX)) as WordId;
                successors.entry((k, key >> 32)).or_default().push((w, e.prob));
            }
        }
        for list in successors.values_mut() {
            list.sort_unstable_by_key(|&(w, _)| w);
        }
        Self {
            order: tables.len(),
            vocab,
            ids,
            tables,
            successors,
            unk,
            unk_log10: DEFAULT_UNK_LOG10,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    /// Maps a string to its id, falling back to `<unk>` or [`UNKNOWN_WORD`].
    pub fn word_id(&self, word: &str) -> WordId {
        self.ids.get(word).copied().or(self.unk).unwrap_or(UNKNOWN_WORD)
    }

    pub fn set_unknown_log10(&mut self, log10: f32) {
        self.unk_log10 = log10;
    }

    /// Number of stored n-grams per order, starting at unigrams.
    pub fn counts(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.len()).collect()
    }

    pub(crate) fn tables(&self) -> &[FxHashMap<u128, Entry>] {
        &self.tables
    }

    fn entry(&self, ngram: &[WordId]) -> Option<&Entry> {
        self.tables.get(ngram.len() - 1)?.get(&pack(ngram))
    }

    /// Back-off weight of a context, zero when the context is not stored.
    pub fn backoff(&self, context: &[WordId]) -> f32 {
        if context.is_empty() {
            return 0.0;
        }
        self.entry(context).map_or(0.0, |e| e.backoff)
    }

    /// Whether some n-gram extends `context` by one word.
    pub fn has_context(&self, context: &[WordId]) -> bool {
        context.is_empty() || (context.len() < self.order && self.entry(context).is_some())
    }

    /// log10 p(word | history), looking at no more than `order - 1` words
    /// of history.
    pub fn lm_score(&self, history: &[WordId], word: WordId) -> f32 {
        let keep = history.len().min(self.order - 1);
        let mut context = &history[history.len() - keep..];
        let mut penalty = 0.0f32;
        let mut buf = [0 as WordId; MAX_ORDER];
        loop {
            buf[..context.len()].copy_from_slice(context);
            buf[context.len()] = word;
            if let Some(e) = self.entry(&buf[..=context.len()]) {
                return penalty + e.prob;
            }
            if context.is_empty() {
                let unk = self
                    .unk
                    .and_then(|u| self.entry(&[u]))
                    .map_or(self.unk_log10, |e| e.prob);
                return penalty + unk;
            }
            penalty += self.backoff(context);
            context = &context[1..];
        }
    }

    /// `lm_score(history, w)` for every word of the vocabulary, bit for bit.
    pub fn score_row(&self, history: &[WordId]) -> Vec<f32> {
        let keep = history.len().min(self.order - 1);
        let context = &history[history.len() - keep..];
        // penalty[i]: back-off weights of the contexts shortened before
        // reaching `context[i..]`, summed longest first
        let mut penalty = vec![0.0f32; keep + 1];
        for i in 0..keep {
            penalty[i + 1] = penalty[i] + self.backoff(&context[i..]);
        }
        let unk = self
            .unk
            .and_then(|u| self.entry(&[u]))
            .map_or(self.unk_log10, |e| e.prob);
        let mut row = vec![penalty[keep] + unk; self.vocab.len()];
        for i in (0..=keep).rev() {
            let ctx = &context[i..];
            if let Some(list) = self.successors.get(&(ctx.len(), pack(ctx))) {
                for &(w, prob) in list {
                    if let Some(slot) = row.get_mut(w as usize) {
                        *slot = penalty[i] + prob;
                    }
                }
            }
        }
        row
    }

    /// Natural-log score, for the decoder.
    pub fn lm_score_ln(&self, history: &[WordId], word: WordId) -> f64 {
        f64::from(self.lm_score(history, word)) * std::f64::consts::LN_10
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TINY: &str = "\\data\\
ngram 1=3
ngram 2=2

\\1-grams:
-0.5\ta\t-0.3
-0.6\tb\t-0.2
-0.8\tc

\\2-grams:
-0.1\ta b
-0.4\tb c

\\end\\
";

    #[test]
    fn direct_and_backed_off_lookups() {
        let m = read_arpa(TINY.as_bytes()).unwrap();
        let (a, b, c) = (m.word_id("a"), m.word_id("b"), m.word_id("c"));
        assert_eq!(m.lm_score(&[], a), -0.5);
        assert_eq!(m.lm_score(&[a], b), -0.1);
        // missing bigram (a, c): backoff(a) + p(c)
        assert!((m.lm_score(&[a], c) - (-0.3 - 0.8)).abs() < 1e-6);
        // context without a stored back-off weight contributes nothing
        assert!((m.lm_score(&[c], a) - -0.5).abs() < 1e-6);
    }

    #[test]
    fn unknown_words_use_the_floor() {
        let mut m = read_arpa(TINY.as_bytes()).unwrap();
        assert_eq!(m.word_id("zzz"), UNKNOWN_WORD);
        assert_eq!(m.lm_score(&[], UNKNOWN_WORD), DEFAULT_UNK_LOG10);
        m.set_unknown_log10(-9.0);
        assert_eq!(m.lm_score(&[], UNKNOWN_WORD), -9.0);
    }

    #[test]
    fn unk_entry_is_preferred_when_present() {
        let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.2\ta\n-1.5\t<unk>\n\n\\end\\\n";
        let m = read_arpa(text.as_bytes()).unwrap();
        let id = m.word_id("never-seen");
        assert_eq!(m.word(id), Some("<unk>"));
        assert_eq!(m.lm_score(&[], id), -1.5);
    }

    proptest! {
        #[test]
        fn rows_match_pointwise_scores(hist in proptest::collection::vec(0u32..3, 0..4)) {
            let lm = read_arpa(TINY.as_bytes()).unwrap();
            let row = lm.score_row(&hist);
            for (w, &s) in row.iter().enumerate() {
                prop_assert_eq!(s.to_bits(), lm.lm_score(&hist, w as WordId).to_bits());
            }
        }

        #[test]
        fn long_histories_are_truncated(hist in proptest::collection::vec(0u32..3, 0..10), w in 0u32..3) {
            let m = read_arpa(TINY.as_bytes()).unwrap();
            let keep = hist.len().min(m.order() - 1);
            let short = &hist[hist.len() - keep..];
            prop_assert_eq!(m.lm_score(&hist, w), m.lm_score(short, w));
        }
    }
}
