use std::io::BufRead;

use crate::error::{Error, Result};

pub type StateId = u16;

/// State 0 is reserved for silence; word states are drawn from the rest.
pub const SILENCE_STATE: StateId = 0;

pub const DEFAULT_STATES_PER_WORD: usize = 3;

/// Minimum edit distance between the state sequences of two words.
pub const MIN_STATE_EDITS: usize = 2;

fn state_edits(a: &[StateId], b: &[StateId]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, &x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Maps every vocabulary word to a sequence of acoustic states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronLexicon {
    states: Vec<Vec<StateId>>,
    state_count: usize,
}

// FNV-1a, stable across platforms and toolchains.
fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl PronLexicon {
    /// Gives each word `states_per_word` states.
    pub fn derive(vocab: &[String], states_per_word: usize, state_count: usize) -> Result<Self> {
        Self::with_state_counts(vocab, &vec![states_per_word; vocab.len()], state_count)
    }

    /// Derives state ids from a hash of (word, position, salt). The salt is
    /// bumped until the sequence has no state twice in a row and is at
    /// least [`MIN_STATE_EDITS`] edits away from every earlier word.
    pub fn with_state_counts(vocab: &[String], counts: &[usize], state_count: usize) -> Result<Self> {
        if counts.len() != vocab.len() {
            return Err(Error::InvalidInput("one state count per word required".into()));
        }
        if state_count < 2 || state_count > usize::from(StateId::MAX) {
            return Err(Error::InvalidInput(format!("state inventory of {state_count}")));
        }
        let word_states = (state_count - 1) as u64;
        let mut states: Vec<Vec<StateId>> = Vec::with_capacity(vocab.len());
        for (word, &n) in vocab.iter().zip(counts) {
            if n == 0 {
                return Err(Error::InvalidInput(format!("word {word:?} has no states")));
            }
            let mut salt = 0u32;
            let seq = loop {
                let seq: Vec<StateId> = (0..n as u32)
                    .map(|pos| {
                        let h = fnv1a(&[word.as_bytes(), &pos.to_le_bytes(), &salt.to_le_bytes()]);
                        1 + (h % word_states) as StateId
                    })
                    .collect();
                let repeats = seq.windows(2).any(|p| p[0] == p[1]);
                if !repeats && states.iter().all(|o| state_edits(o, &seq) >= MIN_STATE_EDITS) {
                    break seq;
                }
                salt += 1;
                if salt > 10_000 {
                    return Err(Error::InvalidInput(format!(
                        "cannot give {word:?} a distinct state sequence"
                    )));
                }
            };
            states.push(seq);
        }
        Ok(Self { states, state_count })
    }

    /// Reads `word<TAB>state_count` lines; words not listed keep the
    /// default of three states.
    pub fn read_state_counts<R: BufRead>(reader: R, vocab: &[String]) -> Result<Vec<usize>> {
        let mut counts = vec![DEFAULT_STATES_PER_WORD; vocab.len()];
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let (word, n) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected word<TAB>state_count".into()))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad state count {n:?}: {e}")))?;
            let Some(pos) = vocab.iter().position(|w| w == word) else {
                return Err(parse_err(format!("{word:?} is not in the vocabulary")));
            };
            counts[pos] = n;
        }
        Ok(counts)
    }

    pub fn states(&self, word: u32) -> &[StateId] {
        &self.states[word as usize]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Size of the acoustic state inventory, silence included.
    pub fn state_count(&self) -> usize {
        self.state_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn derivation_is_deterministic_and_separated() {
        let v = vocab(300);
        let a = PronLexicon::derive(&v, 3, 64).unwrap();
        let b = PronLexicon::derive(&v, 3, 64).unwrap();
        assert_eq!(a, b);
        for x in 0..300u32 {
            let sx = a.states(x);
            assert!(sx.iter().all(|&s| (1..64).contains(&s)));
            assert!(sx[0] != sx[1] && sx[1] != sx[2]);
            // equal lengths: one edit apart means exactly one differing position
            for y in 0..x {
                let differing = sx.iter().zip(a.states(y)).filter(|(p, q)| p != q).count();
                assert!(differing >= 2, "w{x} and w{y}");
            }
        }
    }

    #[test]
    fn edit_distance_of_state_sequences() {
        assert_eq!(state_edits(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(state_edits(&[1, 2, 3], &[1, 5, 3]), 1);
        assert_eq!(state_edits(&[1, 2], &[1, 2, 3]), 1);
        assert_eq!(state_edits(&[1, 2, 3], &[2, 3, 1]), 2);
        assert_eq!(state_edits(&[], &[4, 4]), 2);
    }

    #[test]
    fn impossible_inventory_is_reported() {
        // two one-state words cannot be two edits apart
        assert!(PronLexicon::derive(&vocab(2), 1, 8).is_err());
        assert!(PronLexicon::derive(&vocab(2), 0, 8).is_err());
    }

    #[test]
    fn lexicon_file_overrides_counts() {
        let v = vocab(3);
        let counts = PronLexicon::read_state_counts(&b"w1\t5\n\nw2\t1\n"[..], &v).unwrap();
        assert_eq!(counts, vec![3, 5, 1]);
        assert!(PronLexicon::read_state_counts(&b"zz\t2\n"[..], &v).is_err());
        assert!(PronLexicon::read_state_counts(&b"w1 2\n"[..], &v).is_err());
    }
}
