//! Partial traceback of the prefix shared by all live paths, and the
//! forced flush that bounds output gaps.

use serde::{Deserialize, Serialize};

use crate::decoder::{Decoder, DecoderState, ROOT};
use crate::error::{Error, Result};
use crate::model::TimedWord;

/// Words no future search step can change.
#[derive(Debug, Clone, PartialEq)]
pub struct StablePortion {
    pub words: Vec<TimedWord>,
    pub through_frame: u64,
    pub segment_id: u32,
}

impl StablePortion {
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlushConfig {
    pub threshold: f64,
    pub enabled: bool,
}

impl FlushConfig {
    pub fn disabled() -> Self {
        Self {
            threshold: f64::INFINITY,
            enabled: false,
        }
    }

    /// An infinite threshold disables flushing.
    pub fn after(threshold: f64) -> Result<Self> {
        if threshold.is_infinite() && threshold > 0.0 {
            return Ok(Self::disabled());
        }
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(Error::InvalidInput(format!("flush threshold {threshold} must be > 0")));
        }
        Ok(Self {
            threshold,
            enabled: true,
        })
    }
}

impl Default for FlushConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

/// Releases the part of the common ancestor path of all active tokens that
/// lies beyond the cursor, and moves the cursor there.
pub fn stable_prefix(dec: &Decoder<'_>, state: &mut DecoderState) -> Result<StablePortion> {
    let mut tokens = state.tokens().iter().map(|t| t.trace());
    let Some(first) = tokens.next() else {
        return Err(Error::HardPruning {
            frame: state.frames_consumed(),
        });
    };
    let mut common = first;
    for t in tokens {
        if common == ROOT {
            break;
        }
        common = state.common_ancestor(common, t);
    }
    let cursor = state.cursor();
    let words = if state.trace_depth(common) > state.trace_depth(cursor) {
        let entries = state.trace_path(common, cursor);
        state.advance_cursor(common);
        dec.entries_to_words(&entries)?
    } else {
        Vec::new()
    };
    Ok(StablePortion {
        words,
        through_frame: state.cursor_frame(),
        segment_id: state.segment_id(),
    })
}

/// Words committed by a forced flush.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedFlush {
    pub words: Vec<TimedWord>,
    pub cursor_frame: u64,
}

/// Commits the completed words of the best path beyond the cursor once
/// output has been silent for longer than the threshold. Paths that
/// disagree with the committed words are dropped.
pub fn maybe_flush(
    dec: &Decoder<'_>,
    state: &mut DecoderState,
    now: f64,
    last_emission: f64,
    cfg: &FlushConfig,
) -> Result<Option<ForcedFlush>> {
    if !cfg.enabled || now - last_emission <= cfg.threshold {
        return Ok(None);
    }
    let Some(best) = state.best_token() else {
        return Err(Error::HardPruning {
            frame: state.frames_consumed(),
        });
    };
    let node = best.trace();
    let cursor = state.cursor();
    if state.trace_depth(node) <= state.trace_depth(cursor) {
        return Ok(None);
    }
    let entries = state.trace_path(node, cursor);
    state.advance_cursor(node);
    state.retain_descendants(node);
    Ok(Some(ForcedFlush {
        words: dec.entries_to_words(&entries)?,
        cursor_frame: state.cursor_frame(),
    }))
}
