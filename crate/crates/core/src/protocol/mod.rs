//! Recognizer-to-display messages, their wire form, and the display-side
//! state they drive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quantize, TimedWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    SegmentStart,
    Stable,
    Update,
    Flush,
    SegmentEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub kind: EventKind,
    #[serde(rename = "segment")]
    pub segment_id: u32,
    #[serde(rename = "t_emit")]
    pub emit_time: f64,
    pub replace_from: Option<usize>,
    pub words: Vec<TimedWord>,
}

impl EmissionEvent {
    pub fn new(kind: EventKind, segment_id: u32, emit_time: f64, words: Vec<TimedWord>) -> Self {
        Self {
            kind,
            segment_id,
            emit_time: quantize(emit_time),
            replace_from: None,
            words,
        }
    }

    pub fn update(segment_id: u32, emit_time: f64, replace_from: usize, words: Vec<TimedWord>) -> Self {
        Self {
            replace_from: Some(replace_from),
            ..Self::new(EventKind::Update, segment_id, emit_time, words)
        }
    }

    fn validate(&self) -> Result<()> {
        if (self.kind == EventKind::Update) != self.replace_from.is_some() {
            return Err(Error::Protocol(format!(
                "{:?} event with replace_from {:?}",
                self.kind, self.replace_from
            )));
        }
        if !(self.emit_time >= 0.0 && self.emit_time.is_finite()) {
            return Err(Error::Protocol(format!("emit time {}", self.emit_time)));
        }
        for w in &self.words {
            if TimedWord::new(w.text.clone(), w.start, w.end).ok().as_ref() != Some(w) {
                return Err(Error::Protocol(format!("malformed word {w:?}")));
            }
        }
        Ok(())
    }
}

/// One JSON object, no trailing newline.
pub fn encode_event(ev: &EmissionEvent) -> String {
    serde_json::to_string(ev).expect("events always serialize")
}

pub fn decode_event(line: &str) -> Result<EmissionEvent> {
    let ev: EmissionEvent = serde_json::from_str(line).map_err(|e| Error::Decode {
        // serde_json columns are 1-based
        offset: line
            .lines()
            .take(e.line().saturating_sub(1))
            .map(|l| l.len() + 1)
            .sum::<usize>()
            + e.column().saturating_sub(1),
        msg: e.to_string(),
    })?;
    ev.validate().map_err(|e| Error::Decode {
        offset: 0,
        msg: e.to_string(),
    })?;
    Ok(ev)
}

/// Index of the first differing word and the replacement suffix; `None`
/// when the texts agree.
pub fn diff_update(prev: &[TimedWord], current: &[TimedWord]) -> Option<(usize, Vec<TimedWord>)> {
    let common = prev.iter().zip(current).take_while(|(a, b)| a.text == b.text).count();
    if common == prev.len() && common == current.len() {
        return None;
    }
    Some((common, current[common..].to_vec()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplayWord {
    pub word: TimedWord,
    pub first_appearance: f64,
    pub last_update: f64,
    pub finalized: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentDisplay {
    pub committed: Vec<DisplayWord>,
    pub revisable: Vec<DisplayWord>,
    pub ended: bool,
    last_emit: f64,
}

impl SegmentDisplay {
    pub fn texts(&self) -> Vec<&str> {
        self.committed
            .iter()
            .chain(&self.revisable)
            .map(|d| d.word.text.as_str())
            .collect()
    }

    /// Moves the matching revisable prefix into the committed region; words
    /// beyond the displayed tail are appended as new.
    pub fn mark_stable(&mut self, words: &[TimedWord], time: f64) -> Result<()> {
        for (i, w) in words.iter().enumerate() {
            if let Some(shown) = self.revisable.get(i) {
                if shown.word.text != w.text {
                    return Err(Error::Protocol(format!(
                        "stable word {:?} does not match displayed {:?}",
                        w.text, shown.word.text
                    )));
                }
            }
        }
        let moved = words.len().min(self.revisable.len());
        let shown: Vec<DisplayWord> = self.revisable.drain(..moved).collect();
        for (i, w) in words.iter().enumerate() {
            let (first, last) = shown
                .get(i)
                .map_or((time, time), |d| (d.first_appearance, d.last_update));
            self.committed.push(DisplayWord {
                word: w.clone(),
                first_appearance: first,
                last_update: last,
                finalized: true,
            });
        }
        Ok(())
    }
}

/// What the display shows, per segment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisplayState {
    segments: BTreeMap<u32, SegmentDisplay>,
}

impl DisplayState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn segment(&self, id: u32) -> Option<&SegmentDisplay> {
        self.segments.get(&id)
    }

    pub fn segments(&self) -> impl Iterator<Item = (u32, &SegmentDisplay)> {
        self.segments.iter().map(|(k, v)| (*k, v))
    }

    pub fn apply_event(&mut self, ev: &EmissionEvent) -> Result<()> {
        if ev.kind == EventKind::SegmentStart {
            if self.segments.contains_key(&ev.segment_id) {
                return Err(Error::Protocol(format!("segment {} started twice", ev.segment_id)));
            }
            self.segments.insert(
                ev.segment_id,
                SegmentDisplay {
                    last_emit: ev.emit_time,
                    ..Default::default()
                },
            );
            return Ok(());
        }
        let seg = self
            .segments
            .get_mut(&ev.segment_id)
            .ok_or_else(|| Error::Protocol(format!("segment {} was never started", ev.segment_id)))?;
        if seg.ended {
            return Err(Error::Protocol(format!("event after end of segment {}", ev.segment_id)));
        }
        if ev.emit_time < seg.last_emit {
            return Err(Error::Protocol(format!(
                "event at {} precedes {} in segment {}",
                ev.emit_time, seg.last_emit, ev.segment_id
            )));
        }
        seg.last_emit = ev.emit_time;
        let t = ev.emit_time;
        match ev.kind {
            EventKind::SegmentStart => unreachable!(),
            EventKind::Update => {
                let from = ev.replace_from.unwrap_or(0);
                if from > seg.revisable.len() {
                    return Err(Error::Protocol(format!(
                        "replace_from {from} beyond revisable length {}",
                        seg.revisable.len()
                    )));
                }
                seg.revisable.truncate(from);
                seg.revisable.extend(ev.words.iter().map(|w| DisplayWord {
                    word: w.clone(),
                    first_appearance: t,
                    last_update: t,
                    finalized: false,
                }));
            }
            EventKind::Stable | EventKind::Flush => seg.mark_stable(&ev.words, t)?,
            EventKind::SegmentEnd => {
                seg.mark_stable(&ev.words, t)?;
                let rest: Vec<DisplayWord> = seg.revisable.drain(..).collect();
                seg.committed
                    .extend(rest.into_iter().map(|d| DisplayWord { finalized: true, ..d }));
                seg.ended = true;
            }
        }
        Ok(())
    }
}
