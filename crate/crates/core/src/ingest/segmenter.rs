use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Frame;
use crate::error::{Error, Result};

/// Hysteresis thresholds and run lengths, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Speech starts when energy exceeds this...
    pub t_on: f32,
    /// ...and ends when it stays below this one.
    pub t_off: f32,
    pub min_speech: usize,
    pub min_silence: usize,
    pub pad: usize,
    pub frame_ms: u32,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            t_on: -5.0,
            t_off: -6.0,
            min_speech: 10,
            min_silence: 30,
            pad: 10,
            frame_ms: super::DEFAULT_FRAME_MS,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_off > self.t_on {
            return Err(Error::InvalidInput(format!(
                "t_off {} above t_on {}",
                self.t_off, self.t_on
            )));
        }
        if self.min_silence == 0 || self.frame_ms == 0 {
            return Err(Error::InvalidInput("min_silence and frame_ms must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmenterEventKind {
    SegmentStart,
    FrameForwarded,
    SegmentEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmenterEvent {
    /// `time` is the start of the first forwarded frame, lead-in included.
    SegmentStart {
        segment_id: u32,
        time: f64,
    },
    FrameForwarded {
        segment_id: u32,
        frame: Frame,
    },
    /// `time` is the end of the last forwarded frame, trailing pad included.
    SegmentEnd {
        segment_id: u32,
        time: f64,
    },
}

impl SegmenterEvent {
    pub fn kind(&self) -> SegmenterEventKind {
        match self {
            Self::SegmentStart { .. } => SegmenterEventKind::SegmentStart,
            Self::FrameForwarded { .. } => SegmenterEventKind::FrameForwarded,
            Self::SegmentEnd { .. } => SegmenterEventKind::SegmentEnd,
        }
    }

    pub fn segment_id(&self) -> u32 {
        match self {
            Self::SegmentStart { segment_id, .. }
            | Self::FrameForwarded { segment_id, .. }
            | Self::SegmentEnd { segment_id, .. } => *segment_id,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Self::SegmentStart { time, .. } | Self::SegmentEnd { time, .. } => *time,
            Self::FrameForwarded { frame, .. } => frame.time,
        }
    }
}

#[derive(Debug)]
enum Mode {
    Silence {
        lead_in: VecDeque<Frame>,
        onset: Vec<Frame>,
    },
    Speech {
        segment_id: u32,
        trailing: Vec<Frame>,
        /// End time of the last frame forwarded so far.
        forwarded_end: f64,
    },
}

/// Energy-based speech/silence segmenter with hysteresis.
///
/// Frames inside a segment are forwarded; stretches of inter-segment silence
/// are dropped. A candidate onset is held back until it has lasted
/// `min_speech` frames, and a candidate pause until it has lasted
/// `min_silence` frames, so forwarding lags the input by at most that much.
#[derive(Debug)]
pub struct Segmenter {
    cfg: SegmenterConfig,
    mode: Mode,
    next_segment: u32,
    last_index: Option<u64>,
}

impl Segmenter {
    pub fn new(cfg: SegmenterConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            mode: Mode::Silence {
                lead_in: VecDeque::new(),
                onset: Vec::new(),
            },
            next_segment: 0,
            last_index: None,
        })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.cfg
    }

    pub fn in_speech(&self) -> bool {
        matches!(self.mode, Mode::Speech { .. })
    }

    pub fn step(&mut self, frame: Frame) -> Result<Vec<SegmenterEvent>> {
        if let Some(last) = self.last_index {
            if frame.index <= last {
                return Err(Error::Ordering(format!(
                    "frame {} arrived after frame {last}",
                    frame.index
                )));
            }
        }
        self.last_index = Some(frame.index);

        let cfg = self.cfg;
        let mut events = Vec::new();
        match &mut self.mode {
            Mode::Silence { lead_in, onset } => {
                if frame.energy > cfg.t_on {
                    onset.push(frame);
                    if onset.len() >= cfg.min_speech.max(1) {
                        let segment_id = self.next_segment;
                        self.next_segment += 1;
                        let frames: Vec<Frame> = lead_in.drain(..).chain(onset.drain(..)).collect();
                        events.push(SegmenterEvent::SegmentStart {
                            segment_id,
                            time: frames[0].time,
                        });
                        let forwarded_end = frames[frames.len() - 1].end_time(cfg.frame_ms);
                        events.extend(
                            frames
                                .into_iter()
                                .map(|frame| SegmenterEvent::FrameForwarded { segment_id, frame }),
                        );
                        self.mode = Mode::Speech {
                            segment_id,
                            trailing: Vec::new(),
                            forwarded_end,
                        };
                    }
                } else {
                    // A broken onset is silence after all.
                    lead_in.extend(onset.drain(..));
                    lead_in.push_back(frame);
                    while lead_in.len() > cfg.pad {
                        lead_in.pop_front();
                    }
                }
            }
            Mode::Speech {
                segment_id,
                trailing,
                forwarded_end,
            } => {
                let segment_id = *segment_id;
                if frame.energy < cfg.t_off {
                    trailing.push(frame);
                    if trailing.len() >= cfg.min_silence {
                        let mut rest = std::mem::take(trailing);
                        let after_pad = rest.split_off(cfg.pad.min(rest.len()));
                        Self::close_segment(segment_id, rest, *forwarded_end, cfg.frame_ms, &mut events);
                        let mut lead_in: VecDeque<Frame> = after_pad.into();
                        while lead_in.len() > cfg.pad {
                            lead_in.pop_front();
                        }
                        self.mode = Mode::Silence {
                            lead_in,
                            onset: Vec::new(),
                        };
                    }
                } else {
                    *forwarded_end = frame.end_time(cfg.frame_ms);
                    events.extend(
                        trailing
                            .drain(..)
                            .chain(std::iter::once(frame))
                            .map(|frame| SegmenterEvent::FrameForwarded { segment_id, frame }),
                    );
                }
            }
        }
        Ok(events)
    }

    /// Ends the stream, closing any open segment.
    pub fn finish(&mut self) -> Vec<SegmenterEvent> {
        let mut events = Vec::new();
        let mode = std::mem::replace(
            &mut self.mode,
            Mode::Silence {
                lead_in: VecDeque::new(),
                onset: Vec::new(),
            },
        );
        if let Mode::Speech {
            segment_id,
            mut trailing,
            forwarded_end,
        } = mode
        {
            trailing.truncate(self.cfg.pad);
            Self::close_segment(segment_id, trailing, forwarded_end, self.cfg.frame_ms, &mut events);
        }
        events
    }

    fn close_segment(
        segment_id: u32,
        pad_frames: Vec<Frame>,
        forwarded_end: f64,
        frame_ms: u32,
        events: &mut Vec<SegmenterEvent>,
    ) {
        let mut time = forwarded_end;
        for frame in pad_frames {
            time = frame.end_time(frame_ms);
            events.push(SegmenterEvent::FrameForwarded { segment_id, frame });
        }
        events.push(SegmenterEvent::SegmentEnd { segment_id, time });
    }
}

/// Runs a whole frame sequence through a fresh segmenter.
pub fn segment_all(cfg: SegmenterConfig, frames: impl IntoIterator<Item = Frame>) -> Result<Vec<SegmenterEvent>> {
    let mut seg = Segmenter::new(cfg)?;
    let mut out = Vec::new();
    for f in frames {
        out.extend(seg.step(f)?);
    }
    out.extend(seg.finish());
    Ok(out)
}
