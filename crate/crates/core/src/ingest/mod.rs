//! Audio ingestion: timed frames, energy-based segmentation, the shared
//! stream buffer between segmenter and decoder, and the replay clock.

mod buffer;
mod clock;
mod energy;
mod segmenter;
mod stream_file;

pub use buffer::{BufferReader, BufferStats, BufferWriter, ChunkRead, StreamBuffer};
pub use clock::{ClockMode, ReplayClock};
pub use energy::{frame_energy, DEFAULT_ENERGY_FLOOR};
pub use segmenter::{segment_all, Segmenter, SegmenterConfig, SegmenterEvent, SegmenterEventKind};
pub use stream_file::{frames_from_wav, read_stream, read_wav_energies, write_stream, StreamData, StreamMeta};

use crate::error::{Error, Result};
use crate::model::millis;

pub const DEFAULT_FRAME_MS: u32 = 10;
pub const DEFAULT_CHUNK_FRAMES: usize = 40;
pub const DEFAULT_BUFFER_CAPACITY: usize = 6000;

/// One analysis frame: its energy and the acoustic log-scores of every state.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub time: f64,
    pub energy: f32,
    pub acoustic_scores: Vec<f32>,
}

impl Frame {
    pub fn new(index: u64, frame_ms: u32, energy: f32, acoustic_scores: Vec<f32>) -> Self {
        Self {
            index,
            time: millis(index * u64::from(frame_ms)),
            energy,
            acoustic_scores,
        }
    }

    /// Start time of the frame following this one.
    pub fn end_time(&self, frame_ms: u32) -> f64 {
        millis((self.index + 1) * u64::from(frame_ms))
    }
}

/// A run of consecutive frames handed to the decoder in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    frames: Vec<Frame>,
    segment_id: u32,
    chunk_index: u32,
}

impl Chunk {
    pub fn new(frames: Vec<Frame>, segment_id: u32, chunk_index: u32) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidInput("empty chunk".into()));
        }
        for pair in frames.windows(2) {
            if pair[1].index != pair[0].index + 1 {
                return Err(Error::Ordering(format!(
                    "chunk frames {} and {} are not consecutive",
                    pair[0].index, pair[1].index
                )));
            }
        }
        Ok(Self {
            frames,
            segment_id,
            chunk_index,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn segment_id(&self) -> u32 {
        self.segment_id
    }

    pub fn chunk_index(&self) -> u32 {
        self.chunk_index
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_index(&self) -> u64 {
        self.frames[0].index
    }

    pub fn duration(&self, frame_ms: u32) -> f64 {
        millis(self.frames.len() as u64 * u64::from(frame_ms))
    }
}
