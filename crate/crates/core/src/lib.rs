//! Streaming recognition latency laboratory: run-on chunked decoding,
//! stable-prefix extraction, adaptive pruning and a revision protocol,
//! measured on deterministic synthetic benchmarks.

pub mod decoder;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod lm;
pub mod model;
pub mod protocol;
pub mod pruning;
pub mod stability;

pub use decoder::{Decoder, DecoderState, PronLexicon, SearchConfig, SyntheticScorer};
pub use error::{Error, Result};
pub use ingest::{Chunk, Frame};
pub use lm::NGramModel;
pub use model::{Hypothesis, TimedWord, Transcript, WerBreakdown};
pub use protocol::{DisplayState, EmissionEvent, EventKind};
pub use pruning::{CostModel, PruneController};
pub use stability::{FlushConfig, StablePortion};
