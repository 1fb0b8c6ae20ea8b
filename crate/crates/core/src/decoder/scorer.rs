use std::borrow::Cow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::lexicon::StateId;
use crate::error::{Error, Result};
use crate::ingest::Frame;

/// Source of per-frame acoustic log-scores, one per state.
pub trait AcousticScorer {
    fn state_count(&self) -> usize;
    fn frame_scores<'f>(&'f self, frame: &'f Frame) -> Result<Cow<'f, [f32]>>;
}

/// Uses the score vectors already carried by the frames.
#[derive(Debug, Clone, Copy)]
pub struct PrecomputedScores {
    pub state_count: usize,
}

impl AcousticScorer for PrecomputedScores {
    fn state_count(&self) -> usize {
        self.state_count
    }

    fn frame_scores<'f>(&'f self, frame: &'f Frame) -> Result<Cow<'f, [f32]>> {
        if frame.acoustic_scores.len() != self.state_count {
            return Err(Error::InvalidInput(format!(
                "frame {} carries {} scores, expected {}",
                frame.index,
                frame.acoustic_scores.len(),
                self.state_count
            )));
        }
        Ok(Cow::Borrowed(&frame.acoustic_scores))
    }
}

/// A stretch of frames where the truth is harder to tell from its
/// competitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardRegion {
    pub start: u64,
    /// exclusive
    pub end: u64,
    pub margin: f32,
    pub competitors: usize,
}

impl HardRegion {
    pub fn contains(&self, frame: u64) -> bool {
        (self.start..self.end).contains(&frame)
    }
}

/// Stand-in for a trained acoustic model: draws scores around a known
/// state alignment.
///
/// Outside hard regions the true state scores `N(0, σ²)` and every other
/// state `N(-m, σ²)`. Inside one, the margin drops to `m_hard` and `k`
/// competitor states of the true state score `N(-m_hard / 2, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScorer {
    pub alignment: Vec<StateId>,
    pub state_count: usize,
    pub margin: f32,
    pub sigma: f32,
    pub hard_regions: Vec<HardRegion>,
    pub seed: u64,
}

impl SyntheticScorer {
    fn region(&self, frame: u64) -> Option<&HardRegion> {
        // regions are few; a scan is fine
        self.hard_regions.iter().find(|r| r.contains(frame))
    }

    /// States confusable with `truth`, deterministic per seed.
    pub fn competitors(&self, truth: StateId, k: usize) -> Vec<StateId> {
        let inventory = (self.state_count - 1) as u64;
        let mut out = Vec::with_capacity(k);
        let mut j = 0u64;
        while out.len() < k.min(self.state_count.saturating_sub(2)) {
            let h = splitmix(self.seed ^ (u64::from(truth) << 32) ^ j);
            let s = 1 + (h % inventory) as StateId;
            if s != truth && !out.contains(&s) {
                out.push(s);
            }
            j += 1;
        }
        out
    }

    pub fn synth_scores(&self, frame_index: u64) -> Result<Vec<f32>> {
        let len = self.alignment.len() as u64;
        if frame_index >= len {
            return Err(Error::OutOfRange {
                index: frame_index,
                len,
            });
        }
        let truth = self.alignment[frame_index as usize];
        let (margin, competitors) = match self.region(frame_index) {
            Some(r) => (r.margin, self.competitors(truth, r.competitors)),
            None => (self.margin, Vec::new()),
        };
        let mut means = vec![-margin; self.state_count];
        for &c in &competitors {
            means[usize::from(c)] = -margin / 2.0;
        }
        means[usize::from(truth)] = 0.0;
        if self.sigma == 0.0 {
            return Ok(means);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(frame_index);
        let noise = Normal::new(0.0f32, self.sigma)
            .map_err(|e| Error::InvalidInput(format!("noise sigma {}: {e}", self.sigma)))?;
        Ok(means.into_iter().map(|m| m + noise.sample(&mut rng)).collect())
    }
}

impl AcousticScorer for SyntheticScorer {
    fn state_count(&self) -> usize {
        self.state_count
    }

    fn frame_scores<'f>(&'f self, frame: &'f Frame) -> Result<Cow<'f, [f32]>> {
        self.synth_scores(frame.index).map(Cow::Owned)
    }
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
