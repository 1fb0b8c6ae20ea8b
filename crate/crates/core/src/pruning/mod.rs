//! Adaptive beam control and the virtual compute-cost model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NOMINAL_BEAM: f64 = 12.0;
pub const DEFAULT_NARROW_FACTOR: f64 = 0.7;

/// Virtual processing time: `c0` per chunk plus `c1` per active token per
/// frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c0: f64,
    pub c1: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        // calibrated on the default synthetic benchmark
        Self { c0: 0.01, c1: 2.13e-5 }
    }
}

impl CostModel {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        let m = Self { c0, c1 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 >= 0.0 && self.c0.is_finite() && self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cost model needs c0 >= 0 and c1 > 0, got {} and {}",
                self.c0, self.c1
            )));
        }
        Ok(())
    }

    pub fn chunk_cost(&self, active_token_frame_sum: u64) -> f64 {
        self.c0 + self.c1 * active_token_frame_sum as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneController {
    nominal_beam: f64,
    current_beam: f64,
    min_beam: f64,
    narrow_factor: f64,
    backlog: f64,
}

impl Default for PruneController {
    fn default() -> Self {
        Self::new(DEFAULT_NOMINAL_BEAM, DEFAULT_NARROW_FACTOR).expect("defaults are valid")
    }
}

impl PruneController {
    /// Floor is a third of the nominal width.
    pub fn new(nominal_beam: f64, narrow_factor: f64) -> Result<Self> {
        Self::with_min_beam(nominal_beam, narrow_factor, nominal_beam / 3.0)
    }

    pub fn with_min_beam(nominal_beam: f64, narrow_factor: f64, min_beam: f64) -> Result<Self> {
        if !(nominal_beam.is_finite() && min_beam > 0.0 && min_beam <= nominal_beam) {
            return Err(Error::InvalidInput(format!(
                "beam bounds [{min_beam}, {nominal_beam}] are invalid"
            )));
        }
        if !(narrow_factor > 0.0 && narrow_factor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "narrowing factor {narrow_factor} outside (0, 1)"
            )));
        }
        Ok(Self {
            nominal_beam,
            current_beam: nominal_beam,
            min_beam,
            narrow_factor,
            backlog: 0.0,
        })
    }

    pub fn nominal_beam(&self) -> f64 {
        self.nominal_beam
    }

    pub fn current_beam(&self) -> f64 {
        self.current_beam
    }

    pub fn min_beam(&self) -> f64 {
        self.min_beam
    }

    pub fn backlog(&self) -> f64 {
        self.backlog
    }

    pub fn caught_up(&self) -> bool {
        self.backlog == 0.0
    }

    /// Narrows after a slower-than-real-time chunk, resets once caught up.
    pub fn update_beam(&mut self, chunk_rtf: f64, caught_up: bool) -> f64 {
        if chunk_rtf > 1.0 {
            self.current_beam = (self.current_beam * self.narrow_factor).max(self.min_beam);
        } else if caught_up {
            self.current_beam = self.nominal_beam;
        }
        self.current_beam
    }

    pub fn update_backlog(&mut self, chunk_audio_duration: f64, chunk_cost: f64) -> f64 {
        self.backlog = (self.backlog + chunk_cost - chunk_audio_duration).max(0.0);
        self.backlog
    }

    /// Audio that passes without decoding work, e.g. dropped silence.
    pub fn idle(&mut self, seconds: f64) -> f64 {
        self.backlog = (self.backlog - seconds.max(0.0)).max(0.0);
        self.backlog
    }

    /// Feeds one chunk through both rules and returns the beam for the next.
    pub fn observe_chunk(&mut self, chunk_audio_duration: f64, chunk_cost: f64) -> f64 {
        let rtf = if chunk_audio_duration > 0.0 {
            chunk_cost / chunk_audio_duration
        } else {
            0.0
        };
        self.update_backlog(chunk_audio_duration, chunk_cost);
        self.update_beam(rtf, self.caught_up())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cost_is_affine() {
        let m = CostModel::new(0.05, 1e-4).unwrap();
        assert_eq!(m.chunk_cost(0), 0.05);
        let one = m.chunk_cost(1000) - m.c0;
        let two = m.chunk_cost(2000) - m.c0;
        assert!((two - 2.0 * one).abs() < 1e-15);
        assert!(CostModel::new(0.0, 0.0).is_err());
        assert!(CostModel::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn narrowing_and_reset() {
        let mut c = PruneController::new(12.0, 0.7).unwrap();
        assert!((c.update_beam(1.3, false) - 8.4).abs() < 1e-12);
        assert_eq!(c.update_beam(0.5, true), 12.0);
        for _ in 0..20 {
            c.update_beam(2.0, false);
        }
        assert_eq!(c.current_beam(), 4.0);
        assert_eq!(c.update_beam(0.9, false), 4.0);
    }

    #[test]
    fn backlog_examples() {
        let mut c = PruneController::default();
        assert_eq!(c.update_backlog(0.4, 0.2), 0.0);
        assert!((c.update_backlog(0.4, 0.9) - 0.5).abs() < 1e-12);
        assert!((c.idle(0.3) - 0.2).abs() < 1e-12);
        assert_eq!(c.idle(1.0), 0.0);
    }

    proptest! {
        #[test]
        fn backlog_is_max_plus_recursion(steps in prop::collection::vec((0.0f64..1.0, 0.0f64..2.0), 0..200)) {
            let mut c = PruneController::default();
            let mut oracle = 0.0f64;
            for (audio, cost) in steps {
                let got = c.update_backlog(audio, cost);
                oracle = f64::max(0.0, oracle + cost - audio);
                prop_assert!(got >= 0.0);
                prop_assert!((got - oracle).abs() < 1e-9);
            }
        }

        #[test]
        fn beam_stays_in_bounds(rtfs in prop::collection::vec((0.0f64..3.0, any::<bool>()), 0..200)) {
            let mut c = PruneController::new(12.0, 0.7).unwrap();
            for (rtf, caught_up) in rtfs {
                let b = c.update_beam(rtf, caught_up);
                prop_assert!((c.min_beam()..=c.nominal_beam()).contains(&b));
            }
        }
    }
}
