use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Wall,
    Virtual,
}

/// Monotone time source for replaying a recording.
///
/// In virtual mode time only moves when work is charged or the caller waits
/// for input, which makes whole runs deterministic. In wall mode it tracks
/// elapsed real time since construction.
#[derive(Debug, Clone)]
pub struct ReplayClock {
    mode: ClockMode,
    now: f64,
    origin: Instant,
}

impl ReplayClock {
    pub fn new(mode: ClockMode) -> Self {
        Self {
            mode,
            now: 0.0,
            origin: Instant::now(),
        }
    }

    pub fn virtual_at(start: f64) -> Self {
        Self {
            mode: ClockMode::Virtual,
            now: start,
            origin: Instant::now(),
        }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&mut self) -> f64 {
        if self.mode == ClockMode::Wall {
            self.now = self.now.max(self.origin.elapsed().as_secs_f64());
        }
        self.now
    }

    /// Charges `work` seconds of processing. Wall mode ignores the amount
    /// because the work already took real time.
    pub fn advance(&mut self, work: f64) -> Result<f64> {
        if work.is_nan() || work < 0.0 {
            return Err(Error::InvalidInput(format!("negative work {work}")));
        }
        if self.mode == ClockMode::Virtual {
            self.now += work;
        }
        Ok(self.now())
    }

    /// Idles until `t`; never moves backwards.
    pub fn wait_until(&mut self, t: f64) -> f64 {
        match self.mode {
            ClockMode::Virtual => self.now = self.now.max(t),
            ClockMode::Wall => {
                let now = self.now();
                if t > now {
                    std::thread::sleep(Duration::from_secs_f64(t - now));
                }
            }
        }
        self.now()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn virtual_advance() {
        let mut c = ReplayClock::virtual_at(3.0);
        assert_eq!(c.advance(0.25).unwrap(), 3.25);
        assert_eq!(c.advance(0.0).unwrap(), 3.25);
        assert!(c.advance(-0.1).is_err());
        assert_eq!(c.wait_until(1.0), 3.25);
        assert_eq!(c.wait_until(4.0), 4.0);
    }

    #[test]
    fn sum_of_advances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut c = ReplayClock::virtual_at(1.5);
        let mut total = 0.0;
        for _ in 0..1000 {
            let w: f64 = rng.random_range(0.0..0.5);
            total += w;
            c.advance(w).unwrap();
        }
        assert!((c.now() - 1.5 - total).abs() < 1e-9);
    }

    #[test]
    fn wall_clock_is_monotone() {
        let mut c = ReplayClock::new(ClockMode::Wall);
        let a = c.now();
        let b = c.advance(100.0).unwrap();
        assert!(b >= a && b < 50.0);
        assert!(c.wait_until(b + 0.005) >= b + 0.005);
    }
}
