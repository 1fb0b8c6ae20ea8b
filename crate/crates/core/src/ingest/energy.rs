use crate::error::{Error, Result};

/// Energy assigned to digital silence.
pub const DEFAULT_ENERGY_FLOOR: f32 = -20.0;

/// Natural log of the mean squared amplitude of a window of normalized
/// samples, floored at `floor`.
pub fn frame_energy(samples: &[f32], floor: f32) -> Result<f32> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample window".into()));
    }
    let mean_square = samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum::<f64>() / samples.len() as f64;
    if mean_square <= 0.0 {
        return Ok(floor);
    }
    Ok((mean_square.ln() as f32).max(floor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_hits_the_floor() {
        assert_eq!(frame_energy(&[0.0; 160], -20.0).unwrap(), -20.0);
        assert!(frame_energy(&[], -20.0).is_err());
    }

    #[test]
    fn full_scale_square_wave_is_zero() {
        let square: Vec<f32> = (0..160).map(|i| if i % 20 < 10 { 1.0 } else { -1.0 }).collect();
        assert_eq!(frame_energy(&square, -20.0).unwrap(), 0.0);
    }

    #[test]
    fn half_scale_sine_matches_direct_sum() {
        // 16 kHz, 400 Hz tone, one 10 ms window: exactly four periods.
        let sine: Vec<f32> = (0..160)
            .map(|i| 0.5 * (2.0 * std::f32::consts::PI * 400.0 * i as f32 / 16000.0).sin())
            .collect();
        let mut acc = 0.0f64;
        for s in &sine {
            acc += f64::from(*s).powi(2);
        }
        let oracle = (acc / 160.0).ln();
        let got = f64::from(frame_energy(&sine, -20.0).unwrap());
        assert!((got - oracle).abs() < 1e-5);
        // Mean square of a sine of amplitude a over whole periods is a^2 / 2.
        assert!((got - (0.125f64).ln()).abs() < 1e-4);
    }
}
