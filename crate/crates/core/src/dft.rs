//! Single-bin discrete Fourier coefficient of a steady-state recording.
//!
//! Normalisation is 2/M, so `A·cos(2πft + φ)` sampled over whole cycles
//! returns `A·e^{iφ}`: amplitude A and phase φ under the cosine
//! convention (a sine of amplitude A comes back with phase −π/2).
//! No window is applied.

use crate::data::ComplexObservation;
use crate::error::{Result, StatsError};

// how far M·f/fs may sit from an integer and still count as one
const BIN_TOL: f64 = 1e-9;

/// DFT bin index of `target_frequency` in an `len`-point series.
pub fn target_bin(len: usize, sample_rate: f64, target_frequency: f64) -> Result<usize> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(StatsError::Domain(format!("sample rate must be > 0, got {sample_rate}")));
    }
    if !(target_frequency > 0.0 && target_frequency.is_finite()) {
        return Err(StatsError::Domain(format!(
            "target frequency must be > 0, got {target_frequency}"
        )));
    }
    if len == 0 {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    let cycles = len as f64 * target_frequency / sample_rate;
    let bin = cycles.round();
    if (cycles - bin).abs() > BIN_TOL * cycles.max(1.0) {
        return Err(StatsError::NonIntegerCycles { len, cycles });
    }
    let bin = bin as usize;
    if bin == 0 || 2 * bin >= len {
        return Err(StatsError::FrequencyNotResolvable { bin, len });
    }
    Ok(bin)
}

/// Complex Fourier coefficient of `series` at `target_frequency`.
pub fn extract_component(
    series: &[f64],
    sample_rate: f64,
    target_frequency: f64,
) -> Result<ComplexObservation> {
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput(format!("sample {i} is not finite")));
    }
    let m = series.len();
    let bin = target_bin(m, sample_rate, target_frequency)?;
    // index arithmetic modulo M keeps the angle argument small and exact
    let step = std::f64::consts::TAU / m as f64;
    let (re, im) = series.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
        let (s, c) = ((t * bin % m) as f64 * step).sin_cos();
        (re + v * c, im - v * s)
    });
    let scale = 2.0 / m as f64;
    Ok(ComplexObservation::new(re * scale, im * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn tone(m: usize, fs: f64, f: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..m)
            .map(|t| amp * (TAU * f * t as f64 / fs + phase).cos())
            .collect()
    }

    #[test]
    fn cosine_and_sine() {
        let c = extract_component(&tone(500, 250.0, 7.5, 3.0, 0.0), 250.0, 7.5).unwrap();
        assert!((c.re - 3.0).abs() < 1e-9 && c.im.abs() < 1e-9);
        let s = extract_component(&tone(500, 250.0, 7.5, 2.0, -FRAC_PI_2), 250.0, 7.5).unwrap();
        assert!((s.amplitude() - 2.0).abs() < 1e-9);
        assert!((s.phase() + FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn arbitrary_phase_and_offset() {
        let mut x = tone(256, 128.0, 8.0, 1.5, 1.1);
        x.iter_mut().for_each(|v| *v += 4.0);
        let c = extract_component(&x, 128.0, 8.0).unwrap();
        assert!((c.amplitude() - 1.5).abs() < 1e-9);
        assert!((c.phase() - 1.1).abs() < 1e-9);
    }

    #[test]
    fn bin_errors() {
        assert!(matches!(
            extract_component(&[0.0; 100], 100.0, 2.5),
            Err(StatsError::NonIntegerCycles { .. })
        ));
        assert!(matches!(
            extract_component(&[0.0; 100], 100.0, 50.0),
            Err(StatsError::FrequencyNotResolvable { bin: 50, len: 100 })
        ));
        assert!(extract_component(&[0.0; 100], 0.0, 5.0).is_err());
        assert!(extract_component(&[], 100.0, 5.0).is_err());
    }
}
