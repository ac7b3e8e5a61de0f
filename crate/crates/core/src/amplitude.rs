//! Amplitude of the coherent mean with error bounds, either from the
//! standard-error ellipse of the mean or from a percentile bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{covariance_summary, vector_mean, ComplexObservation, ComplexSample};
use crate::distributions::chi2_2_quantile;
use crate::error::{Result, StatsError};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMethod {
    EllipseSe,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSummary {
    pub mean_amplitude: f64,
    pub mean_phase: f64,
    pub error_low: f64,
    pub error_high: f64,
    pub method: AmplitudeMethod,
    pub level: f64,
    /// The ellipse contains the origin, so `error_low` is pinned to 0.
    pub origin_inside: bool,
}

const SCAN_POINTS: usize = 64;
const RESTARTS: usize = 3;
const GOLDEN_TOL: f64 = 1e-10;

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(StatsError::Domain(format!("level must be in (0, 1), got {level}")))
    }
}

/// Ellipse `centre + a·cos θ·u + b·sin θ·v`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub centre: ComplexObservation,
    pub semi_axes: (f64, f64),
    pub axes: [[f64; 2]; 2],
}

impl Ellipse {
    pub fn point(&self, theta: f64) -> ComplexObservation {
        let (s, c) = theta.sin_cos();
        let (a, b) = self.semi_axes;
        let [u, v] = self.axes;
        ComplexObservation::new(
            self.centre.re + a * c * u[0] + b * s * v[0],
            self.centre.im + a * c * u[1] + b * s * v[1],
        )
    }

    fn contains_origin(&self) -> bool {
        let [u, v] = self.axes;
        let (a, b) = self.semi_axes;
        let p = -self.centre;
        let x = (p.re * u[0] + p.im * u[1]) / a;
        let y = (p.re * v[0] + p.im * v[1]) / b;
        x * x + y * y <= 1.0
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    f(0.5 * (lo + hi)).min(f1).min(f2)
}

// Smallest value of `f` on the circle, refining the best coarse-scan
// local minima by golden-section search.
fn circular_min(f: impl Fn(f64) -> f64) -> f64 {
    let step = std::f64::consts::TAU / SCAN_POINTS as f64;
    let values: Vec<f64> = (0..SCAN_POINTS).map(|i| f(i as f64 * step)).collect();
    let mut minima: Vec<usize> = (0..SCAN_POINTS)
        .filter(|&i| {
            let prev = values[(i + SCAN_POINTS - 1) % SCAN_POINTS];
            let next = values[(i + 1) % SCAN_POINTS];
            values[i] <= prev && values[i] <= next
        })
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    minima
        .iter()
        .take(RESTARTS)
        .map(|&i| {
            let centre = i as f64 * step;
            golden_min(&f, centre - step, centre + step)
        })
        .fold(values.iter().copied().fold(f64::INFINITY, f64::min), f64::min)
}

/// Nearest and farthest distances from the origin to an ellipse.
pub fn ellipse_distance_range(ellipse: &Ellipse) -> (f64, f64) {
    let near = circular_min(|t| ellipse.point(t).norm_sqr()).sqrt();
    let far = (-circular_min(|t| -ellipse.point(t).norm_sqr())).sqrt();
    (near, far)
}

/// The `level` standard-error ellipse of the mean: covariance / N scaled
/// by the two-degree-of-freedom χ² quantile.
pub fn se_ellipse(sample: &ComplexSample, level: f64) -> Result<Ellipse> {
    check_level(level)?;
    sample.require(3)?;
    let summary = covariance_summary(sample)?;
    if summary.degenerate {
        return Err(StatsError::DegenerateCovariance);
    }
    let radius2 = chi2_2_quantile(level)?;
    let n = sample.len() as f64;
    let (major, minor) = summary.eigenvalues;
    Ok(Ellipse {
        centre: summary.mean,
        semi_axes: ((radius2 * major / n).sqrt(), (radius2 * minor / n).sqrt()),
        axes: summary.eigenvectors,
    })
}

pub fn amp_errors_ellipse(sample: &ComplexSample, level: f64) -> Result<AmplitudeSummary> {
    let ellipse = se_ellipse(sample, level)?;
    let (near, far) = ellipse_distance_range(&ellipse);
    let inside = ellipse.contains_origin();
    Ok(AmplitudeSummary {
        mean_amplitude: ellipse.centre.amplitude(),
        mean_phase: ellipse.centre.phase(),
        error_low: if inside { 0.0 } else { near },
        error_high: far,
        method: AmplitudeMethod::EllipseSe,
        level,
        origin_inside: inside,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Amplitudes of `n_boot` resampled complex means.
pub fn bootstrap_mean_amplitudes(sample: &ComplexSample, n_boot: usize, seed: u64) -> Vec<f64> {
    let obs = sample.observations();
    let n = obs.len() as u32;
    (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, 0, b);
            let (re, im) = (0..n).fold((0.0, 0.0), |(re, im), _| {
                let o = obs[rng.gen_range(0..n) as usize];
                (re + o.re, im + o.im)
            });
            re.hypot(im) / n as f64
        })
        .collect()
}

/// Percentile bootstrap interval for the amplitude of the coherent mean.
pub fn amp_ci_bootstrap(
    sample: &ComplexSample,
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<AmplitudeSummary> {
    check_level(level)?;
    sample.require(2)?;
    if n_boot == 0 {
        return Err(StatsError::Domain("n_boot must be ≥ 1".into()));
    }
    let mean = vector_mean(sample.observations()).expect("n ≥ 2");
    let mut amps = bootstrap_mean_amplitudes(sample, n_boot, seed);
    amps.sort_by(f64::total_cmp);
    Ok(AmplitudeSummary {
        mean_amplitude: mean.amplitude(),
        mean_phase: mean.phase(),
        error_low: quantile_sorted(&amps, (1.0 - level) / 2.0),
        error_high: quantile_sorted(&amps, (1.0 + level) / 2.0),
        method: AmplitudeMethod::Bootstrap,
        level,
        origin_inside: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(centre: (f64, f64), n: usize) -> ComplexSample {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                (centre.0 + t.cos(), centre.1 + t.sin())
            })
            .collect();
        ComplexSample::from_pairs("c", &pts).unwrap()
    }

    #[test]
    fn isotropic_bounds_are_symmetric() {
        let s = ring((5.0, 0.0), 8);
        let r = amp_errors_ellipse(&s, 0.68).unwrap();
        // ring covariance is (n/(2(n−1))) I
        let var = 8.0 / (2.0 * 7.0);
        let rad = (chi2_2_quantile(0.68).unwrap() * var / 8.0).sqrt();
        assert!((r.mean_amplitude - 5.0).abs() < 1e-12);
        assert!((r.error_low - (5.0 - rad)).abs() < 1e-9);
        assert!((r.error_high - (5.0 + rad)).abs() < 1e-9);
        assert!(!r.origin_inside);
    }

    #[test]
    fn origin_inside() {
        let r = amp_errors_ellipse(&ring((0.0, 0.0), 6), 0.95).unwrap();
        assert!(r.origin_inside);
        assert_eq!(r.error_low, 0.0);
    }

    #[test]
    fn bootstrap_constant_sample() {
        let s = ComplexSample::from_pairs("c", &[(2.5, 0.0); 5]).unwrap();
        let r = amp_ci_bootstrap(&s, 0.95, 200, 3).unwrap();
        assert_eq!(r.error_low, 2.5);
        assert_eq!(r.error_high, 2.5);
    }

    #[test]
    fn bootstrap_seeded() {
        let s = ring((1.0, 2.0), 9);
        let a = amp_ci_bootstrap(&s, 0.68, 500, 11).unwrap();
        let b = amp_ci_bootstrap(&s, 0.68, 500, 11).unwrap();
        assert_eq!(a, b);
        let c = amp_ci_bootstrap(&s, 0.68, 500, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn level_domain() {
        let s = ring((1.0, 2.0), 9);
        assert!(amp_errors_ellipse(&s, 1.0).is_err());
        assert!(amp_ci_bootstrap(&s, 0.0, 10, 1).is_err());
    }
}
