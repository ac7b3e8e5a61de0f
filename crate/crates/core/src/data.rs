//! Complex Fourier observations, per-condition samples, grouped datasets
//! and the 2×2 covariance summary shared by every test.

use std::collections::{HashMap, HashSet};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

/// Relative threshold below which the minor eigenvalue counts as zero.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// One complex Fourier coefficient (real and imaginary parts).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexObservation {
    pub re: f64,
    pub im: f64,
}

impl ComplexObservation {
    pub const ZERO: ComplexObservation = ComplexObservation { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn from_polar(amplitude: f64, phase: f64) -> Self {
        Self::new(amplitude * phase.cos(), amplitude * phase.sin())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn amplitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Phase in (−π, π].
    pub fn phase(&self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn rotate(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.re - s * self.im, s * self.re + c * self.im)
    }
}

impl Add for ComplexObservation {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for ComplexObservation {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for ComplexObservation {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul<f64> for ComplexObservation {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.re * rhs, self.im * rhs)
    }
}

/// Arithmetic (vector) mean; `None` for an empty slice.
pub fn vector_mean(obs: &[ComplexObservation]) -> Option<ComplexObservation> {
    if obs.is_empty() {
        return None;
    }
    let n = obs.len() as f64;
    let (re, im) = obs
        .iter()
        .fold((0.0, 0.0), |(re, im), o| (re + o.re, im + o.im));
    Some(ComplexObservation::new(re / n, im / n))
}

/// The observations recorded for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSample {
    observations: Vec<ComplexObservation>,
    condition_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit_labels: Option<Vec<String>>,
}

impl ComplexSample {
    pub fn new(
        condition_label: impl Into<String>,
        observations: Vec<ComplexObservation>,
    ) -> Result<Self> {
        if let Some(i) = observations.iter().position(|o| !o.is_finite()) {
            return Err(StatsError::InvalidInput(format!(
                "observation {i} is not finite"
            )));
        }
        Ok(Self {
            observations,
            condition_label: condition_label.into(),
            unit_labels: None,
        })
    }

    pub fn with_units(
        condition_label: impl Into<String>,
        observations: Vec<ComplexObservation>,
        unit_labels: Vec<String>,
    ) -> Result<Self> {
        if unit_labels.len() != observations.len() {
            return Err(StatsError::InvalidInput(format!(
                "{} unit labels for {} observations",
                unit_labels.len(),
                observations.len()
            )));
        }
        let mut sample = Self::new(condition_label, observations)?;
        sample.unit_labels = Some(unit_labels);
        Ok(sample)
    }

    /// Convenience constructor from `(re, im)` pairs.
    pub fn from_pairs(condition_label: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            condition_label,
            pairs
                .iter()
                .map(|&(re, im)| ComplexObservation::new(re, im))
                .collect(),
        )
    }

    pub fn observations(&self) -> &[ComplexObservation] {
        &self.observations
    }

    pub fn condition_label(&self) -> &str {
        &self.condition_label
    }

    pub fn unit_labels(&self) -> Option<&[String]> {
        self.unit_labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn mean(&self) -> Option<ComplexObservation> {
        vector_mean(&self.observations)
    }

    /// Σ |x_j − x̄|².
    pub fn residual_sum_squares(&self) -> f64 {
        match self.mean() {
            Some(m) => self.observations.iter().map(|o| (*o - m).norm_sqr()).sum(),
            None => 0.0,
        }
    }

    /// Applies `f` to every observation, keeping labels.
    pub fn map(&self, f: impl Fn(ComplexObservation) -> ComplexObservation) -> Self {
        Self {
            observations: self.observations.iter().copied().map(f).collect(),
            condition_label: self.condition_label.clone(),
            unit_labels: self.unit_labels.clone(),
        }
    }

    /// Keeps the observations whose index satisfies `keep`.
    pub fn retain_indices(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        Self {
            observations: idx.iter().map(|&i| self.observations[i]).collect(),
            condition_label: self.condition_label.clone(),
            unit_labels: self
                .unit_labels
                .as_ref()
                .map(|u| idx.iter().map(|&i| u[i].clone()).collect()),
        }
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            Err(StatsError::TooFewObservations {
                needed,
                got: self.len(),
            })
        } else {
            Ok(())
        }
    }

    fn reordered(&self, order: &[usize]) -> Self {
        Self {
            observations: order.iter().map(|&i| self.observations[i]).collect(),
            condition_label: self.condition_label.clone(),
            unit_labels: self
                .unit_labels
                .as_ref()
                .map(|u| order.iter().map(|&i| u[i].clone()).collect()),
        }
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Eigen-decomposition of a [`Sym2`], eigenvalues in descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub values: (f64, f64),
    pub vectors: [[f64; 2]; 2],
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    /// Scatter matrix Σ (x_j − center)(x_j − center)'.
    pub fn scatter(obs: &[ComplexObservation], center: ComplexObservation) -> Self {
        obs.iter().fold(Self::default(), |acc, o| {
            let d = *o - center;
            Self::new(acc.xx + d.re * d.re, acc.xy + d.re * d.im, acc.yy + d.im * d.im)
        })
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.xx + other.xx, self.xy + other.xy, self.yy + other.yy)
    }

    /// Closed-form decomposition from the trace and the discriminant.
    pub fn eigen(&self) -> Eigen2 {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.xx - self.yy);
        let rad = half_diff.hypot(self.xy);
        let major = half_tr + rad;
        // det/major avoids cancellation in half_tr − rad
        let minor = if major > 0.0 {
            self.det() / major
        } else {
            half_tr - rad
        };
        let angle = 0.5 * self.xy.atan2(half_diff);
        let (s, c) = angle.sin_cos();
        Eigen2 {
            values: (major, minor),
            vectors: [[c, s], [-s, c]],
        }
    }

    /// Whether the minor eigenvalue is at most `DEGENERACY_EPS` × trace.
    pub fn is_degenerate(&self) -> bool {
        let tr = self.trace();
        tr <= 0.0 || !tr.is_finite() || self.eigen().values.1 <= DEGENERACY_EPS * tr
    }

    pub fn inverse(&self) -> Option<Self> {
        if self.is_degenerate() {
            return None;
        }
        let det = self.det();
        Some(Self::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    /// v' M v.
    pub fn quad_form(&self, v: ComplexObservation) -> f64 {
        self.xx * v.re * v.re + 2.0 * self.xy * v.re * v.im + self.yy * v.im * v.im
    }

    pub fn as_rows(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }
}

/// Mean, covariance and bounding-ellipse geometry of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSummary {
    pub mean: ComplexObservation,
    pub cov: [[f64; 2]; 2],
    /// (λ_max, λ_min)
    pub eigenvalues: (f64, f64),
    /// Rows are the major and minor unit eigenvectors.
    pub eigenvectors: [[f64; 2]; 2],
    /// sqrt(λ_max / λ_min); `None` when the covariance is degenerate.
    pub condition_index: Option<f64>,
    pub degenerate: bool,
    pub n: usize,
}

impl CovarianceSummary {
    pub fn matrix(&self) -> Sym2 {
        Sym2::new(self.cov[0][0], self.cov[0][1], self.cov[1][1])
    }
}

/// Sample mean, N−1 covariance and its eigen-structure.
pub fn covariance_summary(sample: &ComplexSample) -> Result<CovarianceSummary> {
    sample.require(2)?;
    let n = sample.len();
    let mean = sample.mean().expect("non-empty");
    let cov = Sym2::scatter(sample.observations(), mean).scale(1.0 / (n - 1) as f64);
    let eig = cov.eigen();
    let degenerate = cov.is_degenerate();
    let (major, minor) = eig.values;
    Ok(CovarianceSummary {
        mean,
        cov: cov.as_rows(),
        eigenvalues: (major, minor.max(0.0)),
        eigenvectors: eig.vectors,
        condition_index: (!degenerate).then(|| (major / minor).sqrt()),
        degenerate,
        n,
    })
}

/// Coherently averages each unit's repetitions.
///
/// Every element of `units` holds the repetitions of one unit; its
/// `condition_label` is taken as the unit identifier. The result has one
/// observation per unit, labelled by unit.
pub fn coherent_mean(
    condition_label: impl Into<String>,
    units: &[ComplexSample],
) -> Result<ComplexSample> {
    let mut obs = Vec::with_capacity(units.len());
    let mut labels = Vec::with_capacity(units.len());
    for unit in units {
        let m = unit
            .mean()
            .ok_or_else(|| StatsError::EmptyUnit(unit.condition_label().to_string()))?;
        obs.push(m);
        labels.push(unit.condition_label().to_string());
    }
    ComplexSample::with_units(condition_label, obs, labels)
}

/// Study design of a [`GroupedDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    OneSample,
    TwoSampleIndependent,
    Paired,
    OnewayIndependent,
    OnewayRepeated,
}

impl Design {
    /// Whether observations are matched across conditions by unit.
    pub fn is_within_units(self) -> bool {
        matches!(self, Design::Paired | Design::OnewayRepeated)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Design::OneSample => "one_sample",
            Design::TwoSampleIndependent => "two_sample_independent",
            Design::Paired => "paired",
            Design::OnewayIndependent => "oneway_independent",
            Design::OnewayRepeated => "oneway_repeated",
        }
    }
}

impl std::str::FromStr for Design {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_sample" | "one-sample" => Ok(Design::OneSample),
            "two_sample_independent" | "two-sample" | "independent" => {
                Ok(Design::TwoSampleIndependent)
            }
            "paired" => Ok(Design::Paired),
            "oneway_independent" | "oneway-independent" => Ok(Design::OnewayIndependent),
            "oneway_repeated" | "oneway-repeated" | "repeated" => Ok(Design::OnewayRepeated),
            other => Err(StatsError::InvalidInput(format!("unknown design '{other}'"))),
        }
    }
}

/// Samples for each condition plus the design that relates them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDataset {
    samples: Vec<ComplexSample>,
    design: Design,
    mu: ComplexObservation,
}

impl GroupedDataset {
    /// Validates sample counts against the design; within-unit designs are
    /// aligned to the unit order of the first sample.
    pub fn new(samples: Vec<ComplexSample>, design: Design) -> Result<Self> {
        let k = samples.len();
        let ok = match design {
            Design::OneSample => k == 1,
            Design::TwoSampleIndependent | Design::Paired => k == 2,
            Design::OnewayIndependent | Design::OnewayRepeated => k >= 2,
        };
        if !ok {
            return Err(StatsError::DesignMismatch(format!(
                "design {} cannot hold {k} condition(s)",
                design.as_str()
            )));
        }
        let samples = if design.is_within_units() {
            align_units(&samples)?
        } else {
            samples
        };
        Ok(Self {
            samples,
            design,
            mu: ComplexObservation::ZERO,
        })
    }

    pub fn with_mu(mut self, mu: ComplexObservation) -> Self {
        self.mu = mu;
        self
    }

    pub fn samples(&self) -> &[ComplexSample] {
        &self.samples
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn mu(&self) -> ComplexObservation {
        self.mu
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub(crate) fn from_parts_unchecked(
        samples: Vec<ComplexSample>,
        design: Design,
        mu: ComplexObservation,
    ) -> Self {
        Self {
            samples,
            design,
            mu,
        }
    }
}

/// Reorders every sample so that unit labels line up with the first one.
///
/// Samples without unit labels are aligned by position, which requires
/// all of them to be unlabelled and of equal length.
pub fn align_units(samples: &[ComplexSample]) -> Result<Vec<ComplexSample>> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let labelled = samples.iter().filter(|s| s.unit_labels().is_some()).count();
    if labelled == 0 {
        if samples.iter().any(|s| s.len() != first.len()) {
            return Err(StatsError::LabelMismatch(
                "unlabelled samples differ in length".into(),
            ));
        }
        return Ok(samples.to_vec());
    }
    if labelled != samples.len() {
        return Err(StatsError::LabelMismatch(
            "some conditions carry unit labels and others do not".into(),
        ));
    }
    let reference = first.unit_labels().expect("labelled");
    let mut seen = HashSet::new();
    if let Some(dup) = reference.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(StatsError::LabelMismatch(format!(
            "unit '{dup}' appears twice in condition '{}'",
            first.condition_label()
        )));
    }
    let mut aligned = Vec::with_capacity(samples.len());
    for s in samples {
        let labels = s.unit_labels().expect("labelled");
        if labels.len() != reference.len() {
            return Err(StatsError::LabelMismatch(format!(
                "condition '{}' has {} units, expected {}",
                s.condition_label(),
                labels.len(),
                reference.len()
            )));
        }
        let index: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        if index.len() != labels.len() {
            return Err(StatsError::LabelMismatch(format!(
                "duplicate unit label in condition '{}'",
                s.condition_label()
            )));
        }
        let order = reference
            .iter()
            .map(|l| {
                index.get(l.as_str()).copied().ok_or_else(|| {
                    StatsError::LabelMismatch(format!(
                        "unit '{l}' missing from condition '{}'",
                        s.condition_label()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        aligned.push(s.reordered(&order));
    }
    Ok(aligned)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross() -> ComplexSample {
        ComplexSample::from_pairs("c", &[(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]).unwrap()
    }

    #[test]
    fn cross_pattern_is_spherical() {
        let s = covariance_summary(&cross()).unwrap();
        assert_eq!(s.mean, ComplexObservation::ZERO);
        assert!((s.cov[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.cov[1][1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.cov[0][1], 0.0);
        assert!((s.condition_index.unwrap() - 1.0).abs() < 1e-12);
        assert!(!s.degenerate);
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let s = ComplexSample::from_pairs("c", &[(0.3, -2.0); 5]).unwrap();
        let summary = covariance_summary(&s).unwrap();
        assert_eq!(summary.cov, [[0.0; 2]; 2]);
        assert!(summary.degenerate);
        assert!(summary.condition_index.is_none());
    }

    #[test]
    fn hand_mean() {
        let s = ComplexSample::from_pairs("c", &[(2.0, 0.0), (2.0, 1.0), (3.0, 0.0), (3.0, 1.0)])
            .unwrap();
        let summary = covariance_summary(&s).unwrap();
        assert_eq!(summary.mean, ComplexObservation::new(2.5, 0.5));
    }

    #[test]
    fn single_observation_is_rejected() {
        let s = ComplexSample::from_pairs("c", &[(1.0, 1.0)]).unwrap();
        assert_eq!(
            covariance_summary(&s),
            Err(StatsError::TooFewObservations { needed: 2, got: 1 })
        );
    }

    #[test]
    fn eigen_matches_definition() {
        let m = Sym2::new(2.0, 0.7, 0.5);
        let e = m.eigen();
        for (lambda, v) in [(e.values.0, e.vectors[0]), (e.values.1, e.vectors[1])] {
            let mv = [m.xx * v[0] + m.xy * v[1], m.xy * v[0] + m.yy * v[1]];
            assert!((mv[0] - lambda * v[0]).abs() < 1e-12);
            assert!((mv[1] - lambda * v[1]).abs() < 1e-12);
        }
        let dot = e.vectors[0][0] * e.vectors[1][0] + e.vectors[0][1] * e.vectors[1][1];
        assert!(dot.abs() < 1e-15);
    }

    #[test]
    fn coherent_mean_examples() {
        let u1 = ComplexSample::from_pairs("u1", &[(1.0, 0.0), (0.0, 1.0)]).unwrap();
        let u2 = ComplexSample::from_pairs("u2", &[(0.4, -0.2); 3]).unwrap();
        let u3 = ComplexSample::from_pairs("u3", &[(1.0, 0.0), (-1.0, 0.0)]).unwrap();
        let m = coherent_mean("cond", &[u1, u2, u3]).unwrap();
        assert_eq!(m.observations()[0], ComplexObservation::new(0.5, 0.5));
        let repeat = m.observations()[1] - ComplexObservation::new(0.4, -0.2);
        assert!(repeat.amplitude() < 1e-15);
        assert_eq!(m.observations()[2].amplitude(), 0.0);
        assert_eq!(m.unit_labels().unwrap(), ["u1", "u2", "u3"]);

        let empty = ComplexSample::new("u4", vec![]).unwrap();
        assert_eq!(
            coherent_mean("cond", &[empty]),
            Err(StatsError::EmptyUnit("u4".into()))
        );
    }

    #[test]
    fn paired_alignment_uses_labels() {
        let obs = |v: &[f64]| v.iter().map(|&x| ComplexObservation::new(x, 0.0)).collect();
        let labels = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        let a = ComplexSample::with_units("a", obs(&[1.0, 2.0, 3.0]), labels(&["s1", "s2", "s3"]))
            .unwrap();
        let b = ComplexSample::with_units("b", obs(&[30.0, 10.0, 20.0]), labels(&["s3", "s1", "s2"]))
            .unwrap();
        let ds = GroupedDataset::new(vec![a.clone(), b], Design::Paired).unwrap();
        let re: Vec<f64> = ds.samples()[1].observations().iter().map(|o| o.re).collect();
        assert_eq!(re, vec![10.0, 20.0, 30.0]);

        let c = ComplexSample::with_units("c", obs(&[1.0, 2.0, 3.0]), labels(&["s1", "s2", "s9"]))
            .unwrap();
        assert!(matches!(
            GroupedDataset::new(vec![a, c], Design::Paired),
            Err(StatsError::LabelMismatch(_))
        ));
    }

    #[test]
    fn design_sample_counts() {
        let s = cross();
        assert!(GroupedDataset::new(vec![s.clone()], Design::OneSample).is_ok());
        assert!(GroupedDataset::new(vec![s.clone(), s.clone()], Design::OneSample).is_err());
        assert!(GroupedDataset::new(vec![s.clone()], Design::OnewayIndependent).is_err());
        assert!(GroupedDataset::new(vec![s.clone(); 3], Design::TwoSampleIndependent).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(ComplexSample::from_pairs("c", &[(f64::NAN, 0.0)]).is_err());
    }
}
