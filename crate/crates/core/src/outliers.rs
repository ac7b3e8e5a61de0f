//! Mahalanobis distances, the D > 3 screening rule and the pairwise
//! Mahalanobis effect size.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{covariance_summary, ComplexSample, GroupedDataset, Sym2};
use crate::error::{Result, StatsError};

pub const DEFAULT_THRESHOLD: f64 = 3.0;

/// Per-observation Mahalanobis distances for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub condition_label: String,
    pub distances: Vec<f64>,
    /// Indices (into the screened sample) with D > threshold.
    pub flagged: Vec<usize>,
    pub threshold: f64,
    /// Unit labels of the flagged observations, when units are labelled.
    pub excluded_units: Vec<String>,
}

/// Screening outcome across every condition of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub threshold: f64,
    pub conditions: Vec<OutlierReport>,
    /// Units removed from every condition (within-unit designs).
    pub excluded_units: Vec<String>,
    pub observations_removed: usize,
    /// Conditions that could not be screened (degenerate covariance).
    pub skipped_conditions: Vec<String>,
    pub warnings: Vec<String>,
}

/// D_j = sqrt((x_j − x̄)' C⁻¹ (x_j − x̄)), flagged against `threshold`.
pub fn mahalanobis_distances(sample: &ComplexSample, threshold: f64) -> Result<OutlierReport> {
    if !(threshold > 0.0) {
        return Err(StatsError::Domain(format!("threshold must be > 0, got {threshold}")));
    }
    sample.require(3)?;
    let summary = covariance_summary(sample)?;
    let inv = summary
        .matrix()
        .inverse()
        .ok_or(StatsError::DegenerateCovariance)?;
    let distances: Vec<f64> = sample
        .observations()
        .iter()
        .map(|&x| inv.quad_form(x - summary.mean).max(0.0).sqrt())
        .collect();
    let flagged: Vec<usize> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > threshold)
        .map(|(i, _)| i)
        .collect();
    let excluded_units = sample
        .unit_labels()
        .map(|u| flagged.iter().map(|&i| u[i].clone()).collect())
        .unwrap_or_default();
    Ok(OutlierReport {
        condition_label: sample.condition_label().to_string(),
        distances,
        flagged,
        threshold,
        excluded_units,
    })
}

/// Single-pass outlier exclusion.
///
/// Distances are computed once per condition with every point included.
/// Within-unit designs drop a flagged unit from all conditions; other
/// designs drop individual observations.
pub fn exclude_outliers(
    dataset: &GroupedDataset,
    threshold: f64,
) -> Result<(GroupedDataset, ScreeningReport)> {
    let mut conditions = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    for s in dataset.samples() {
        match mahalanobis_distances(s, threshold) {
            Ok(r) => conditions.push(r),
            Err(StatsError::Domain(m)) => return Err(StatsError::Domain(m)),
            Err(e) => {
                warnings.push(format!(
                    "condition '{}' not screened: {e}",
                    s.condition_label()
                ));
                skipped.push(s.condition_label().to_string());
            }
        }
    }

    let within = dataset.design().is_within_units();
    let (samples, excluded_units, removed) = if within {
        let drop: BTreeSet<usize> = conditions
            .iter()
            .flat_map(|r| r.flagged.iter().copied())
            .collect();
        let units: Vec<String> = match dataset.samples()[0].unit_labels() {
            Some(u) => drop.iter().map(|&i| u[i].clone()).collect(),
            None => drop.iter().map(|i| format!("#{i}")).collect(),
        };
        let samples: Vec<ComplexSample> = dataset
            .samples()
            .iter()
            .map(|s| s.retain_indices(|i| !drop.contains(&i)))
            .collect();
        let removed = drop.len() * dataset.k();
        (samples, units, removed)
    } else {
        let mut removed = 0;
        let samples = dataset
            .samples()
            .iter()
            .map(|s| {
                let flagged: BTreeSet<usize> = conditions
                    .iter()
                    .find(|r| r.condition_label == s.condition_label())
                    .map(|r| r.flagged.iter().copied().collect())
                    .unwrap_or_default();
                removed += flagged.len();
                s.retain_indices(|i| !flagged.contains(&i))
            })
            .collect();
        (samples, Vec::new(), removed)
    };

    if samples.iter().any(|s| s.is_empty()) {
        warnings.push("screening removed every observation of at least one condition".into());
    }
    let reduced =
        GroupedDataset::from_parts_unchecked(samples, dataset.design(), dataset.mu());
    Ok((
        reduced,
        ScreeningReport {
            threshold,
            conditions,
            excluded_units,
            observations_removed: removed,
            skipped_conditions: skipped,
            warnings,
        },
    ))
}

/// Mahalanobis distance between two condition means under the pooled
/// covariance ((N_a − 1)C_a + (N_b − 1)C_b) / (N_a + N_b − 2).
///
/// When the pooled covariance is rank one and the mean difference lies
/// along its non-degenerate axis the distance reduces to Cohen's d on that
/// axis; any component off that axis makes the distance infinite and is
/// reported as [`StatsError::DegenerateCovariance`].
pub fn pairwise_mahalanobis(a: &ComplexSample, b: &ComplexSample) -> Result<f64> {
    a.require(3)?;
    b.require(3)?;
    let (ma, mb) = (a.mean().expect("n ≥ 3"), b.mean().expect("n ≥ 3"));
    let pooled = Sym2::scatter(a.observations(), ma)
        .add(&Sym2::scatter(b.observations(), mb))
        .scale(1.0 / (a.len() + b.len() - 2) as f64);
    let diff = ma - mb;
    if let Some(inv) = pooled.inverse() {
        return Ok(inv.quad_form(diff).max(0.0).sqrt());
    }
    let eig = pooled.eigen();
    let major = eig.values.0;
    if major <= 0.0 {
        return Err(StatsError::DegenerateCovariance);
    }
    let [e1, e2] = eig.vectors;
    let along = diff.re * e1[0] + diff.im * e1[1];
    let across = diff.re * e2[0] + diff.im * e2[1];
    let scale = diff.amplitude().max(ma.amplitude()).max(mb.amplitude());
    if across.abs() > 1e-9 * scale {
        return Err(StatsError::DegenerateCovariance);
    }
    Ok(along.abs() / major.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ComplexObservation, Design};

    fn cross() -> ComplexSample {
        ComplexSample::from_pairs("c", &[(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]).unwrap()
    }

    #[test]
    fn cross_distances() {
        let r = mahalanobis_distances(&cross(), DEFAULT_THRESHOLD).unwrap();
        for d in &r.distances {
            assert!((d - 1.5f64.sqrt()).abs() < 1e-12);
        }
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn point_at_mean_has_zero_distance() {
        let s = ComplexSample::from_pairs(
            "c",
            &[(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (0.0, 0.0)],
        )
        .unwrap();
        let r = mahalanobis_distances(&s, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.distances[4], 0.0);
    }

    #[test]
    fn bad_threshold() {
        assert!(mahalanobis_distances(&cross(), 0.0).is_err());
    }

    #[test]
    fn identical_means_zero_effect() {
        let a = cross();
        let b = cross().map(|o| o * 2.0);
        assert_eq!(pairwise_mahalanobis(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn univariate_reduces_to_cohens_d() {
        // im constant; re spread with pooled SD 1 and means one SD apart
        let a = ComplexSample::from_pairs("a", &[(-1.0, 2.0), (0.0, 2.0), (1.0, 2.0)]).unwrap();
        let b = ComplexSample::from_pairs("b", &[(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)]).unwrap();
        let d = pairwise_mahalanobis(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "{d}");
        let c = b.map(|o| o + ComplexObservation::new(0.0, 0.5));
        assert_eq!(pairwise_mahalanobis(&a, &c), Err(StatsError::DegenerateCovariance));
    }

    fn labelled(label: &str, pts: &[(f64, f64)]) -> ComplexSample {
        ComplexSample::with_units(
            label,
            pts.iter().map(|&(r, i)| ComplexObservation::new(r, i)).collect(),
            (0..pts.len()).map(|i| format!("u{i}")).collect(),
        )
        .unwrap()
    }

    fn spread_with_outlier(outlier: (f64, f64)) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = (0..24)
            .map(|i| {
                let t = i as f64 * 0.7;
                (t.cos() * (1.0 + 0.1 * (i % 3) as f64), t.sin())
            })
            .collect();
        pts.push(outlier);
        pts
    }

    #[test]
    fn unit_exclusion_removes_unit_everywhere() {
        let a = labelled("a", &spread_with_outlier((30.0, 30.0)));
        let b = labelled("b", &spread_with_outlier((0.1, 0.2)));
        let ds = GroupedDataset::new(vec![a, b], Design::Paired).unwrap();
        let (reduced, report) = exclude_outliers(&ds, 3.0).unwrap();
        assert_eq!(report.excluded_units, vec!["u24".to_string()]);
        assert!(reduced.samples().iter().all(|s| s.len() == 24));
    }

    #[test]
    fn independent_exclusion_is_per_observation() {
        let a = labelled("a", &spread_with_outlier((30.0, 30.0)));
        let b = labelled("b", &spread_with_outlier((0.1, 0.2)));
        let ds = GroupedDataset::new(vec![a, b], Design::TwoSampleIndependent).unwrap();
        let (reduced, report) = exclude_outliers(&ds, 3.0).unwrap();
        assert_eq!(reduced.samples()[0].len(), 24);
        assert_eq!(reduced.samples()[1].len(), 25);
        assert_eq!(report.observations_removed, 1);
    }

    #[test]
    fn clean_data_unchanged() {
        let a = labelled("a", &spread_with_outlier((0.5, 0.5)));
        let ds = GroupedDataset::new(vec![a], Design::OneSample).unwrap();
        let (reduced, report) = exclude_outliers(&ds, 3.0).unwrap();
        assert_eq!(reduced, ds);
        assert_eq!(report.observations_removed, 0);
    }
}
