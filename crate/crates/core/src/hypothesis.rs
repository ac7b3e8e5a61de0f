//! Hotelling's T², the circular T²circ, the condition-index test,
//! ANOVA²circ and a one-way MANOVA fallback.
//!
//! Every F-based result carries an upper-tail p-value. Two-sample and
//! paired variants follow the usual reductions: paired tests run the
//! one-sample test on per-unit complex differences against zero.

use serde::{Deserialize, Serialize};

use crate::data::{
    align_units, covariance_summary, vector_mean, ComplexObservation, ComplexSample, Sym2,
};
use crate::distributions::{ci_sf, f_sf, ConditionIndexDensity, FParams};
use crate::error::{Result, StatsError};
use crate::outliers::pairwise_mahalanobis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticName {
    #[serde(rename = "T2")]
    T2,
    #[serde(rename = "T2circ")]
    T2circ,
    #[serde(rename = "ANOVA2circ")]
    Anova2circ,
    #[serde(rename = "MANOVA_wilks")]
    ManovaWilks,
    #[serde(rename = "CI_test")]
    CiTest,
}

impl StatisticName {
    pub fn as_str(self) -> &'static str {
        match self {
            StatisticName::T2 => "T2",
            StatisticName::T2circ => "T2circ",
            StatisticName::Anova2circ => "ANOVA2circ",
            StatisticName::ManovaWilks => "MANOVA_wilks",
            StatisticName::CiTest => "CI_test",
        }
    }
}

/// Outcome of one test. `f_value` and `df` are absent for the
/// condition-index test, whose null distribution is not an F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic_name: StatisticName,
    pub statistic: f64,
    pub f_value: Option<f64>,
    pub df: Option<(u32, u32)>,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub n_per_group: Vec<usize>,
}

impl TestResult {
    fn from_f(
        statistic_name: StatisticName,
        statistic: f64,
        f_value: f64,
        df: (usize, usize),
        n_per_group: Vec<usize>,
    ) -> Result<Self> {
        let params = FParams::new(df.0 as u32, df.1 as u32)?;
        let f_value = f_value.max(0.0);
        Ok(Self {
            statistic_name,
            statistic,
            f_value: Some(f_value),
            df: Some((params.df1, params.df2)),
            p_value: f_sf(f_value, params)?,
            effect_size: None,
            n_per_group,
        })
    }

    fn with_effect(mut self, effect: Option<f64>) -> Self {
        self.effect_size = effect;
        self
    }

    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn inverse_or_degenerate(m: &Sym2) -> Result<Sym2> {
    m.inverse().ok_or(StatsError::DegenerateCovariance)
}

// Σ|x_j − x̄|², rejecting (numerically) zero spread.
fn residual_ss(samples: &[&ComplexSample]) -> Result<f64> {
    let ssr: f64 = samples.iter().map(|s| s.residual_sum_squares()).sum();
    let raw: f64 = samples
        .iter()
        .flat_map(|s| s.observations())
        .map(|o| o.norm_sqr())
        .sum();
    if ssr <= 1e-24 * raw || ssr == 0.0 {
        return Err(StatsError::ZeroResidualVariance);
    }
    Ok(ssr)
}

// A sample with no spread that sits exactly on `mu` carries no evidence
// against the null: report a zero statistic rather than 0/0.
fn null_point_mass(
    name: StatisticName,
    sample: &ComplexSample,
    mu: ComplexObservation,
    df: (usize, usize),
) -> Option<Result<TestResult>> {
    let scale: f64 = sample.observations().iter().map(|o| o.norm_sqr()).sum::<f64>() + mu.norm_sqr();
    let tiny = 1e-24 * scale;
    let mean = sample.mean()?;
    let flat = sample.residual_sum_squares() <= tiny;
    let on_mu = (mean - mu).norm_sqr() <= tiny;
    (flat && on_mu).then(|| TestResult::from_f(name, 0.0, 0.0, df, vec![sample.len()]))
}

/// One-sample Hotelling's T² against `mu`.
pub fn t2_one_sample(sample: &ComplexSample, mu: ComplexObservation) -> Result<TestResult> {
    sample.require(3)?;
    let n = sample.len();
    if let Some(r) = null_point_mass(StatisticName::T2, sample, mu, (2, n - 2)) {
        return r;
    }
    let summary = covariance_summary(sample)?;
    let inv = inverse_or_degenerate(&summary.matrix())?;
    let diff = summary.mean - mu;
    let d2 = inv.quad_form(diff);
    let t2 = n as f64 * d2;
    let f = (n - 2) as f64 / (2.0 * (n - 1) as f64) * t2;
    Ok(TestResult::from_f(StatisticName::T2, t2, f, (2, n - 2), vec![n])?.with_effect(Some(d2.sqrt())))
}

/// One-sample T²circ against `mu`; F = N·T²circ on (2, 2N − 2) df.
pub fn t2circ_one_sample(sample: &ComplexSample, mu: ComplexObservation) -> Result<TestResult> {
    sample.require(2)?;
    let n = sample.len();
    if let Some(r) = null_point_mass(StatisticName::T2circ, sample, mu, (2, 2 * n - 2)) {
        return r;
    }
    let ssr = residual_ss(&[sample])?;
    let mean = sample.mean().expect("n ≥ 2");
    let t2c = (n - 1) as f64 * (mean - mu).norm_sqr() / ssr;
    let effect = covariance_summary(sample)
        .ok()
        .and_then(|s| s.matrix().inverse())
        .map(|inv| inv.quad_form(mean - mu).sqrt());
    Ok(
        TestResult::from_f(StatisticName::T2circ, t2c, n as f64 * t2c, (2, 2 * n - 2), vec![n])?
            .with_effect(effect),
    )
}

/// Two-sample Hotelling's T² with pooled covariance.
pub fn t2_two_sample(a: &ComplexSample, b: &ComplexSample) -> Result<TestResult> {
    a.require(3)?;
    b.require(3)?;
    let (na, nb) = (a.len(), b.len());
    let (ma, mb) = (a.mean().expect("n ≥ 3"), b.mean().expect("n ≥ 3"));
    let pooled = Sym2::scatter(a.observations(), ma)
        .add(&Sym2::scatter(b.observations(), mb))
        .scale(1.0 / (na + nb - 2) as f64);
    let inv = inverse_or_degenerate(&pooled)?;
    let d2 = inv.quad_form(ma - mb);
    let t2 = (na * nb) as f64 / (na + nb) as f64 * d2;
    let f = (na + nb - 3) as f64 / (2.0 * (na + nb - 2) as f64) * t2;
    Ok(
        TestResult::from_f(StatisticName::T2, t2, f, (2, na + nb - 3), vec![na, nb])?
            .with_effect(Some(d2.sqrt())),
    )
}

/// Two-sample T²circ.
///
/// T²circ = (N_a + N_b − 2)·|x̄_a − x̄_b|² / (SS_a + SS_b) and
/// F = N_aN_b/(N_a + N_b) · T²circ on (2, 2(N_a + N_b − 2)) df, so that
/// equal groups of N give (2, 4N − 4) and k = 2 matches ANOVA²circ.
pub fn t2circ_two_sample(a: &ComplexSample, b: &ComplexSample) -> Result<TestResult> {
    a.require(2)?;
    b.require(2)?;
    let (na, nb) = (a.len(), b.len());
    let ssr = residual_ss(&[a, b])?;
    let diff = a.mean().expect("n ≥ 2") - b.mean().expect("n ≥ 2");
    let t2c = (na + nb - 2) as f64 * diff.norm_sqr() / ssr;
    let f = (na * nb) as f64 / (na + nb) as f64 * t2c;
    Ok(
        TestResult::from_f(StatisticName::T2circ, t2c, f, (2, 2 * (na + nb - 2)), vec![na, nb])?
            .with_effect(pairwise_mahalanobis(a, b).ok()),
    )
}

/// Per-unit complex differences a − b after aligning units by label.
pub fn paired_differences(a: &ComplexSample, b: &ComplexSample) -> Result<ComplexSample> {
    let aligned = align_units(&[a.clone(), b.clone()])?;
    let (a, b) = (&aligned[0], &aligned[1]);
    let diffs = a
        .observations()
        .iter()
        .zip(b.observations())
        .map(|(x, y)| *x - *y)
        .collect();
    let label = format!("{} - {}", a.condition_label(), b.condition_label());
    match a.unit_labels() {
        Some(units) => ComplexSample::with_units(label, diffs, units.to_vec()),
        None => ComplexSample::new(label, diffs),
    }
}

pub fn t2_paired(a: &ComplexSample, b: &ComplexSample) -> Result<TestResult> {
    let d = paired_differences(a, b)?;
    Ok(t2_one_sample(&d, ComplexObservation::ZERO)?.with_effect(pairwise_mahalanobis(a, b).ok()))
}

pub fn t2circ_paired(a: &ComplexSample, b: &ComplexSample) -> Result<TestResult> {
    let d = paired_differences(a, b)?;
    Ok(t2circ_one_sample(&d, ComplexObservation::ZERO)?
        .with_effect(pairwise_mahalanobis(a, b).ok()))
}

/// Condition-index test of the equal-variance, zero-correlation assumption.
pub fn ci_test(sample: &ComplexSample) -> Result<TestResult> {
    sample.require(3)?;
    let summary = covariance_summary(sample)?;
    let ci = summary
        .condition_index
        .ok_or(StatsError::DegenerateCovariance)?;
    let density = ConditionIndexDensity::modified(sample.len() as u32)?;
    Ok(TestResult {
        statistic_name: StatisticName::CiTest,
        statistic: ci,
        f_value: None,
        df: None,
        p_value: ci_sf(ci, density)?,
        effect_size: None,
        n_per_group: vec![sample.len()],
    })
}

fn require_groups(groups: &[ComplexSample], needed: usize) -> Result<()> {
    if groups.len() < needed {
        return Err(StatsError::TooFewGroups {
            needed,
            got: groups.len(),
        });
    }
    Ok(())
}

fn grand_mean(groups: &[ComplexSample]) -> ComplexObservation {
    let all: Vec<ComplexObservation> = groups
        .iter()
        .flat_map(|g| g.observations().iter().copied())
        .collect();
    vector_mean(&all).unwrap_or_default()
}

/// Between-group sum of squared vector distances Σ N_k |x̄_k − x̄|².
fn model_ss(groups: &[ComplexSample], grand: ComplexObservation) -> f64 {
    groups
        .iter()
        .map(|g| g.len() as f64 * (g.mean().expect("non-empty") - grand).norm_sqr())
        .sum()
}

/// Independent-groups ANOVA²circ on (2(k − 1), 2(ΣN_k − k)) df.
pub fn anova2circ_independent(groups: &[ComplexSample]) -> Result<TestResult> {
    require_groups(groups, 2)?;
    for g in groups {
        g.require(2)?;
    }
    let k = groups.len();
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let grand = grand_mean(groups);
    let ssm = model_ss(groups, grand);
    let ssr = residual_ss(&groups.iter().collect::<Vec<_>>())?;
    let (df_m, df_r) = (2 * (k - 1), 2 * (total - k));
    let f = (ssm / df_m as f64) / (ssr / df_r as f64);
    TestResult::from_f(
        StatisticName::Anova2circ,
        f,
        f,
        (df_m, df_r),
        groups.iter().map(|g| g.len()).collect(),
    )
}

/// Repeated-measures ANOVA²circ: unit (subject) means are removed before
/// forming residuals; df = (2(k − 1), 2(N − 1)(k − 1)).
pub fn anova2circ_repeated(groups: &[ComplexSample]) -> Result<TestResult> {
    require_groups(groups, 2)?;
    let groups = align_units(groups)?;
    let k = groups.len();
    let n = groups[0].len();
    if n < 2 {
        return Err(StatsError::TooFewObservations { needed: 2, got: n });
    }
    let grand = grand_mean(&groups);
    let cond_means: Vec<ComplexObservation> =
        groups.iter().map(|g| g.mean().expect("n ≥ 2")).collect();
    let unit_means: Vec<ComplexObservation> = (0..n)
        .map(|i| {
            groups
                .iter()
                .fold(ComplexObservation::ZERO, |acc, g| acc + g.observations()[i])
                * (1.0 / k as f64)
        })
        .collect();
    let ssm = model_ss(&groups, grand);
    let ssr: f64 = groups
        .iter()
        .zip(&cond_means)
        .flat_map(|(g, &cm)| {
            g.observations()
                .iter()
                .zip(&unit_means)
                .map(move |(&x, &um)| (x - cm - um + grand).norm_sqr())
        })
        .sum();
    let raw: f64 = groups
        .iter()
        .flat_map(|g| g.observations())
        .map(|o| o.norm_sqr())
        .sum();
    if ssr <= 1e-24 * raw || ssr == 0.0 {
        return Err(StatsError::ZeroResidualVariance);
    }
    let (df_m, df_r) = (2 * (k - 1), 2 * (n - 1) * (k - 1));
    let f = (ssm / df_m as f64) / (ssr / df_r as f64);
    TestResult::from_f(StatisticName::Anova2circ, f, f, (df_m, df_r), vec![n; k])
}

/// One-way MANOVA on the two components using Wilks' Λ.
///
/// With two response variables Rao's transformation is exact:
/// (1 − √Λ)/√Λ · (N − k − 1)/(k − 1) ~ F(2(k − 1), 2(N − k − 1)).
pub fn manova_oneway(groups: &[ComplexSample]) -> Result<TestResult> {
    require_groups(groups, 2)?;
    for g in groups {
        g.require(1)?;
    }
    let k = groups.len();
    let total: usize = groups.iter().map(|g| g.len()).sum();
    if total < k + 3 {
        return Err(StatsError::TooFewObservations {
            needed: k + 3,
            got: total,
        });
    }
    let grand = grand_mean(groups);
    let mut within = Sym2::default();
    let mut between = Sym2::default();
    for g in groups {
        let m = g.mean().expect("non-empty");
        within = within.add(&Sym2::scatter(g.observations(), m));
        let d = m - grand;
        between = between.add(
            &Sym2::new(d.re * d.re, d.re * d.im, d.im * d.im).scale(g.len() as f64),
        );
    }
    if within.is_degenerate() {
        return Err(StatsError::SingularWithinScatter);
    }
    let lambda = (within.det() / within.add(&between).det()).clamp(0.0, 1.0);
    let root = lambda.sqrt();
    let f = (1.0 - root) / root * (total - k - 1) as f64 / (k - 1) as f64;
    TestResult::from_f(
        StatisticName::ManovaWilks,
        lambda,
        f,
        (2 * (k - 1), 2 * (total - k - 1)),
        groups.iter().map(|g| g.len()).collect(),
    )
}
