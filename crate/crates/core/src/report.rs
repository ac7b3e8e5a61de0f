//! The analysis decision flowchart and the full-analysis report.
//!
//! Every condition's scatter is first checked with the condition-index
//! test. If none is significant the circular statistics are used
//! (T²circ, ANOVA²circ); otherwise the covariance-aware ones (T², MANOVA).
//! Significant multi-group results are followed by Bonferroni-corrected
//! pairwise tests.

use serde::{Deserialize, Serialize};

use crate::amplitude::{amp_ci_bootstrap, amp_errors_ellipse, AmplitudeSummary};
use crate::data::{covariance_summary, ComplexObservation, CovarianceSummary, Design, GroupedDataset};
use crate::error::{Result, StatsError};
use crate::hypothesis::{
    anova2circ_independent, anova2circ_repeated, ci_test, manova_oneway, t2_one_sample, t2_paired,
    t2_two_sample, t2circ_one_sample, t2circ_paired, t2circ_two_sample, TestResult,
};
use crate::outliers::{exclude_outliers, ScreeningReport, DEFAULT_THRESHOLD};
use crate::rng::splitmix64;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Terminal node of the decision flowchart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowLeaf {
    OneSampleT2circ,
    OneSampleT2,
    TwoSampleT2circ,
    TwoSampleT2,
    PairedT2circ,
    PairedT2,
    Anova2circIndependent,
    Anova2circRepeated,
    Manova,
    /// Repeated-measures design with a non-spherical condition: one-way
    /// MANOVA treating conditions as independent groups.
    ManovaRepeatedFallback,
}

impl FlowLeaf {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowLeaf::OneSampleT2circ => "one_sample_t2circ",
            FlowLeaf::OneSampleT2 => "one_sample_t2",
            FlowLeaf::TwoSampleT2circ => "two_sample_t2circ",
            FlowLeaf::TwoSampleT2 => "two_sample_t2",
            FlowLeaf::PairedT2circ => "paired_t2circ",
            FlowLeaf::PairedT2 => "paired_t2",
            FlowLeaf::Anova2circIndependent => "anova2circ_independent",
            FlowLeaf::Anova2circRepeated => "anova2circ_repeated",
            FlowLeaf::Manova => "manova",
            FlowLeaf::ManovaRepeatedFallback => "manova_repeated_fallback",
        }
    }

    pub fn is_circular(self) -> bool {
        matches!(
            self,
            FlowLeaf::OneSampleT2circ
                | FlowLeaf::TwoSampleT2circ
                | FlowLeaf::PairedT2circ
                | FlowLeaf::Anova2circIndependent
                | FlowLeaf::Anova2circRepeated
        )
    }
}

/// Branch choice: a pure function of the design and the per-condition
/// condition-index p-values.
pub fn choose_leaf(design: Design, ci_p_values: &[f64], alpha: f64) -> FlowLeaf {
    let spherical = ci_p_values.iter().all(|&p| p >= alpha);
    match (design, spherical) {
        (Design::OneSample, true) => FlowLeaf::OneSampleT2circ,
        (Design::OneSample, false) => FlowLeaf::OneSampleT2,
        (Design::TwoSampleIndependent, true) => FlowLeaf::TwoSampleT2circ,
        (Design::TwoSampleIndependent, false) => FlowLeaf::TwoSampleT2,
        (Design::Paired, true) => FlowLeaf::PairedT2circ,
        (Design::Paired, false) => FlowLeaf::PairedT2,
        (Design::OnewayIndependent, true) => FlowLeaf::Anova2circIndependent,
        (Design::OnewayIndependent, false) => FlowLeaf::Manova,
        (Design::OnewayRepeated, true) => FlowLeaf::Anova2circRepeated,
        (Design::OnewayRepeated, false) => FlowLeaf::ManovaRepeatedFallback,
    }
}

/// Which pairs of conditions the post-hoc stage compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostHocScheme {
    /// Every condition against the first one.
    Baseline,
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub alpha: f64,
    pub screen_outliers: bool,
    pub threshold: f64,
    pub seed: u64,
    pub post_hoc: PostHocScheme,
    /// Coverage of the amplitude error bars (0.68 ≈ one standard error).
    pub amplitude_level: f64,
    pub n_boot: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            screen_outliers: true,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            post_hoc: PostHocScheme::Baseline,
            amplitude_level: 0.68,
            n_boot: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub label: String,
    pub n: usize,
    pub covariance: CovarianceSummary,
    pub ci_test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flowchart {
    pub leaf: FlowLeaf,
    pub rationale: String,
    /// Conditions whose condition-index test was significant.
    pub non_spherical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub condition_a: String,
    pub condition_b: String,
    pub result: TestResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostHoc {
    pub scheme: PostHocScheme,
    /// Number of comparisons m.
    pub m: usize,
    /// Bonferroni-adjusted level α/m.
    pub alpha_adjusted: f64,
    pub comparisons: Vec<PairwiseResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAmplitude {
    pub label: String,
    pub ellipse: Option<AmplitudeSummary>,
    pub bootstrap: AmplitudeSummary,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the input bytes, hex encoded.
    pub input_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub design: Design,
    pub alpha: f64,
    pub mu: ComplexObservation,
    pub screening: Option<ScreeningReport>,
    pub conditions: Vec<ConditionSummary>,
    pub flowchart: Flowchart,
    pub main_test: TestResult,
    pub post_hoc: Option<PostHoc>,
    pub amplitudes: Vec<ConditionAmplitude>,
    pub provenance: Provenance,
}

fn rationale(leaf: FlowLeaf, non_spherical: &[String], k: usize) -> String {
    let ci = if non_spherical.is_empty() {
        format!("condition-index test non-significant for all {k} condition(s)")
    } else {
        format!(
            "condition-index test significant for {}",
            non_spherical.join(", ")
        )
    };
    let test = match leaf {
        FlowLeaf::OneSampleT2circ => "one-sample T2circ",
        FlowLeaf::OneSampleT2 => "one-sample Hotelling T2",
        FlowLeaf::TwoSampleT2circ => "two-sample T2circ",
        FlowLeaf::TwoSampleT2 => "two-sample Hotelling T2",
        FlowLeaf::PairedT2circ => "paired T2circ",
        FlowLeaf::PairedT2 => "paired Hotelling T2",
        FlowLeaf::Anova2circIndependent => "independent-groups ANOVA2circ",
        FlowLeaf::Anova2circRepeated => "repeated-measures ANOVA2circ",
        FlowLeaf::Manova => "one-way MANOVA (Wilks)",
        FlowLeaf::ManovaRepeatedFallback => {
            "one-way MANOVA (Wilks) treating conditions as independent groups; \
             no repeated-measures MANOVA is available, so the within-unit \
             pairing is ignored"
        }
    };
    format!("{ci} -> {test} [{}]", leaf.as_str())
}

fn main_test(leaf: FlowLeaf, ds: &GroupedDataset) -> Result<TestResult> {
    let s = ds.samples();
    match leaf {
        FlowLeaf::OneSampleT2circ => t2circ_one_sample(&s[0], ds.mu()),
        FlowLeaf::OneSampleT2 => t2_one_sample(&s[0], ds.mu()),
        FlowLeaf::TwoSampleT2circ => t2circ_two_sample(&s[0], &s[1]),
        FlowLeaf::TwoSampleT2 => t2_two_sample(&s[0], &s[1]),
        FlowLeaf::PairedT2circ => t2circ_paired(&s[0], &s[1]),
        FlowLeaf::PairedT2 => t2_paired(&s[0], &s[1]),
        FlowLeaf::Anova2circIndependent => anova2circ_independent(s),
        FlowLeaf::Anova2circRepeated => anova2circ_repeated(s),
        FlowLeaf::Manova | FlowLeaf::ManovaRepeatedFallback => manova_oneway(s),
    }
}

fn post_hoc(
    leaf: FlowLeaf,
    ds: &GroupedDataset,
    alpha: f64,
    scheme: PostHocScheme,
) -> Result<PostHoc> {
    let k = ds.k();
    let pairs: Vec<(usize, usize)> = match scheme {
        PostHocScheme::Baseline => (1..k).map(|j| (0, j)).collect(),
        PostHocScheme::AllPairs => (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .collect(),
    };
    let m = pairs.len();
    let alpha_adjusted = alpha / m as f64;
    let within = ds.design().is_within_units();
    let s = ds.samples();
    let comparisons = pairs
        .into_iter()
        .map(|(i, j)| {
            // the contrast is reported as condition j relative to condition i
            let (a, b) = (&s[j], &s[i]);
            let result = match (leaf.is_circular(), within) {
                (true, true) => t2circ_paired(a, b),
                (true, false) => t2circ_two_sample(a, b),
                (false, true) => t2_paired(a, b),
                (false, false) => t2_two_sample(a, b),
            }?;
            Ok(PairwiseResult {
                condition_a: s[i].condition_label().to_string(),
                condition_b: s[j].condition_label().to_string(),
                significant: result.p_value < alpha_adjusted,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PostHoc {
        scheme,
        m,
        alpha_adjusted,
        comparisons,
    })
}

fn amplitudes(ds: &GroupedDataset, opts: &AnalysisOptions) -> Result<Vec<ConditionAmplitude>> {
    ds.samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut notes = Vec::new();
            let ellipse = match amp_errors_ellipse(s, opts.amplitude_level) {
                Ok(e) => Some(e),
                Err(e) => {
                    notes.push(format!("ellipse error bars unavailable: {e}"));
                    None
                }
            };
            let seed = splitmix64(opts.seed ^ splitmix64(i as u64 + 1));
            let bootstrap = amp_ci_bootstrap(s, opts.amplitude_level, opts.n_boot, seed)?;
            Ok(ConditionAmplitude {
                label: s.condition_label().to_string(),
                ellipse,
                bootstrap,
                notes,
            })
        })
        .collect()
}

fn check_options(opts: &AnalysisOptions) -> Result<()> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(StatsError::Domain(format!("alpha must be in (0, 1), got {}", opts.alpha)));
    }
    if !(opts.amplitude_level > 0.0 && opts.amplitude_level < 1.0) {
        return Err(StatsError::Domain(format!(
            "amplitude level must be in (0, 1), got {}",
            opts.amplitude_level
        )));
    }
    if opts.n_boot == 0 {
        return Err(StatsError::Domain("n_boot must be ≥ 1".into()));
    }
    Ok(())
}

/// Runs the decision flowchart on an already screened dataset.
pub fn run_flowchart(
    dataset: &GroupedDataset,
    opts: &AnalysisOptions,
    input_hash: impl Into<String>,
) -> Result<AnalysisReport> {
    check_options(opts)?;
    let mut conditions = Vec::with_capacity(dataset.k());
    for s in dataset.samples() {
        conditions.push(ConditionSummary {
            label: s.condition_label().to_string(),
            n: s.len(),
            covariance: covariance_summary(s)?,
            ci_test: ci_test(s)?,
        });
    }
    let p: Vec<f64> = conditions.iter().map(|c| c.ci_test.p_value).collect();
    let leaf = choose_leaf(dataset.design(), &p, opts.alpha);
    let non_spherical: Vec<String> = conditions
        .iter()
        .filter(|c| c.ci_test.p_value < opts.alpha)
        .map(|c| c.label.clone())
        .collect();
    let main = main_test(leaf, dataset)?;
    let multi = matches!(
        dataset.design(),
        Design::OnewayIndependent | Design::OnewayRepeated
    );
    let post = if multi && main.p_value < opts.alpha {
        Some(post_hoc(leaf, dataset, opts.alpha, opts.post_hoc)?)
    } else {
        None
    };
    Ok(AnalysisReport {
        design: dataset.design(),
        alpha: opts.alpha,
        mu: dataset.mu(),
        screening: None,
        conditions,
        flowchart: Flowchart {
            rationale: rationale(leaf, &non_spherical, dataset.k()),
            leaf,
            non_spherical,
        },
        main_test: main,
        post_hoc: post,
        amplitudes: amplitudes(dataset, opts)?,
        provenance: Provenance {
            input_hash: input_hash.into(),
            seed: opts.seed,
            tool_version: TOOL_VERSION.to_string(),
        },
    })
}

/// Outlier screening (unless disabled) followed by the flowchart.
pub fn analyze(
    dataset: &GroupedDataset,
    opts: &AnalysisOptions,
    input_hash: impl Into<String>,
) -> Result<AnalysisReport> {
    if !opts.screen_outliers {
        return run_flowchart(dataset, opts, input_hash);
    }
    let (reduced, screening) = exclude_outliers(dataset, opts.threshold)?;
    let mut report = run_flowchart(&reduced, opts, input_hash)?;
    report.screening = Some(screening);
    Ok(report)
}

fn fmt_test(r: &TestResult) -> String {
    let mut s = format!("{} = {:.4}", r.statistic_name.as_str(), r.statistic);
    if let (Some(f), Some((d1, d2))) = (r.f_value, r.df) {
        s.push_str(&format!(", F({d1},{d2}) = {f:.4}"));
    }
    s.push_str(&format!(", p = {:.4e}", r.p_value));
    if let Some(d) = r.effect_size {
        s.push_str(&format!(", D = {d:.4}"));
    }
    s
}

/// Plain-text rendering of a report.
pub fn render_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("design: {}\nalpha: {}\n", r.design.as_str(), r.alpha));
    if let Some(s) = &r.screening {
        out.push_str(&format!(
            "outlier screening (D > {}): {} observation(s) removed",
            s.threshold, s.observations_removed
        ));
        if !s.excluded_units.is_empty() {
            out.push_str(&format!(", units excluded: {}", s.excluded_units.join(", ")));
        }
        out.push('\n');
        for w in &s.warnings {
            out.push_str(&format!("  warning: {w}\n"));
        }
    }
    out.push_str("conditions:\n");
    for c in &r.conditions {
        out.push_str(&format!(
            "  {} (N = {}): mean = ({:.4}, {:.4}), CI = {:.4}, CI test p = {:.4}\n",
            c.label,
            c.n,
            c.covariance.mean.re,
            c.covariance.mean.im,
            c.ci_test.statistic,
            c.ci_test.p_value
        ));
    }
    out.push_str(&format!("flowchart: {}\n", r.flowchart.rationale));
    out.push_str(&format!("main test: {}\n", fmt_test(&r.main_test)));
    if let Some(ph) = &r.post_hoc {
        out.push_str(&format!(
            "post-hoc ({} comparisons, Bonferroni alpha = {}/{} = {:.6}):\n",
            ph.m, r.alpha, ph.m, ph.alpha_adjusted
        ));
        for c in &ph.comparisons {
            out.push_str(&format!(
                "  {} vs {}: {}{}\n",
                c.condition_b,
                c.condition_a,
                fmt_test(&c.result),
                if c.significant { " *" } else { "" }
            ));
        }
    }
    out.push_str(&format!("amplitudes (level {}):\n", r.amplitudes.first().map_or(0.0, |a| a.bootstrap.level)));
    for a in &r.amplitudes {
        let ellipse = a.ellipse.as_ref().map_or("n/a".to_string(), |e| {
            format!("[{:.4}, {:.4}]", e.error_low, e.error_high)
        });
        out.push_str(&format!(
            "  {}: |mean| = {:.4}, phase = {:.4} rad, ellipse {}, bootstrap [{:.4}, {:.4}]\n",
            a.label,
            a.bootstrap.mean_amplitude,
            a.bootstrap.mean_phase,
            ellipse,
            a.bootstrap.error_low,
            a.bootstrap.error_high
        ));
    }
    out.push_str(&format!(
        "provenance: sha256 {}, seed {}, version {}\n",
        r.provenance.input_hash, r.provenance.seed, r.provenance.tool_version
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ComplexSample;

    #[test]
    fn leaf_choice() {
        assert_eq!(choose_leaf(Design::Paired, &[0.6, 0.5], 0.05), FlowLeaf::PairedT2circ);
        assert_eq!(choose_leaf(Design::Paired, &[0.6, 0.01], 0.05), FlowLeaf::PairedT2);
        assert_eq!(
            choose_leaf(Design::OnewayRepeated, &[0.2; 7], 0.05),
            FlowLeaf::Anova2circRepeated
        );
        assert_eq!(choose_leaf(Design::OnewayIndependent, &[0.2, 0.04, 0.3], 0.05), FlowLeaf::Manova);
    }

    fn ring(label: &str, centre: (f64, f64), n: usize, squash: f64) -> ComplexSample {
        let obs = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * (i as f64 + 0.3) / n as f64;
                ComplexObservation::new(centre.0 + t.cos(), centre.1 + squash * t.sin())
            })
            .collect();
        ComplexSample::with_units(label, obs, (0..n).map(|i| format!("s{i}")).collect()).unwrap()
    }

    #[test]
    fn oneway_with_post_hoc() {
        let ds = GroupedDataset::new(
            vec![
                ring("c0", (0.0, 0.0), 9, 1.0),
                ring("c1", (0.1, 0.0), 9, 1.0),
                ring("c2", (3.0, 0.0), 9, 1.0),
            ],
            Design::OnewayIndependent,
        )
        .unwrap();
        let opts = AnalysisOptions {
            n_boot: 200,
            ..AnalysisOptions::default()
        };
        let r = analyze(&ds, &opts, "x").unwrap();
        assert_eq!(r.flowchart.leaf, FlowLeaf::Anova2circIndependent);
        let ph = r.post_hoc.as_ref().unwrap();
        assert_eq!(ph.m, 2);
        assert_eq!(ph.alpha_adjusted, 0.025);
        assert!(!ph.comparisons[0].significant);
        assert!(ph.comparisons[1].significant);
        assert!(render_text(&r).contains("anova2circ_independent"));
    }

    #[test]
    fn elongated_condition_switches_branch() {
        let ds = GroupedDataset::new(
            vec![ring("a", (1.0, 1.0), 12, 0.05)],
            Design::OneSample,
        )
        .unwrap();
        let opts = AnalysisOptions {
            n_boot: 50,
            ..AnalysisOptions::default()
        };
        let r = run_flowchart(&ds, &opts, "x").unwrap();
        assert_eq!(r.flowchart.leaf, FlowLeaf::OneSampleT2);
        assert_eq!(r.flowchart.non_spherical, vec!["a".to_string()]);
    }

    #[test]
    fn bad_options() {
        let ds = GroupedDataset::new(vec![ring("a", (1.0, 1.0), 6, 1.0)], Design::OneSample).unwrap();
        let opts = AnalysisOptions {
            alpha: 1.5,
            ..AnalysisOptions::default()
        };
        assert!(matches!(run_flowchart(&ds, &opts, ""), Err(StatsError::Domain(_))));
    }
}
