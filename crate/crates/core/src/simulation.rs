//! Seeded Monte Carlo harness for power, Type I error and the null
//! behaviour of the condition index.
//!
//! Data for a cell depend only on the seed and the generator settings, so
//! two tests evaluated on the same generator see identical samples. Each
//! replicate draws from its own substream (see [`crate::rng`]); results
//! are bit-identical regardless of thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::quantile_sorted;
use crate::data::{covariance_summary, ComplexObservation, ComplexSample};
use crate::distributions::{ci_pdf, ci_quantile, ConditionIndexDensity};
use crate::error::{Result, StatsError};
use crate::hypothesis::{
    anova2circ_independent, ci_test, manova_oneway, t2_one_sample, t2_two_sample,
    t2circ_one_sample, t2circ_two_sample,
};
use crate::rng::{splitmix64, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// One-sample T² against the origin.
    T2,
    /// One-sample T²circ against the origin.
    T2circ,
    T2TwoSample,
    T2circTwoSample,
    Anova2circ,
    Manova,
    /// Condition-index test on the first group.
    CiTest,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::T2 => "t2",
            TestKind::T2circ => "t2circ",
            TestKind::T2TwoSample => "t2_two_sample",
            TestKind::T2circTwoSample => "t2circ_two_sample",
            TestKind::Anova2circ => "anova2circ",
            TestKind::Manova => "manova",
            TestKind::CiTest => "ci_test",
        }
    }

    fn groups_allowed(self, k: usize) -> bool {
        match self {
            TestKind::T2 | TestKind::T2circ | TestKind::CiTest => k == 1,
            TestKind::T2TwoSample | TestKind::T2circTwoSample => k == 2,
            TestKind::Anova2circ | TestKind::Manova => k >= 2,
        }
    }

    fn min_n(self) -> usize {
        match self {
            TestKind::T2 | TestKind::T2TwoSample | TestKind::CiTest => 3,
            TestKind::T2circ | TestKind::T2circTwoSample | TestKind::Anova2circ => 2,
            TestKind::Manova => 2,
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "t2" => TestKind::T2,
            "t2circ" => TestKind::T2circ,
            "t2_two_sample" => TestKind::T2TwoSample,
            "t2circ_two_sample" => TestKind::T2circTwoSample,
            "anova2circ" => TestKind::Anova2circ,
            "manova" => TestKind::Manova,
            "ci_test" => TestKind::CiTest,
            other => return Err(StatsError::InvalidInput(format!("unknown test '{other}'"))),
        })
    }
}

/// Bivariate normal data generator.
///
/// Standard normal pairs are mapped through the Cholesky factor of
/// `[[1, r·√v], [r·√v, v]]`; the first group is shifted by `d` along the
/// real axis, the others stay centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub d: f64,
    pub r: f64,
    pub variance_ratio: f64,
    pub n: usize,
    pub k: usize,
    /// Replace the last point of the first group with one at this
    /// Mahalanobis distance from the population mean (random direction).
    #[serde(default)]
    pub planted_outlier_distance: Option<f64>,
}

impl Generator {
    pub fn spherical(d: f64, n: usize, k: usize) -> Self {
        Self {
            d,
            r: 0.0,
            variance_ratio: 1.0,
            n,
            k,
            planted_outlier_distance: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(StatsError::InvalidSpec(m));
        if self.n < 2 {
            return bad(format!("n must be ≥ 2, got {}", self.n));
        }
        if self.k < 1 {
            return bad("k must be ≥ 1".into());
        }
        if !(self.r.abs() < 1.0) {
            return bad(format!("|r| must be < 1, got {}", self.r));
        }
        if !(self.variance_ratio > 0.0 && self.variance_ratio.is_finite()) {
            return bad(format!("variance ratio must be > 0, got {}", self.variance_ratio));
        }
        if !self.d.is_finite() {
            return bad("d must be finite".into());
        }
        if let Some(dist) = self.planted_outlier_distance {
            if !(dist >= 0.0 && dist.is_finite()) {
                return bad(format!("outlier distance must be ≥ 0, got {dist}"));
            }
        }
        Ok(())
    }

    // Lower Cholesky factor rows: x = a·z1, y = b·z1 + c·z2.
    fn cholesky(&self) -> (f64, f64, f64) {
        let sv = self.variance_ratio.sqrt();
        (1.0, self.r * sv, sv * (1.0 - self.r * self.r).sqrt())
    }

    fn key(&self) -> u64 {
        [
            self.d.to_bits(),
            self.r.to_bits(),
            self.variance_ratio.to_bits(),
            self.n as u64,
            self.k as u64,
            self.planted_outlier_distance.map_or(u64::MAX, f64::to_bits),
        ]
        .iter()
        .fold(0u64, |h, &x| splitmix64(h ^ x))
    }

    /// Draws the k groups of one replicate.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<ComplexSample> {
        let (a, b, c) = self.cholesky();
        (0..self.k)
            .map(|g| {
                let shift = if g == 0 { self.d } else { 0.0 };
                let mut obs: Vec<ComplexObservation> = (0..self.n)
                    .map(|_| {
                        let z1: f64 = rng.sample(StandardNormal);
                        let z2: f64 = rng.sample(StandardNormal);
                        ComplexObservation::new(a * z1 + shift, b * z1 + c * z2)
                    })
                    .collect();
                if g == 0 {
                    if let Some(dist) = self.planted_outlier_distance {
                        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
                        let (s, co) = angle.sin_cos();
                        let (u1, u2) = (dist * co, dist * s);
                        obs[self.n - 1] = ComplexObservation::new(a * u1 + shift, b * u1 + c * u2);
                    }
                }
                ComplexSample::new(format!("g{g}"), obs).expect("finite draws")
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub generator: Generator,
    pub test: TestKind,
    pub alpha: f64,
    pub n_reps: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(generator: Generator, test: TestKind, n_reps: usize, seed: u64) -> Self {
        Self {
            generator,
            test,
            alpha: 0.05,
            n_reps,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if !self.test.groups_allowed(self.generator.k) {
            return Err(StatsError::InvalidSpec(format!(
                "test {} cannot run on k = {} groups",
                self.test.as_str(),
                self.generator.k
            )));
        }
        let min_n = match (self.test, self.generator.planted_outlier_distance) {
            (_, Some(_)) => self.test.min_n().max(4),
            (t, None) => t.min_n(),
        };
        if self.generator.n < min_n {
            return Err(StatsError::InvalidSpec(format!(
                "test {} needs n ≥ {min_n}",
                self.test.as_str()
            )));
        }
        if self.test == TestKind::Manova && self.generator.n * self.generator.k < self.generator.k + 3 {
            return Err(StatsError::InvalidSpec("MANOVA needs N > k + 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StatsError::InvalidSpec(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.n_reps == 0 {
            return Err(StatsError::InvalidSpec("n_reps must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One row of a [`RateTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCell {
    pub test: TestKind,
    pub d: f64,
    pub n: usize,
    pub r: f64,
    pub variance_ratio: f64,
    pub k: usize,
    pub outlier_distance: Option<f64>,
    pub alpha: f64,
    pub n_reps: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error sqrt(p(1 − p)/n_reps).
    pub se: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub cells: Vec<RateCell>,
}

impl RateTable {
    pub const CSV_HEADER: &'static str =
        "test,d,n,r,variance_ratio,k,outlier_distance,alpha,n_reps,rejections,rate,se";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.test.as_str(),
                c.d,
                c.n,
                c.r,
                c.variance_ratio,
                c.k,
                c.outlier_distance.map(|d| d.to_string()).unwrap_or_default(),
                c.alpha,
                c.n_reps,
                c.rejections,
                c.rate,
                c.se
            ));
        }
        out
    }

    pub fn find(&self, test: TestKind, pred: impl Fn(&RateCell) -> bool) -> Option<&RateCell> {
        self.cells.iter().find(|c| c.test == test && pred(c))
    }
}

fn rejects(test: TestKind, groups: &[ComplexSample], alpha: f64) -> bool {
    let origin = ComplexObservation::ZERO;
    let result = match test {
        TestKind::T2 => t2_one_sample(&groups[0], origin),
        TestKind::T2circ => t2circ_one_sample(&groups[0], origin),
        TestKind::T2TwoSample => t2_two_sample(&groups[0], &groups[1]),
        TestKind::T2circTwoSample => t2circ_two_sample(&groups[0], &groups[1]),
        TestKind::Anova2circ => anova2circ_independent(groups),
        TestKind::Manova => manova_oneway(groups),
        TestKind::CiTest => ci_test(&groups[0]),
    };
    // degenerate draws have probability zero; count them as non-rejections
    result.map(|r| r.p_value < alpha).unwrap_or(false)
}

/// Rejection rate of one spec.
pub fn simulate_cell(spec: &SimulationSpec) -> Result<RateCell> {
    spec.validate()?;
    let g = spec.generator;
    let key = g.key();
    let rejections = (0..spec.n_reps as u64)
        .into_par_iter()
        .filter(|&rep| {
            let mut rng = substream(spec.seed, key, rep);
            rejects(spec.test, &g.draw(&mut rng), spec.alpha)
        })
        .count();
    let rate = rejections as f64 / spec.n_reps as f64;
    Ok(RateCell {
        test: spec.test,
        d: g.d,
        n: g.n,
        r: g.r,
        variance_ratio: g.variance_ratio,
        k: g.k,
        outlier_distance: g.planted_outlier_distance,
        alpha: spec.alpha,
        n_reps: spec.n_reps,
        rejections,
        rate,
        se: (rate * (1.0 - rate) / spec.n_reps as f64).sqrt(),
    })
}

pub fn simulate_rates(spec: &SimulationSpec) -> Result<RateTable> {
    Ok(RateTable {
        cells: vec![simulate_cell(spec)?],
    })
}

pub fn simulate_grid(specs: &[SimulationSpec]) -> Result<RateTable> {
    Ok(RateTable {
        cells: specs.iter().map(simulate_cell).collect::<Result<_>>()?,
    })
}

/// Sorted sample from a simulated distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { sorted: values }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }

    /// Fraction of values ≤ x.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

/// Condition indices of `n_reps` spherical null samples of size `n`.
pub fn simulate_ci_distribution(n: usize, n_reps: usize, seed: u64) -> Result<EmpiricalDistribution> {
    if n < 3 {
        return Err(StatsError::InvalidSpec(format!("n must be ≥ 3, got {n}")));
    }
    if n_reps == 0 {
        return Err(StatsError::InvalidSpec("n_reps must be ≥ 1".into()));
    }
    let g = Generator::spherical(0.0, n, 1);
    let key = g.key();
    let values: Vec<f64> = (0..n_reps as u64)
        .into_par_iter()
        .filter_map(|rep| {
            let mut rng = substream(seed, key, rep);
            covariance_summary(&g.draw(&mut rng)[0])
                .ok()
                .and_then(|s| s.condition_index)
        })
        .collect();
    Ok(EmpiricalDistribution::from_values(values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSkew {
    pub d: f64,
    pub amplitudes: Vec<f64>,
    pub skewness: f64,
}

/// Sample skewness m₃ / m₂^{3/2}.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(m2, m3), &v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    (m3 / n) / (m2 / n).powf(1.5)
}

/// Amplitudes of unit-variance isotropic draws centred at (d, 0).
pub fn simulate_amplitude_skew(d: f64, n_reps: usize, seed: u64) -> Result<AmplitudeSkew> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(StatsError::InvalidSpec(format!("d must be ≥ 0, got {d}")));
    }
    if n_reps < 3 {
        return Err(StatsError::InvalidSpec("n_reps must be ≥ 3".into()));
    }
    let key = Generator::spherical(d, 1, 1).key();
    let amplitudes: Vec<f64> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, key, rep);
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            (x + d).hypot(y)
        })
        .collect();
    Ok(AmplitudeSkew {
        d,
        skewness: skewness(&amplitudes),
        amplitudes,
    })
}

/// Proportion of significant condition-index tests with one planted
/// outlier at Mahalanobis distance `outlier_d`.
pub fn simulate_outlier_effect(
    n: usize,
    outlier_d: f64,
    n_reps: usize,
    seed: u64,
    alpha: f64,
) -> Result<RateCell> {
    let generator = Generator {
        planted_outlier_distance: Some(outlier_d),
        ..Generator::spherical(0.0, n, 1)
    };
    simulate_cell(&SimulationSpec {
        generator,
        test: TestKind::CiTest,
        alpha,
        n_reps,
        seed,
    })
}

/// Empirical and theoretical condition-index thresholds at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiThresholdRow {
    pub n: usize,
    pub level: f64,
    pub empirical: f64,
    pub modified: f64,
    pub edelman: f64,
}

pub fn ci_thresholds(ns: &[usize], level: f64, n_reps: usize, seed: u64) -> Result<Vec<CiThresholdRow>> {
    ns.iter()
        .map(|&n| {
            let emp = simulate_ci_distribution(n, n_reps, seed)?;
            Ok(CiThresholdRow {
                n,
                level,
                empirical: emp.quantile(level),
                modified: ci_quantile(level, ConditionIndexDensity::modified(n as u32)?)?,
                edelman: ci_quantile(level, ConditionIndexDensity::edelman(n as u32)?)?,
            })
        })
        .collect()
}

/// Histogram of simulated condition indices next to both densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiDensityRow {
    pub x: f64,
    pub empirical: f64,
    pub modified: f64,
    pub edelman: f64,
}

pub fn ci_density_panel(
    n: usize,
    n_reps: usize,
    seed: u64,
    bins: usize,
    x_max: f64,
) -> Result<Vec<CiDensityRow>> {
    if bins == 0 || !(x_max > 1.0) {
        return Err(StatsError::InvalidSpec("need bins ≥ 1 and x_max > 1".into()));
    }
    let emp = simulate_ci_distribution(n, n_reps, seed)?;
    let width = (x_max - 1.0) / bins as f64;
    let total = emp.sorted.len() as f64;
    let modified = ConditionIndexDensity::modified(n as u32)?;
    let edelman = ConditionIndexDensity::edelman(n as u32)?;
    (0..bins)
        .map(|b| {
            let lo = 1.0 + b as f64 * width;
            let hi = lo + width;
            let count = emp.sorted.partition_point(|&v| v < hi) - emp.sorted.partition_point(|&v| v < lo);
            let x = lo + width / 2.0;
            Ok(CiDensityRow {
                x,
                empirical: count as f64 / (total * width),
                modified: ci_pdf(x, modified)?,
                edelman: ci_pdf(x, edelman)?,
            })
        })
        .collect()
}

/// Desk-scale grids behind the published simulation figures.
pub mod figures {
    use super::*;

    pub const SAMPLE_SIZES: [usize; 5] = [4, 8, 16, 32, 64];
    pub const EFFECT_SIZES: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
    pub const CORRELATIONS: [f64; 7] = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9];
    pub const VARIANCE_RATIOS: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    pub const OUTLIER_DISTANCES: [f64; 7] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    pub const OUTLIER_SAMPLE_SIZES: [usize; 3] = [8, 16, 32];

    fn power_grid(tests: [TestKind; 2], k: usize, reps: usize, seed: u64) -> Vec<SimulationSpec> {
        let mut specs = Vec::new();
        for &n in &SAMPLE_SIZES {
            for &d in &EFFECT_SIZES {
                for test in tests {
                    specs.push(SimulationSpec::new(Generator::spherical(d, n, k), test, reps, seed));
                }
            }
        }
        specs
    }

    /// Power of one-sample T² and T²circ over (N, d).
    pub fn power_one_sample(reps: usize, seed: u64) -> Vec<SimulationSpec> {
        power_grid([TestKind::T2, TestKind::T2circ], 1, reps, seed)
    }

    /// Power of MANOVA and ANOVA²circ, three groups, signal in one.
    pub fn power_three_groups(reps: usize, seed: u64) -> Vec<SimulationSpec> {
        power_grid([TestKind::Manova, TestKind::Anova2circ], 3, reps, seed)
    }

    fn null_sweep(
        values: &[f64],
        make: impl Fn(f64) -> Generator,
        reps: usize,
        seed: u64,
    ) -> Vec<SimulationSpec> {
        values
            .iter()
            .flat_map(|&v| {
                [TestKind::T2, TestKind::T2circ]
                    .map(|t| SimulationSpec::new(make(v), t, reps, seed))
            })
            .collect()
    }

    /// Type I error against the correlation between components, N = 10.
    pub fn type1_correlation(reps: usize, seed: u64) -> Vec<SimulationSpec> {
        null_sweep(
            &CORRELATIONS,
            |r| Generator {
                r,
                ..Generator::spherical(0.0, 10, 1)
            },
            reps,
            seed,
        )
    }

    /// Type I error against the ratio of component variances, N = 10.
    pub fn type1_variance_ratio(reps: usize, seed: u64) -> Vec<SimulationSpec> {
        null_sweep(
            &VARIANCE_RATIOS,
            |v| Generator {
                variance_ratio: v,
                ..Generator::spherical(0.0, 10, 1)
            },
            reps,
            seed,
        )
    }

    /// Condition-index test rate against the distance of one outlier.
    pub fn outlier_sensitivity(reps: usize, seed: u64) -> Vec<SimulationSpec> {
        let mut specs = Vec::new();
        for &n in &OUTLIER_SAMPLE_SIZES {
            for &dist in &OUTLIER_DISTANCES {
                let generator = Generator {
                    planted_outlier_distance: Some(dist),
                    ..Generator::spherical(0.0, n, 1)
                };
                specs.push(SimulationSpec::new(generator, TestKind::CiTest, reps, seed));
            }
        }
        specs
    }
}
