//! Multivariate statistics for complex Fourier components of
//! steady-state (periodic) responses.
//!
//! The crate covers one- and two-sample Hotelling's T² and T²circ, the
//! condition-index test of T²circ's sphericity assumption, ANOVA²circ for
//! one-way designs (independent and repeated measures), a one-way MANOVA
//! fallback, Mahalanobis outlier screening and effect sizes, permutation
//! cluster correction, amplitude error bars and a seeded Monte Carlo
//! harness for power and calibration studies.

pub mod amplitude;
pub mod cluster;
pub mod data;
pub mod dft;
pub mod distributions;
pub mod error;
pub mod hypothesis;
pub mod ingest;
pub mod outliers;
mod quadrature;
pub mod report;
pub mod rng;
pub mod simulation;

pub use data::{
    coherent_mean, covariance_summary, ComplexObservation, ComplexSample, CovarianceSummary,
    Design, GroupedDataset,
};
pub use error::{Result, StatsError};
pub use hypothesis::{StatisticName, TestResult};
