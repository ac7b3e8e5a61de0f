use periodic_stats::amplitude::amp_ci_bootstrap;
use periodic_stats::rng::substream;
use periodic_stats::simulation::{
    figures, simulate_amplitude_skew, simulate_cell, simulate_ci_distribution, simulate_grid,
    simulate_outlier_effect, Generator, RateTable, SimulationSpec, TestKind,
};
use periodic_stats::{ComplexObservation, ComplexSample};
use rand::Rng;
use rand_distr::StandardNormal;

fn within_se(rate: f64, target: f64, reps: usize, k: f64) -> bool {
    (rate - target).abs() <= k * (target * (1.0 - target) / reps as f64).sqrt()
}

#[test]
fn null_cells_are_calibrated() {
    let reps = 4000;
    for (test, k) in [
        (TestKind::T2, 1),
        (TestKind::T2circ, 1),
        (TestKind::T2TwoSample, 2),
        (TestKind::T2circTwoSample, 2),
        (TestKind::Anova2circ, 3),
        (TestKind::Manova, 3),
        (TestKind::CiTest, 1),
    ] {
        let spec = SimulationSpec::new(Generator::spherical(0.0, 10, k), test, reps, 5);
        let cell = simulate_cell(&spec).unwrap();
        assert!(within_se(cell.rate, 0.05, reps, 3.5), "{:?}: {}", test, cell.rate);
        assert!((cell.se - (cell.rate * (1.0 - cell.rate) / reps as f64).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn effect_direction_does_not_matter() {
    // shifting along the imaginary axis instead: rotate every draw by 90°
    let reps = 3000;
    let g = Generator::spherical(0.8, 8, 1);
    let along_re = simulate_cell(&SimulationSpec::new(g, TestKind::T2circ, reps, 9)).unwrap();
    let mut hits = 0;
    for rep in 0..reps as u64 {
        let mut rng = substream(77, 1, rep);
        let s = g.draw(&mut rng).remove(0).map(|o| o.rotate(std::f64::consts::FRAC_PI_2));
        let r = periodic_stats::hypothesis::t2circ_one_sample(&s, ComplexObservation::ZERO).unwrap();
        hits += (r.p_value < 0.05) as usize;
    }
    let along_im = hits as f64 / reps as f64;
    let se = (along_re.rate * (1.0 - along_re.rate) / reps as f64).sqrt();
    assert!((along_re.rate - along_im).abs() < 4.0 * se * 2f64.sqrt());
}

#[test]
fn same_generator_shares_data_across_tests() {
    let g = Generator::spherical(40.0, 6, 1);
    let specs = [TestKind::T2, TestKind::T2circ].map(|t| SimulationSpec::new(g, t, 200, 3));
    let table = simulate_grid(&specs).unwrap();
    assert_eq!(table.cells.len(), 2);
    assert!(table.cells.iter().all(|c| c.rate == 1.0));
}

#[test]
fn rate_table_csv_layout() {
    let spec = SimulationSpec::new(Generator::spherical(0.5, 8, 1), TestKind::T2, 100, 1);
    let t = simulate_grid(&[spec]).unwrap();
    let csv = t.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(RateTable::CSV_HEADER));
    assert!(lines.next().unwrap().starts_with("t2,0.5,8,0,1,1,,0.05,100,"));
    let json = serde_json::to_string(&t).unwrap();
    assert_eq!(serde_json::from_str::<RateTable>(&json).unwrap(), t);
}

#[test]
fn condition_index_samples_are_at_least_one() {
    let d = simulate_ci_distribution(5, 5000, 2).unwrap();
    assert_eq!(d.sorted.len(), 5000);
    assert!(d.sorted[0] >= 1.0);
    assert!(d.cdf(d.quantile(0.5)) >= 0.5);
}

#[test]
fn rayleigh_skew_and_approach_to_normality() {
    let rayleigh = 2.0 * std::f64::consts::PI.sqrt() * (std::f64::consts::PI - 3.0)
        / (4.0 - std::f64::consts::PI).powf(1.5);
    let s0 = simulate_amplitude_skew(0.0, 100_000, 4).unwrap();
    assert!((s0.skewness - rayleigh).abs() < 0.05, "{}", s0.skewness);
    assert!(s0.amplitudes.iter().all(|&a| a >= 0.0));
    let s4 = simulate_amplitude_skew(4.0, 100_000, 4).unwrap();
    assert!(s4.skewness.abs() < 0.05, "{}", s4.skewness);
    assert!(simulate_amplitude_skew(-1.0, 10, 1).is_err());
}

#[test]
fn outlier_effect_null_and_large() {
    let reps = 4000;
    let null = simulate_outlier_effect(16, 0.0, reps, 8, 0.05).unwrap();
    assert!((null.rate - 0.05).abs() < 0.015, "{}", null.rate);
    for n in figures::OUTLIER_SAMPLE_SIZES {
        let big = simulate_outlier_effect(n, 5.0, reps, 8, 0.05).unwrap();
        assert!(big.rate > 0.05 + 3.0 * big.se, "n = {n}: {}", big.rate);
    }
}

#[test]
fn bootstrap_half_width_tracks_standard_error() {
    // N = 50 isotropic unit-variance draws around (3, 0): σ/√N per axis
    let mut ratios = Vec::new();
    for rep in 0..20u64 {
        let mut rng = substream(31, 0, rep);
        let obs: Vec<ComplexObservation> = (0..50)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                ComplexObservation::new(3.0 + x, y)
            })
            .collect();
        let s = ComplexSample::new("a", obs).unwrap();
        let b = amp_ci_bootstrap(&s, 0.68, 4000, rep).unwrap();
        ratios.push((b.error_high - b.error_low) / 2.0 / (1.0 / 50f64.sqrt()));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 1.0).abs() < 0.15, "{mean}");
}

#[test]
fn figure_grids_are_valid() {
    for specs in [
        figures::power_one_sample(10, 1),
        figures::power_three_groups(10, 1),
        figures::type1_correlation(10, 1),
        figures::type1_variance_ratio(10, 1),
        figures::outlier_sensitivity(10, 1),
    ] {
        assert!(!specs.is_empty());
        for s in &specs {
            s.validate().unwrap();
        }
    }
}
