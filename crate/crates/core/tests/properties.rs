use periodic_stats::amplitude::amp_errors_ellipse;
use periodic_stats::hypothesis::{
    anova2circ_independent, anova2circ_repeated, ci_test, manova_oneway, t2_one_sample, t2_paired,
    t2_two_sample, t2circ_one_sample, t2circ_paired, t2circ_two_sample,
};
use periodic_stats::outliers::mahalanobis_distances;
use periodic_stats::{covariance_summary, ComplexObservation, ComplexSample};
use proptest::prelude::*;

fn points(min: usize, max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), min..max)
}

fn sample(label: &str, pts: &[(f64, f64)]) -> ComplexSample {
    ComplexSample::from_pairs(label, pts).unwrap()
}

fn labelled(label: &str, pts: &[(f64, f64)]) -> ComplexSample {
    ComplexSample::with_units(
        label,
        pts.iter().map(|&(r, i)| ComplexObservation::new(r, i)).collect(),
        (0..pts.len()).map(|i| format!("u{i}")).collect(),
    )
    .unwrap()
}

fn well_conditioned(s: &ComplexSample) -> bool {
    covariance_summary(s)
        .ok()
        .and_then(|c| c.condition_index)
        .is_some_and(|ci| ci < 1e3)
}

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn one_sample_df_and_f_identity(pts in points(3, 40)) {
        let s = sample("a", &pts);
        prop_assume!(well_conditioned(&s));
        let n = pts.len();
        let t = t2_one_sample(&s, ComplexObservation::ZERO).unwrap();
        prop_assert_eq!(t.df, Some((2, n as u32 - 2)));
        let c = t2circ_one_sample(&s, ComplexObservation::ZERO).unwrap();
        prop_assert_eq!(c.df, Some((2, 2 * n as u32 - 2)));
        prop_assert!(rel_eq(c.f_value.unwrap(), n as f64 * c.statistic, 1e-12));
        prop_assert!((0.0..=1.0).contains(&t.p_value) && (0.0..=1.0).contains(&c.p_value));
    }

    #[test]
    fn paired_f_identity(a in points(4, 20), shift in (-3.0..3.0f64, -3.0..3.0f64)) {
        let b: Vec<(f64, f64)> = a.iter().rev().map(|&(x, y)| (x * 0.5 + shift.0, y - shift.1)).collect();
        let (sa, sb) = (labelled("a", &a), labelled("b", &b));
        let n = a.len();
        if let Ok(r) = t2circ_paired(&sa, &sb) {
            prop_assert_eq!(r.df, Some((2, 2 * n as u32 - 2)));
            prop_assert!(rel_eq(r.f_value.unwrap(), n as f64 * r.statistic, 1e-12));
        }
        if let Ok(r) = t2_paired(&sa, &sb) {
            prop_assert_eq!(r.df, Some((2, n as u32 - 2)));
        }
    }

    #[test]
    fn anova_df_identities(
        groups in prop::collection::vec(points(3, 12), 2..6),
    ) {
        let k = groups.len();
        let total: usize = groups.iter().map(Vec::len).sum();
        let samples: Vec<ComplexSample> = groups.iter().map(|g| sample("g", g)).collect();
        let r = anova2circ_independent(&samples).unwrap();
        prop_assert_eq!(r.df, Some((2 * (k as u32 - 1), 2 * (total - k) as u32)));
        if let Ok(m) = manova_oneway(&samples) {
            prop_assert_eq!(m.df, Some((2 * (k as u32 - 1), 2 * (total - k - 1) as u32)));
        }

        let n = groups.iter().map(Vec::len).min().unwrap();
        let trimmed: Vec<ComplexSample> = groups
            .iter()
            .enumerate()
            .map(|(j, g)| labelled(&format!("c{j}"), &g[..n]))
            .collect();
        let r = anova2circ_repeated(&trimmed).unwrap();
        prop_assert_eq!(r.df, Some((2 * (k as u32 - 1), 2 * ((n - 1) * (k - 1)) as u32)));
    }

    #[test]
    fn two_group_designs_agree(a in points(3, 15), b in points(3, 15)) {
        let (sa, sb) = (sample("a", &a), sample("b", &b));
        // ANOVA2circ with k = 2 is the two-sample T2circ
        let an = anova2circ_independent(&[sa.clone(), sb.clone()]).unwrap();
        let tc = t2circ_two_sample(&sa, &sb).unwrap();
        prop_assert_eq!(an.df, tc.df);
        prop_assert!(rel_eq(an.f_value.unwrap(), tc.f_value.unwrap(), 1e-9));
        prop_assert!(rel_eq(an.p_value, tc.p_value, 1e-9));
        // Wilks with k = 2 is the two-sample T2
        if let (Ok(m), Ok(t)) = (manova_oneway(&[sa.clone(), sb.clone()]), t2_two_sample(&sa, &sb)) {
            prop_assert!(rel_eq(m.p_value, t.p_value, 1e-8), "{} vs {}", m.p_value, t.p_value);
        }
    }

    #[test]
    fn repeated_two_conditions_is_paired(a in points(3, 15), noise in points(15, 16)) {
        let b: Vec<(f64, f64)> = a.iter().zip(&noise).map(|(p, e)| (p.0 + e.0 * 0.3, p.1 + e.1 * 0.3)).collect();
        let (sa, sb) = (labelled("a", &a), labelled("b", &b));
        let rm = anova2circ_repeated(&[sa.clone(), sb.clone()]).unwrap();
        let pt = t2circ_paired(&sa, &sb).unwrap();
        prop_assert_eq!(rm.df, pt.df);
        prop_assert!(rel_eq(rm.f_value.unwrap(), pt.f_value.unwrap(), 1e-9));
    }

    #[test]
    fn squared_distances_sum_to_2n_minus_2(pts in points(3, 50)) {
        let s = sample("a", &pts);
        prop_assume!(well_conditioned(&s));
        let r = mahalanobis_distances(&s, 3.0).unwrap();
        let sum: f64 = r.distances.iter().map(|d| d * d).sum();
        let want = 2.0 * (pts.len() - 1) as f64;
        prop_assert!((sum - want).abs() < 1e-8 * want, "{sum} vs {want}");
    }

    #[test]
    fn rotation_and_scale_invariance(
        pts in points(4, 30),
        angle in -3.2..3.2f64,
        scale in 0.01..100.0f64,
    ) {
        let s = sample("a", &pts);
        prop_assume!(well_conditioned(&s));
        let t = s.map(|o| o.rotate(angle) * scale);
        let zero = ComplexObservation::ZERO;

        let (c0, c1) = (covariance_summary(&s).unwrap(), covariance_summary(&t).unwrap());
        prop_assert!(rel_eq(c0.condition_index.unwrap(), c1.condition_index.unwrap(), 1e-9));
        prop_assert!(rel_eq(c0.eigenvalues.0 * scale * scale, c1.eigenvalues.0, 1e-9));

        for (a, b) in [
            (t2_one_sample(&s, zero), t2_one_sample(&t, zero)),
            (t2circ_one_sample(&s, zero), t2circ_one_sample(&t, zero)),
            (ci_test(&s), ci_test(&t)),
        ] {
            let (a, b) = (a.unwrap(), b.unwrap());
            prop_assert!(rel_eq(a.statistic, b.statistic, 1e-8), "{} vs {}", a.statistic, b.statistic);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-8);
        }

        let d0 = mahalanobis_distances(&s, 3.0).unwrap().distances;
        let d1 = mahalanobis_distances(&t, 3.0).unwrap().distances;
        for (x, y) in d0.iter().zip(&d1) {
            prop_assert!((x - y).abs() < 1e-8);
        }

        // amplitude error bars rotate exactly and scale linearly
        let e0 = amp_errors_ellipse(&s, 0.68).unwrap();
        let e1 = amp_errors_ellipse(&t, 0.68).unwrap();
        prop_assert!(rel_eq(e0.mean_amplitude * scale, e1.mean_amplitude, 1e-9));
        prop_assert!(rel_eq(e0.error_high * scale, e1.error_high, 1e-9));
        prop_assert!((e0.error_low * scale - e1.error_low).abs() <= 1e-9 * e1.error_high.max(1.0));
    }

    #[test]
    fn anova_is_rotation_invariant(
        groups in prop::collection::vec(points(3, 10), 2..5),
        angle in -3.2..3.2f64,
    ) {
        let s: Vec<ComplexSample> = groups.iter().map(|g| sample("g", g)).collect();
        let t: Vec<ComplexSample> = s.iter().map(|x| x.map(|o| o.rotate(angle))).collect();
        let (a, b) = (anova2circ_independent(&s).unwrap(), anova2circ_independent(&t).unwrap());
        prop_assert!(rel_eq(a.statistic, b.statistic, 1e-8));
    }

    #[test]
    fn residuals_average_to_zero(pts in points(2, 40)) {
        let s = sample("a", &pts);
        let m = s.mean().unwrap();
        let scale = pts.iter().map(|p| p.0.abs().max(p.1.abs())).fold(1.0, f64::max);
        let (rx, ry) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 - m.re, acc.1 + p.1 - m.im));
        prop_assert!((rx / pts.len() as f64).abs() < 1e-12 * scale);
        prop_assert!((ry / pts.len() as f64).abs() < 1e-12 * scale);
    }

    #[test]
    fn eigenvectors_orthonormal(pts in points(2, 30)) {
        let c = covariance_summary(&sample("a", &pts)).unwrap();
        let [u, v] = c.eigenvectors;
        prop_assert!((u[0] * u[0] + u[1] * u[1] - 1.0).abs() < 1e-10);
        prop_assert!((v[0] * v[0] + v[1] * v[1] - 1.0).abs() < 1e-10);
        prop_assert!((u[0] * v[0] + u[1] * v[1]).abs() < 1e-10);
        prop_assert!(c.eigenvalues.0 >= c.eigenvalues.1);
    }
}
