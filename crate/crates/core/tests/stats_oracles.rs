mod common;

use proptest::prelude::*;
use rand::Rng;

use common::rng;
use egogaze::stats::{fit_firth_logistic, lr_test, spearman, two_way_anova, FirthOptions};

const ANOVA_RELATIVE: f64 = 1e-9;
const FIRTH_TOLERANCE: f64 = 1e-8;
const SPEARMAN_TOLERANCE: f64 = 1e-12;

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= ANOVA_RELATIVE * b.abs().max(1e-300)
}

#[test]
fn anova_matches_hand_computed_grid() {
    // rows are dogs, columns classes; grand mean 5, dog means 5 6 4,
    // class means 2 5 8
    let grid = vec![
        vec![2.0, 4.0, 9.0],
        vec![3.0, 5.0, 10.0],
        vec![1.0, 6.0, 5.0],
    ];
    let r = two_way_anova(&grid).unwrap();
    assert!(rel_eq(r.ss_total, 72.0));
    assert!(rel_eq(r.ss_class, 54.0));
    assert!(rel_eq(r.ss_dog, 6.0));
    assert!(rel_eq(r.ss_error, 12.0));
    assert_eq!((r.dof_class, r.dof_dog, r.dof_error), (2, 2, 4));
    assert!(rel_eq(r.f_class, 9.0));
    assert!(rel_eq(r.f_dog, 1.0));
    // F(2, d) survival is (1 + 2F/d)^(-d/2)
    assert!(rel_eq(r.p_class, 1.0 / 5.5f64.powi(2)));
    assert!(rel_eq(r.p_dog, 1.0 / 1.5f64.powi(2)));
    assert!(rel_eq(r.eta2_class, 54.0 / 66.0));
}

#[test]
fn anova_dofs_for_eleven_dogs_and_fifteen_classes() {
    let mut g = rng(11);
    let grid: Vec<Vec<f64>> = (0..11)
        .map(|_| (0..15).map(|_| g.random::<f64>()).collect())
        .collect();
    let r = two_way_anova(&grid).unwrap();
    assert_eq!((r.dof_class, r.dof_error), (14, 140));
    assert_eq!((r.dof_dog, r.dof_error), (10, 140));
}

#[test]
fn anova_p_values_match_statrs() {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};
    let mut g = rng(3);
    for _ in 0..20 {
        let grid: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                (0..7)
                    .map(|j| (i * j) as f64 * 0.1 + g.random::<f64>())
                    .collect()
            })
            .collect();
        let r = two_way_anova(&grid).unwrap();
        let want = FisherSnedecor::new(r.dof_class as f64, r.dof_error as f64)
            .unwrap()
            .sf(r.f_class);
        assert!(
            (r.p_class - want).abs() <= 1e-9 * want.max(1e-12),
            "{} vs {want}",
            r.p_class
        );
    }
}

proptest! {
    #[test]
    fn anova_decomposition_is_exact(cells in prop::collection::vec(-100.0f64..100.0, 12)) {
        let grid: Vec<Vec<f64>> = cells.chunks(4).map(<[f64]>::to_vec).collect();
        let r = two_way_anova(&grid).unwrap();
        let sum = r.ss_class + r.ss_dog + r.ss_error;
        prop_assert!((sum - r.ss_total).abs() <= 1e-9 * r.ss_total.max(1.0));
    }
}

fn intercept_column(n: usize) -> Vec<Vec<f64>> {
    vec![vec![1.0]; n]
}

#[test]
fn firth_intercept_only_gives_shrunk_proportion() {
    for (n, k) in [(10, 0), (10, 3), (10, 10), (1, 1), (57, 21), (200, 199)] {
        let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i < k))).collect();
        let fit =
            fit_firth_logistic(&intercept_column(n), &y, None, &FirthOptions::default()).unwrap();
        let p = 1.0 / (1.0 + (-fit.coefficients[0]).exp());
        let want = (k as f64 + 0.5) / (n as f64 + 1.0);
        assert!(
            (p - want).abs() <= FIRTH_TOLERANCE,
            "n={n} k={k}: {p} vs {want}"
        );
    }
}

#[test]
fn firth_saturated_two_by_two_adds_half_to_each_cell() {
    // intercept + indicator is saturated; Firth estimates are the
    // half-corrected cell log-odds
    let (a, b, c, d) = (7usize, 0usize, 3usize, 9usize);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (g, pos, neg) in [(0.0, a, b), (1.0, c, d)] {
        for _ in 0..pos {
            x.push(vec![1.0, g]);
            y.push(1.0);
        }
        for _ in 0..neg {
            x.push(vec![1.0, g]);
            y.push(0.0);
        }
    }
    let fit = fit_firth_logistic(&x, &y, None, &FirthOptions::default()).unwrap();
    let b0 = ((a as f64 + 0.5) / (b as f64 + 0.5)).ln();
    let b1 = ((c as f64 + 0.5) / (d as f64 + 0.5)).ln() - b0;
    assert!(
        (fit.coefficients[0] - b0).abs() <= 1e-7,
        "{:?}",
        fit.coefficients
    );
    assert!(
        (fit.coefficients[1] - b1).abs() <= 1e-7,
        "{:?}",
        fit.coefficients
    );
}

#[test]
fn firth_weights_equal_replicated_rows() {
    let x = vec![
        vec![1.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
    ];
    let y = vec![1.0, 0.0, 1.0, 0.0];
    let w = vec![3.0, 2.0, 1.0, 4.0];
    let weighted = fit_firth_logistic(&x, &y, Some(&w), &FirthOptions::default()).unwrap();
    let mut xr = Vec::new();
    let mut yr = Vec::new();
    for i in 0..4 {
        for _ in 0..w[i] as usize {
            xr.push(x[i].clone());
            yr.push(y[i]);
        }
    }
    let replicated = fit_firth_logistic(&xr, &yr, None, &FirthOptions::default()).unwrap();
    for (a, b) in weighted.coefficients.iter().zip(&replicated.coefficients) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn firth_separable_data_stays_finite() {
    let x = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
    let y = vec![0.0, 1.0];
    let fit = fit_firth_logistic(&x, &y, None, &FirthOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.coefficients.iter().all(|b| b.is_finite()));
    assert!(fit.coefficients[1] > 0.0);
}

#[test]
fn firth_penalized_likelihood_is_monotone() {
    let mut g = rng(77);
    for _ in 0..50 {
        let n = g.random_range(5..60);
        let p = g.random_range(1..4);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                std::iter::once(1.0)
                    .chain((1..p).map(|_| g.random_range(-2.0..2.0)))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|_| f64::from(u8::from(g.random_bool(0.3))))
            .collect();
        let fit = fit_firth_logistic(&x, &y, None, &FirthOptions::default()).unwrap();
        assert!(
            fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "{:?}",
            fit.loglik_trace
        );
        assert!(fit.converged, "n={n} p={p}: score {}", fit.max_score);
    }
}

#[test]
fn likelihood_ratio_p_matches_statrs() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let mut g = rng(5);
    let n = 80;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![1.0, g.random_range(-1.0..1.0)])
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| f64::from(u8::from(g.random::<f64>() < 0.5 + 0.3 * r[1])))
        .collect();
    let full = fit_firth_logistic(&x, &y, None, &FirthOptions::default()).unwrap();
    let reduced =
        fit_firth_logistic(&intercept_column(n), &y, None, &FirthOptions::default()).unwrap();
    let lr = lr_test(&full, &reduced).unwrap();
    assert_eq!(lr.dof, 1);
    let want = ChiSquared::new(1.0).unwrap().sf(lr.chi2);
    assert!((lr.p - want).abs() <= 1e-10, "{} vs {want}", lr.p);
}

fn naive_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let below = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

#[test]
fn spearman_matches_naive_oracle_with_ties() {
    let mut g = rng(1000);
    for trial in 0..20 {
        // coarse grid values force many ties
        let x: Vec<f64> = (0..1000)
            .map(|_| f64::from(g.random_range(0..40)))
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (v + f64::from(g.random_range(0..30))).floor())
            .collect();
        let got = spearman(&x, &y).unwrap();
        let want = naive_pearson(&naive_ranks(&x), &naive_ranks(&y));
        assert!(
            (got.rho - want).abs() <= SPEARMAN_TOLERANCE,
            "trial {trial}: {} vs {want}",
            got.rho
        );
    }
}

#[test]
fn spearman_is_invariant_under_monotone_maps() {
    let mut g = rng(9);
    let x: Vec<f64> = (0..1000)
        .map(|_| f64::from(g.random_range(0..50)) / 7.0)
        .collect();
    let y: Vec<f64> = (0..1000).map(|_| g.random::<f64>()).collect();
    let base = spearman(&x, &y).unwrap();
    let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let cy: Vec<f64> = y.iter().map(|v| 3.0 * v.powi(3) + 1.0).collect();
    let mapped = spearman(&ex, &cy).unwrap();
    assert_eq!(base.rho, mapped.rho);
    let flipped = spearman(&x, &y.iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
    assert_eq!(flipped.rho, -base.rho);
}

#[test]
fn spearman_p_matches_statrs_t() {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let x = [1.0, 3.0, 2.0, 5.0, 4.0, 7.0, 6.0, 8.0, 10.0, 9.0];
    let y = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 9.0, 7.0, 8.0, 10.0];
    let r = spearman(&x, &y).unwrap();
    let t = r.rho * (8.0 / (1.0 - r.rho * r.rho)).sqrt();
    let want = 2.0 * StudentsT::new(0.0, 1.0, 8.0).unwrap().sf(t.abs());
    assert!((r.p - want).abs() <= 1e-10, "{} vs {want}", r.p);
}
