use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::chi2_sf;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirthOptions {
    pub max_iter: usize,
    /// Convergence when every modified score component is below this.
    pub tol: f64,
    /// Largest allowed change of any coefficient in one step.
    pub max_step: f64,
    pub max_halvings: usize,
}

impl Default for FirthOptions {
    fn default() -> Self {
        FirthOptions {
            max_iter: 100,
            tol: 1e-8,
            max_step: 5.0,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirthFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub penalized_loglik: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_score: f64,
    /// Penalized log-likelihood after every accepted step up to convergence,
    /// starting point first.
    pub loglik_trace: Vec<f64>,
}

impl FirthFit {
    pub fn dof(&self) -> usize {
        self.coefficients.len()
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct State {
    pen_ll: f64,
    ll: f64,
    p: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

fn evaluate(x: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>) -> Option<State> {
    let eta = x * beta;
    let mut ll = 0.0;
    let mut p = DVector::zeros(y.len());
    let mut v = DVector::zeros(y.len());
    for i in 0..y.len() {
        let e = eta[i];
        p[i] = sigmoid(e);
        v[i] = w[i] * p[i] * (1.0 - p[i]);
        if w[i] > 0.0 {
            ll -= w[i]
                * if y[i] == 1.0 {
                    softplus(-e)
                } else {
                    softplus(e)
                };
        }
    }
    let mut xv = x.clone();
    for (i, mut row) in xv.row_iter_mut().enumerate() {
        row *= v[i];
    }
    let info = x.transpose() * xv;
    let chol = Cholesky::new(info)?;
    let log_det: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    if !log_det.is_finite() {
        return None;
    }
    Some(State {
        pen_ll: ll + 0.5 * log_det,
        ll,
        p,
        chol,
    })
}

/// Modified score `X' (w (y - p) + h (1/2 - p))` and the information inverse.
fn modified_score(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    s: &State,
) -> (DVector<f64>, DMatrix<f64>) {
    let inv = s.chol.inverse();
    let xi = x * &inv;
    let mut r = DVector::zeros(y.len());
    for i in 0..y.len() {
        let p = s.p[i];
        let v = w[i] * p * (1.0 - p);
        let h = v * xi.row(i).dot(&x.row(i));
        r[i] = w[i] * (y[i] - p) + h * (0.5 - p);
    }
    (x.transpose() * r, inv)
}

/// Relative change in penalized log-likelihood treated as rounding noise.
const FLAT_LL: f64 = 1e-13;

/// Firth-penalized logistic regression by Newton steps on the modified
/// score, halving any step that would lower the penalized likelihood.
///
/// `x` is row-major, one row per observation. Weights default to one.
pub fn fit_firth_logistic(
    x: &[Vec<f64>],
    y: &[f64],
    weights: Option<&[f64]>,
    opts: &FirthOptions,
) -> Result<FirthFit> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::param(
            "x",
            format!("{} rows for {} outcomes", x.len(), n),
        ));
    }
    if n == 0 {
        return Err(Error::param("y", "no observations"));
    }
    let k = x[0].len();
    if k == 0 || x.iter().any(|r| r.len() != k) {
        return Err(Error::param("x", "rows must share a positive column count"));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::param(
            "y",
            format!("outcomes must be 0 or 1, found {bad}"),
        ));
    }
    let ones = vec![1.0; n];
    let w = weights.unwrap_or(&ones);
    if w.len() != n || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param(
            "weights",
            "need one finite non-negative weight per row",
        ));
    }
    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);

    let mut beta = DVector::zeros(k);
    let mut state = evaluate(&xm, y, w, &beta)
        .ok_or_else(|| Error::Numerical("information matrix is singular at the start".into()))?;
    let mut trace = vec![state.pen_ll];
    let mut iterations = 0;
    let mut converged = false;
    let mut flat = false;
    let (mut score, mut inv) = modified_score(&xm, y, w, &state);

    while iterations < opts.max_iter {
        let now = score.amax();
        if now < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut step = &inv * &score;
        let biggest = step.amax();
        if biggest > opts.max_step {
            step *= opts.max_step / biggest;
        }
        let mut accepted = None;
        for halving in 0..=opts.max_halvings {
            let cand = &beta + &step;
            if let Some(s) = evaluate(&xm, y, w, &cand) {
                if s.pen_ll >= state.pen_ll {
                    accepted = Some((cand, s));
                    break;
                }
                if halving == 0 && state.pen_ll - s.pen_ll <= FLAT_LL * (1.0 + state.pen_ll.abs()) {
                    flat = true;
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((b, s)) = accepted else {
            break;
        };
        beta = b;
        state = s;
        trace.push(state.pen_ll);
        (score, inv) = modified_score(&xm, y, w, &state);
    }

    // The likelihood is flat to rounding here, so polish on the score alone.
    while (converged || flat) && iterations < opts.max_iter {
        let now = score.amax();
        let cand = &beta + &inv * &score;
        let Some(s) = evaluate(&xm, y, w, &cand) else {
            break;
        };
        let (sc, iv) = modified_score(&xm, y, w, &s);
        if !(sc.amax() < 0.5 * now) {
            break;
        }
        iterations += 1;
        beta = cand;
        state = s;
        (score, inv) = (sc, iv);
    }
    if !converged && score.amax() < opts.tol {
        converged = true;
    }

    Ok(FirthFit {
        coefficients: beta.iter().copied().collect(),
        std_errors: inv.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
        penalized_loglik: state.pen_ll,
        loglik: state.ll,
        iterations,
        converged,
        max_score: score.amax(),
        loglik_trace: trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LrTest {
    pub chi2: f64,
    pub dof: usize,
    pub p: f64,
}

/// Likelihood-ratio test on penalized log-likelihoods of nested fits.
pub fn lr_test(full: &FirthFit, reduced: &FirthFit) -> Result<LrTest> {
    if reduced.dof() > full.dof() {
        return Err(Error::param(
            "reduced",
            format!(
                "has {} terms, more than the full model's {}",
                reduced.dof(),
                full.dof()
            ),
        ));
    }
    let dof = full.dof() - reduced.dof();
    let chi2 = 2.0 * (full.penalized_loglik - reduced.penalized_loglik);
    let p = if dof == 0 || chi2 <= 0.0 {
        1.0
    } else {
        chi2_sf(chi2, dof as f64)
    };
    Ok(LrTest { chi2, dof, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept(n: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0]; n]
    }

    #[test]
    fn intercept_only_closed_form() {
        for &(k, n) in &[(0usize, 5usize), (3, 10), (10, 10), (1, 40)] {
            let y: Vec<f64> = (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
            let fit =
                fit_firth_logistic(&intercept(n), &y, None, &FirthOptions::default()).unwrap();
            assert!(fit.converged);
            let p = sigmoid(fit.coefficients[0]);
            let want = (k as f64 + 0.5) / (n as f64 + 1.0);
            assert!((p - want).abs() < 1e-10, "k={k} n={n}: {p} vs {want}");
        }
    }

    #[test]
    fn separable_pair_is_finite() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let fit = fit_firth_logistic(&x, &[0.0, 1.0], None, &FirthOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients.iter().all(|b| b.is_finite()));
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rejects_bad_outcomes() {
        assert!(
            fit_firth_logistic(&intercept(2), &[0.0, 0.5], None, &FirthOptions::default()).is_err()
        );
        assert!(fit_firth_logistic(
            &intercept(2),
            &[0.0, 1.0],
            Some(&[1.0, -1.0]),
            &FirthOptions::default()
        )
        .is_err());
    }

    #[test]
    fn lr_identity_and_nesting() {
        let y = [0.0, 1.0, 1.0, 0.0, 1.0];
        let fit = fit_firth_logistic(&intercept(5), &y, None, &FirthOptions::default()).unwrap();
        let t = lr_test(&fit, &fit).unwrap();
        assert_eq!((t.chi2, t.dof, t.p), (0.0, 0, 1.0));
        let bigger = fit_firth_logistic(
            &(0..5).map(|i| vec![1.0, i as f64]).collect::<Vec<_>>(),
            &y,
            None,
            &FirthOptions::default(),
        )
        .unwrap();
        assert_eq!(lr_test(&bigger, &fit).unwrap().dof, 1);
        assert!(lr_test(&fit, &bigger).is_err());
    }
}
