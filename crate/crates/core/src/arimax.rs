//! ARIMAX(p, d, q) with exogenous regressors, estimated by conditional sum
//! of squares.
//!
//! The series and every exogenous column are differenced `d` times and the
//! differenced series `w` follows
//!
//! ```text
//! w[t] = c + beta · x[t] + sum_j phi[j] w[t-j] + e[t] + sum_k theta[k] e[t-k]
//! ```
//!
//! with residuals before the first usable observation fixed at zero.
//! Forecasts are produced on the differenced scale and integrated back.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{nelder_mead, SimplexSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArimaxError {
    #[error("series of length {len} cannot be differenced {d} times")]
    SeriesTooShort { len: usize, d: usize },
    #[error("integration of order {expected} needs {expected} initial values, got {got}")]
    InconsistentInitials { expected: usize, got: usize },
    #[error("{usable} observations after differencing cannot support {params} parameters")]
    TooFewObservations { usable: usize, params: usize },
    #[error("non-finite value in inputs")]
    NonFiniteInput,
    #[error("{rows} exogenous rows for a series of length {len}")]
    ExogenousLengthMismatch { rows: usize, len: usize },
    #[error("exogenous width {got}, expected {expected}")]
    ExogenousWidthMismatch { expected: usize, got: usize },
    #[error("forecast horizon must be at least one step")]
    ZeroHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaxOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaxOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaxOrder { p, d, q }
    }

    /// Differencing beyond second order is statistically unusual.
    pub fn is_unusual(&self) -> bool {
        self.d > 2
    }

    /// Shortest series a fit with `n_exog` regressors accepts.
    pub fn min_observations(&self, n_exog: usize) -> usize {
        self.d + self.p + self.q + n_exog + 2
    }
}

impl Default for ArimaxOrder {
    /// `p = 0, d = 5, q = 1`.
    fn default() -> Self {
        ArimaxOrder { p: 0, d: 5, q: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaxFit {
    pub order: ArimaxOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// Innovation variance, `css / (usable observations)`.
    pub sigma2: f64,
    pub css: f64,
    /// Final `d + p` levels of the endogenous series.
    pub last_values: Vec<f64>,
    /// Final `q` residuals, oldest first.
    pub last_residuals: Vec<f64>,
    /// Final `d` raw exogenous rows, needed to difference future rows.
    pub last_exog: Vec<Vec<f64>>,
    /// Set when the differenced series is constant and there is no
    /// exogenous signal; the fit is exact with `sigma2 = 0`.
    pub degenerate: bool,
    pub converged: bool,
    pub evaluations: usize,
}

/// `d`-fold first differences.
pub fn difference(y: &[f64], d: usize) -> Result<Vec<f64>, ArimaxError> {
    if y.len() <= d && d > 0 {
        return Err(ArimaxError::SeriesTooShort { len: y.len(), d });
    }
    let mut out = y.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Integration state at the end of `y`: `[y, Δy, …, Δ^{d-1} y]` evaluated
/// at the last position. `y` must hold at least `d` values.
pub fn integration_state(y: &[f64], d: usize) -> Result<Vec<f64>, ArimaxError> {
    if y.len() < d {
        return Err(ArimaxError::InconsistentInitials {
            expected: d,
            got: y.len(),
        });
    }
    let mut state = Vec::with_capacity(d);
    let mut current = y[y.len() - d..].to_vec();
    for _ in 0..d {
        state.push(*current.last().expect("non-empty"));
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(state)
}

/// Inverse of [`difference`]: rebuilds levels from `d`-th differences
/// continuing from `initials` (as produced by [`integration_state`]).
pub fn integrate(diffs: &[f64], d: usize, initials: &[f64]) -> Result<Vec<f64>, ArimaxError> {
    if initials.len() != d {
        return Err(ArimaxError::InconsistentInitials {
            expected: d,
            got: initials.len(),
        });
    }
    let mut state = initials.to_vec();
    Ok(diffs
        .iter()
        .map(|&w| {
            let mut carry = w;
            for k in (0..d).rev() {
                state[k] += carry;
                carry = state[k];
            }
            carry
        })
        .collect())
}

fn difference_rows(rows: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut out = rows.to_vec();
    for _ in 0..d {
        out = out
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
    }
    out
}

/// Conditional sum of squares problem on the differenced data.
struct CssProblem {
    w: Vec<f64>,
    /// Standardized active exogenous columns, row-major, `n_w * k`.
    z: Vec<f64>,
    k: usize,
    p: usize,
    scale: f64,
}

impl CssProblem {
    /// Residuals for AR/MA coefficients and the scaled linear part
    /// (centred intercept first, then one weight per active column).
    fn residuals(&self, phi: &[f64], theta: &[f64], linear: &[f64], out: &mut Vec<f64>) -> f64 {
        let n = self.w.len();
        out.clear();
        out.resize(n, 0.0);
        let mut css = 0.0;
        for t in self.p..n {
            let zt = &self.z[t * self.k..(t + 1) * self.k];
            let mean = self.scale
                * (linear[0] + zt.iter().zip(&linear[1..]).map(|(a, b)| a * b).sum::<f64>());
            let mut e = self.w[t] - mean;
            for (j, ph) in phi.iter().enumerate() {
                e -= ph * self.w[t - 1 - j];
            }
            for (k, th) in theta.iter().enumerate() {
                if t >= self.p + 1 + k {
                    e -= th * out[t - 1 - k];
                }
            }
            out[t] = e;
            css += e * e;
        }
        css
    }
}

/// Least squares of `w` on the standardized columns plus a constant, solved
/// via Cholesky on the normal equations with an SVD fallback.
fn warm_start(problem: &CssProblem) -> Vec<f64> {
    let rows = problem.w.len() - problem.p;
    let k = problem.k;
    let design = DMatrix::from_fn(rows, k + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            problem.z[(i + problem.p) * k + j - 1]
        }
    });
    let rhs = DVector::from_iterator(rows, problem.w[problem.p..].iter().map(|v| v / problem.scale));
    let gram = design.transpose() * &design;
    let moment = design.transpose() * &rhs;
    let solution = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&moment),
        None => {
            let svd = gram.svd(true, true);
            let eps = svd.singular_values.max() * (k + 1) as f64 * f64::EPSILON * 16.0;
            svd.solve(&moment, eps).expect("U and V were computed")
        }
    };
    solution.iter().copied().collect()
}

/// Reflects MA roots inside the unit circle, returning invertible
/// coefficients with the same autocovariance structure.
pub fn make_invertible(theta: &[f64]) -> Vec<f64> {
    let mut degree = theta.len();
    while degree > 0 && theta[degree - 1] == 0.0 {
        degree -= 1;
    }
    if degree == 0 {
        return theta.to_vec();
    }
    if degree == 1 {
        let mut out = theta.to_vec();
        if theta[0].abs() > 1.0 {
            out[0] = 1.0 / theta[0];
        }
        return out;
    }
    // polynomial 1 + theta_1 z + ... + theta_q z^q, lowest degree first
    let mut coeffs = vec![1.0];
    coeffs.extend_from_slice(&theta[..degree]);
    let roots = polynomial_roots(&coeffs);
    if roots.iter().all(|r| r.norm() >= 1.0) {
        return theta.to_vec();
    }
    let reflected: Vec<Complex64> = roots
        .into_iter()
        .map(|r| if r.norm() < 1.0 { 1.0 / r.conj() } else { r })
        .collect();
    // rebuild prod (1 - z / r)
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for r in reflected {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c / r;
        }
        poly = next;
    }
    let mut out: Vec<f64> = poly[1..].iter().map(|c| c.re).collect();
    out.resize(theta.len(), 0.0);
    out
}

/// Durand–Kerner roots of `sum coeffs[i] z^i`.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = coeffs.len() - 1;
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| Complex64::new(c / lead, 0.0)).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..degree {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    roots
}

/// Fits ARIMAX by minimising the conditional sum of squares with a
/// Nelder–Mead simplex. AR and MA coefficients start at zero; the intercept
/// and exogenous weights start from least squares of the differenced
/// series on the differenced regressors.
pub fn fit_arimax(
    y: &[f64],
    exog: Option<&[Vec<f64>]>,
    order: ArimaxOrder,
    settings: SimplexSettings,
) -> Result<ArimaxFit, ArimaxError> {
    let ArimaxOrder { p, d, q } = order;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ArimaxError::NonFiniteInput);
    }
    let exog: &[Vec<f64>] = exog.unwrap_or(&[]);
    let n_exog = exog.first().map_or(0, Vec::len);
    if !exog.is_empty() {
        if exog.len() != y.len() {
            return Err(ArimaxError::ExogenousLengthMismatch {
                rows: exog.len(),
                len: y.len(),
            });
        }
        for row in exog {
            if row.len() != n_exog {
                return Err(ArimaxError::ExogenousWidthMismatch {
                    expected: n_exog,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ArimaxError::NonFiniteInput);
            }
        }
    }

    let w = difference(y, d)?;
    let params = p + q + n_exog + 1;
    if params >= w.len() {
        return Err(ArimaxError::TooFewObservations {
            usable: w.len(),
            params,
        });
    }
    let z_raw = if n_exog > 0 {
        difference_rows(exog, d)
    } else {
        vec![Vec::new(); w.len()]
    };
    let n_w = w.len();
    let usable = n_w - p;

    // standardize exogenous columns over the rows that enter the objective
    let mut means = vec![0.0; n_exog];
    let mut sds = vec![0.0; n_exog];
    for j in 0..n_exog {
        let col = z_raw[p..].iter().map(|r| r[j]);
        let mean = col.clone().sum::<f64>() / usable as f64;
        let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / usable as f64;
        means[j] = mean;
        sds[j] = var.sqrt();
    }
    let active: Vec<usize> = (0..n_exog)
        .filter(|&j| sds[j] > 1e-12 * means[j].abs().max(1e-300))
        .collect();
    let k = active.len();
    let mut z = Vec::with_capacity(n_w * k);
    for row in &z_raw {
        for &j in &active {
            z.push((row[j] - means[j]) / sds[j]);
        }
    }

    let w_used = &w[p..];
    let w_mean = w_used.iter().sum::<f64>() / usable as f64;
    let w_sd = (w_used.iter().map(|v| (v - w_mean).powi(2)).sum::<f64>() / usable as f64).sqrt();
    let degenerate = w_sd <= 1e-12 * w_mean.abs().max(1e-300) && k == 0;
    let scale = if w_sd > 0.0 { w_sd } else { w_mean.abs().max(1.0) };

    let problem = CssProblem { w, z, k, p, scale };
    let tail = |values: &[f64], m: usize| values[values.len() - m..].to_vec();
    let last_exog = if n_exog > 0 { tail_rows(exog, d) } else { Vec::new() };

    if degenerate {
        // exact fit: constant differenced series, no regressors
        return Ok(ArimaxFit {
            order,
            phi: vec![0.0; p],
            theta: vec![0.0; q],
            beta: vec![0.0; n_exog],
            intercept: w_mean,
            sigma2: 0.0,
            css: 0.0,
            last_values: tail(y, d + p),
            last_residuals: vec![0.0; q],
            last_exog,
            degenerate: true,
            converged: true,
            evaluations: 0,
        });
    }

    let linear0 = warm_start(&problem);
    let mut start = vec![0.0; p + q];
    start.extend_from_slice(&linear0);
    let steps = vec![0.1; start.len()];

    let mut buffer = Vec::with_capacity(n_w);
    let objective = |u: &[f64]| {
        let theta = make_invertible(&u[p..p + q]);
        problem.residuals(&u[..p], &theta, &u[p + q..], &mut buffer)
    };
    let minimum = nelder_mead(objective, &start, &steps, settings);

    let u = &minimum.x;
    let phi = u[..p].to_vec();
    let theta = make_invertible(&u[p..p + q]);
    let linear = &u[p + q..];
    let mut residuals = Vec::with_capacity(n_w);
    let css = problem.residuals(&phi, &theta, linear, &mut residuals);

    let mut beta = vec![0.0; n_exog];
    for (slot, &j) in active.iter().enumerate() {
        beta[j] = scale * linear[slot + 1] / sds[j];
    }
    let intercept = scale * linear[0] - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();

    Ok(ArimaxFit {
        order,
        phi,
        theta,
        beta,
        intercept,
        sigma2: css / usable as f64,
        css,
        last_values: tail(y, d + p),
        last_residuals: tail(&residuals, q),
        last_exog,
        degenerate: false,
        converged: minimum.converged,
        evaluations: minimum.evaluations,
    })
}

fn tail_rows(rows: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    rows[rows.len() - m..].to_vec()
}

/// Conditional-mean forecasts for the next `horizon` steps. Future
/// innovations are zero; known residuals feed the first `q` steps.
pub fn forecast(
    fit: &ArimaxFit,
    horizon: usize,
    future_exog: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>, ArimaxError> {
    if horizon == 0 {
        return Err(ArimaxError::ZeroHorizon);
    }
    let ArimaxOrder { p, d, q } = fit.order;
    let n_exog = fit.beta.len();
    let future: &[Vec<f64>] = match future_exog {
        Some(rows) => rows,
        None if n_exog == 0 => &[],
        None => {
            return Err(ArimaxError::ExogenousWidthMismatch {
                expected: n_exog,
                got: 0,
            })
        }
    };
    let z_future = if n_exog > 0 {
        if future.len() != horizon {
            return Err(ArimaxError::ExogenousLengthMismatch {
                rows: future.len(),
                len: horizon,
            });
        }
        for row in future {
            if row.len() != n_exog {
                return Err(ArimaxError::ExogenousWidthMismatch {
                    expected: n_exog,
                    got: row.len(),
                });
            }
        }
        let mut joined = fit.last_exog.clone();
        joined.extend_from_slice(future);
        difference_rows(&joined, d)
    } else {
        if let Some(row) = future.iter().find(|r| !r.is_empty()) {
            return Err(ArimaxError::ExogenousWidthMismatch {
                expected: 0,
                got: row.len(),
            });
        }
        vec![Vec::new(); horizon]
    };

    let mut w_hist = if p > 0 {
        difference(&fit.last_values, d)?
    } else {
        Vec::new()
    };
    let mut e_hist = fit.last_residuals.clone();
    let mut w_hat = Vec::with_capacity(horizon);
    for zt in z_future.iter().take(horizon) {
        let mut value = fit.intercept + fit.beta.iter().zip(zt).map(|(b, x)| b * x).sum::<f64>();
        for j in 0..p {
            value += fit.phi[j] * w_hist[w_hist.len() - 1 - j];
        }
        for k in 0..q {
            if k < e_hist.len() {
                value += fit.theta[k] * e_hist[e_hist.len() - 1 - k];
            }
        }
        w_hist.push(value);
        e_hist.push(0.0);
        w_hat.push(value);
    }
    let initials = integration_state(&fit.last_values, d)?;
    integrate(&w_hat, d, &initials)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SimplexSettings {
        SimplexSettings::default()
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 2.0, 3.0, 4.0, 5.0], 1).unwrap(), vec![1.0; 4]);
        assert_eq!(difference(&[1.0, 2.0, 4.0, 8.0], 2).unwrap(), vec![1.0, 2.0]);
        assert_eq!(difference(&[3.0, 1.0], 0).unwrap(), vec![3.0, 1.0]);
        assert_eq!(
            difference(&[1.0, 2.0], 2),
            Err(ArimaxError::SeriesTooShort { len: 2, d: 2 })
        );
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(integrate(&[1.0, 1.0], 1, &[5.0]).unwrap(), vec![6.0, 7.0]);
        assert_eq!(integrate(&[], 2, &[1.0, 2.0]).unwrap(), Vec::<f64>::new());
        assert_eq!(
            integrate(&[1.0], 2, &[1.0]),
            Err(ArimaxError::InconsistentInitials { expected: 2, got: 1 })
        );
        let y = [3.5, 7.25, 7.25, 0.0];
        let initial = integration_state(&y[..1], 1).unwrap();
        let rebuilt = integrate(&difference(&y, 1).unwrap(), 1, &initial).unwrap();
        assert_eq!(rebuilt, y[1..].to_vec());
    }

    #[test]
    fn line_with_one_difference_is_degenerate() {
        let y: Vec<f64> = (1..=20).map(f64::from).collect();
        let fit = fit_arimax(&y, None, ArimaxOrder::new(0, 1, 0), settings()).unwrap();
        assert!(fit.degenerate);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.sigma2.abs() < 1e-12);
        assert_eq!(forecast(&fit, 3, None).unwrap(), vec![21.0, 22.0, 23.0]);
    }

    #[test]
    fn constant_mean_model_forecasts_its_intercept() {
        let fit = ArimaxFit {
            order: ArimaxOrder::new(0, 0, 0),
            phi: vec![],
            theta: vec![],
            beta: vec![],
            intercept: 4.5,
            sigma2: 1.0,
            css: 1.0,
            last_values: vec![],
            last_residuals: vec![],
            last_exog: vec![],
            degenerate: false,
            converged: true,
            evaluations: 0,
        };
        assert_eq!(forecast(&fit, 4, None).unwrap(), vec![4.5; 4]);
    }

    #[test]
    fn ma1_forecast_hand_trace() {
        // y = [2, 3, 1, 4, 2], c = 2, theta = 0.5, pre-sample residual 0:
        // e = [0, 1, -1.5, 2.75, -1.375]
        let y = [2.0, 3.0, 1.0, 4.0, 2.0];
        let c = 2.0;
        let theta = 0.5;
        let mut e_prev = 0.0;
        let mut last = 0.0;
        for v in y {
            last = v - c - theta * e_prev;
            e_prev = last;
        }
        assert_eq!(last, -1.375);
        let fit = ArimaxFit {
            order: ArimaxOrder::new(0, 0, 1),
            phi: vec![],
            theta: vec![theta],
            beta: vec![],
            intercept: c,
            sigma2: 1.0,
            css: 1.0,
            last_values: vec![],
            last_residuals: vec![last],
            last_exog: vec![],
            degenerate: false,
            converged: true,
            evaluations: 0,
        };
        let f = forecast(&fit, 2, None).unwrap();
        assert_eq!(f, vec![c + theta * last, c]);
    }

    #[test]
    fn residual_recursion_matches_hand_trace() {
        let problem = CssProblem {
            w: vec![2.0, 3.0, 1.0, 4.0, 2.0],
            z: vec![],
            k: 0,
            p: 0,
            scale: 1.0,
        };
        let mut out = Vec::new();
        let css = problem.residuals(&[], &[0.5], &[2.0], &mut out);
        assert_eq!(out, vec![0.0, 1.0, -1.5, 2.75, -1.375]);
        assert_eq!(css, 1.0 + 2.25 + 7.5625 + 1.890625);
    }

    #[test]
    fn invertibility_reflection() {
        assert_eq!(make_invertible(&[2.0]), vec![0.5]);
        assert_eq!(make_invertible(&[-0.4]), vec![-0.4]);
        // (1 + 2z)(1 + 0.25z) = 1 + 2.25z + 0.5z^2 -> (1 + 0.5z)(1 + 0.25z)
        let out = make_invertible(&[2.25, 0.5]);
        assert!((out[0] - 0.75).abs() < 1e-10, "{out:?}");
        assert!((out[1] - 0.125).abs() < 1e-10);
        assert_eq!(make_invertible(&[0.3, 0.0]), vec![0.3, 0.0]);
    }

    #[test]
    fn input_validation() {
        let y = vec![1.0; 5];
        assert!(matches!(
            fit_arimax(&y, None, ArimaxOrder::new(2, 1, 2), settings()),
            Err(ArimaxError::TooFewObservations { .. })
        ));
        assert_eq!(
            fit_arimax(&[1.0, f64::NAN, 2.0], None, ArimaxOrder::new(0, 0, 0), settings()),
            Err(ArimaxError::NonFiniteInput)
        );
        let x = vec![vec![1.0]; 4];
        assert!(matches!(
            fit_arimax(&y, Some(&x), ArimaxOrder::new(0, 0, 0), settings()),
            Err(ArimaxError::ExogenousLengthMismatch { .. })
        ));
    }

    #[test]
    fn forecast_checks_exogenous_width() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, r)| 2.0 * r[0] + (i % 3) as f64).collect();
        let fit = fit_arimax(&y, Some(&x), ArimaxOrder::new(0, 0, 0), settings()).unwrap();
        assert!(matches!(forecast(&fit, 1, None), Err(ArimaxError::ExogenousWidthMismatch { .. })));
        assert!(matches!(
            forecast(&fit, 1, Some(&[vec![1.0, 2.0]])),
            Err(ArimaxError::ExogenousWidthMismatch { expected: 1, got: 2 })
        ));
        assert_eq!(forecast(&fit, 0, None), Err(ArimaxError::ZeroHorizon));
        assert_eq!(forecast(&fit, 1, Some(&[vec![3.0]])).unwrap().len(), 1);
    }

    fn normals(seed: u64, n: usize, sd: f64) -> Vec<f64> {
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::rng::stream(seed, 0);
        let dist = Normal::new(0.0, sd).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn recovers_exogenous_coefficient() {
        let x: Vec<Vec<f64>> = normals(11, 500, 1.0).into_iter().map(|v| vec![v]).collect();
        let noise = normals(12, 500, 0.01);
        let y: Vec<f64> = x.iter().zip(&noise).map(|(r, e)| 2.0 * r[0] + e).collect();
        let fit = fit_arimax(&y, Some(&x), ArimaxOrder::new(0, 0, 0), settings()).unwrap();
        assert!((1.98..=2.02).contains(&fit.beta[0]), "{:?}", fit.beta);
    }

    #[test]
    fn recovers_ma1() {
        let e = normals(21, 1001, 1.0);
        let y: Vec<f64> = (1..1001).map(|t| e[t] + 0.6 * e[t - 1]).collect();
        let fit = fit_arimax(&y, None, ArimaxOrder::new(0, 0, 1), settings()).unwrap();
        assert!((fit.theta[0] - 0.6).abs() < 0.1, "{:?}", fit.theta);
        assert!(fit.sigma2 > 0.8 && fit.sigma2 < 1.2);
    }

    #[test]
    fn recovers_ar1() {
        let e = normals(31, 1000, 1.0);
        let mut y = vec![0.0; 1000];
        for t in 1..1000 {
            y[t] = 0.5 + 0.7 * y[t - 1] + e[t];
        }
        let fit = fit_arimax(&y, None, ArimaxOrder::new(1, 0, 0), settings()).unwrap();
        assert!((fit.phi[0] - 0.7).abs() < 0.05, "{:?}", fit.phi);
        assert!((fit.intercept - 0.5).abs() < 0.15);
    }

    #[test]
    fn armax_recovery() {
        let n = 800;
        let e = normals(41, n + 1, 0.5);
        let x: Vec<Vec<f64>> = normals(42, n, 2.0).into_iter().map(|v| vec![v]).collect();
        let y: Vec<f64> = (0..n).map(|t| 1.0 + 3.0 * x[t][0] + e[t + 1] - 0.4 * e[t]).collect();
        let fit = fit_arimax(&y, Some(&x), ArimaxOrder::new(0, 0, 1), settings()).unwrap();
        assert!((fit.beta[0] / 3.0 - 1.0).abs() < 0.01, "{:?}", fit.beta);
        assert!((fit.theta[0] + 0.4).abs() < 0.1, "{:?}", fit.theta);
    }

    #[test]
    fn without_arma_terms_matches_least_squares() {
        let n = 120;
        let raw = normals(51, n * 3, 1.0);
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![raw[3 * i] * 100.0, raw[3 * i + 1], 5.0]).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.03 * x[i][0] - 2.0 * x[i][1] + raw[3 * i + 2] + 0.1 * i as f64)
            .collect();
        for d in [0, 1, 2] {
            let fit = fit_arimax(&y, Some(&x), ArimaxOrder::new(0, d, 0), settings()).unwrap();
            let w = difference(&y, d).unwrap();
            let xd = difference_rows(&x, d);
            let crate::regressors::FittedRegressor::Linear(ols) = crate::regressors::fit_linear(&xd, &w).unwrap() else {
                unreachable!()
            };
            assert!((fit.intercept - ols.intercept).abs() < 1e-6, "d={d}");
            for (a, b) in fit.beta.iter().zip(&ols.coefficients) {
                assert!((a - b).abs() < 1e-6, "d={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn optimum_never_worse_than_zero_start() {
        let e = normals(61, 200, 1.0);
        let y: Vec<f64> = (0..200).map(|t| (t as f64 * 0.1).sin() * 3.0 + e[t]).collect();
        for order in [ArimaxOrder::new(1, 1, 1), ArimaxOrder::new(2, 0, 2), ArimaxOrder::new(0, 5, 1)] {
            let fit = fit_arimax(&y, None, order, settings()).unwrap();
            let w = difference(&y, order.d).unwrap();
            let mean = w[order.p..].iter().sum::<f64>() / (w.len() - order.p) as f64;
            let start: f64 = w[order.p..].iter().map(|v| (v - mean).powi(2)).sum();
            assert!(fit.css <= start * (1.0 + 1e-12), "{order:?}");
            assert!(fit.css >= 0.0 && fit.sigma2 >= 0.0);
        }
    }

    #[test]
    fn level_shift_equivariance() {
        let e = normals(71, 150, 0.3);
        let y: Vec<f64> = (0..150).map(|t| 40.0 + 0.02 * t as f64 + e[t]).collect();
        let x: Vec<Vec<f64>> = normals(72, 151, 1.0).into_iter().map(|v| vec![v]).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 7.0).collect();
        for order in [ArimaxOrder::new(0, 1, 1), ArimaxOrder::new(1, 2, 0)] {
            let a = fit_arimax(&y, Some(&x[..150]), order, settings()).unwrap();
            let b = fit_arimax(&shifted, Some(&x[..150]), order, settings()).unwrap();
            let fa = forecast(&a, 1, Some(&x[150..])).unwrap();
            let fb = forecast(&b, 1, Some(&x[150..])).unwrap();
            assert!((fb[0] - fa[0] - 7.0).abs() < 1e-6, "{order:?}: {fa:?} {fb:?}");
        }
    }

    #[test]
    fn literal_default_order_runs() {
        assert_eq!(ArimaxOrder::default(), ArimaxOrder::new(0, 5, 1));
        assert!(ArimaxOrder::default().is_unusual());
        let y: Vec<f64> = (0..60).map(|t| 30.0 + 0.1 * t as f64 + ((t * 7) % 5) as f64 * 0.01).collect();
        let fit = fit_arimax(&y, None, ArimaxOrder::default(), settings()).unwrap();
        assert_eq!(fit.last_values.len(), 5);
        assert_eq!(fit.last_residuals.len(), 1);
        assert!(forecast(&fit, 2, None).unwrap().iter().all(|v| v.is_finite()));
    }
}
