//! Parameter estimation and model predictions.
//!
//! Three fit families are exposed: the saturating conversion curve
//! `T(P) = 1 - A sin^2(sqrt(eta P))`, background polynomials, and the
//! transmittance ratio. The curve fit is a damped Gauss-Newton
//! (Levenberg-Marquardt) solver: the step solves
//! `(J^T J + lambda diag(J^T J)) dp = -J^T r`, lambda starts at 1e-3, is
//! divided by 10 after an accepted step and multiplied by 10 after a
//! rejected one. Iteration stops when every parameter moves by less than
//! 1e-10 relative, or after 100 iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::detection::VisibilityEstimate;
use crate::error::{check_non_negative, Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const RELATIVE_STEP_TOL: f64 = 1e-10;
/// Upper bound accepted for the fitted saturation.
pub const SATURATION_MAX: f64 = 1.05;
/// Points with a conversion efficiency at or below this are skipped by
/// [`transmittance_ratio`].
pub const MIN_CONVERSION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// One-sigma uncertainties, scaled by the reduced chi-square.
    pub sigmas: Vec<f64>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted iteration, starting from the initial guess.
    pub objective_trace: Vec<f64>,
    /// Unweighted residuals `observed - model`.
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.sigmas[i])
    }

    /// Parameters from a non-converged fit are not to be trusted.
    pub fn is_reliable(&self) -> bool {
        self.converged
    }
}

/// `T(P) = 1 - A sin^2(sqrt(eta P))`.
pub fn conversion_model(saturation: f64, coupling: f64, pump: f64) -> f64 {
    let s = (coupling * pump).sqrt().sin();
    1.0 - saturation * s * s
}

/// Analytic gradient of [`conversion_model`] with respect to `(A, eta)`.
pub fn conversion_model_gradient(saturation: f64, coupling: f64, pump: f64) -> [f64; 2] {
    let x = (coupling * pump).sqrt();
    let d_a = -x.sin().powi(2);
    // d/d eta of sin^2(x) = sin(2x) * P / (2x); the ratio tends to P as x -> 0.
    let sinc_term = if x > 0.0 {
        (2.0 * x).sin() / (2.0 * x)
    } else {
        1.0
    };
    let d_eta = -saturation * sinc_term * pump;
    [d_a, d_eta]
}

/// Fits `1 - A sin^2(sqrt(eta P))` to `(P, T_obs)` points.
///
/// `weights` defaults to Poisson inverse variance, `1 / max(T_obs, 1e-3)`.
/// A run that exhausts [`MAX_ITERATIONS`] returns with `converged = false`.
pub fn fit_conversion_curve(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::Underdetermined {
            points: points.len(),
            params: 2,
        });
    }
    for &(p, t) in points {
        check_non_negative("pump_power", p)?;
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite T at P = {p}")));
        }
    }
    if points.iter().all(|&(p, _)| p == 0.0) {
        return Err(Error::DegenerateData("all pump powers are zero".into()));
    }
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() != points.len() => {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} points",
                w.len(),
                points.len()
            )))
        }
        Some(w) => {
            if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidArgument(
                    "weights must be finite and non-negative".into(),
                ));
            }
            w.to_vec()
        }
        None => points.iter().map(|&(_, t)| 1.0 / t.max(1e-3)).collect(),
    };

    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t_min = sorted.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let a0 = 1.0 - t_min;
    if !(a0 > 0.0) {
        return Err(Error::DegenerateData(
            "no point shows conversion (min T >= 1)".into(),
        ));
    }
    let a0 = a0.min(SATURATION_MAX);
    let knee = sorted
        .iter()
        .find(|&&(p, t)| p > 0.0 && t < 1.0 - a0 / 2.0)
        .or_else(|| sorted.iter().find(|&&(p, t)| p > 0.0 && t <= t_min))
        .map(|p| p.0)
        .ok_or_else(|| Error::DegenerateData("cannot locate the efficiency knee".into()))?;
    let eta0 = std::f64::consts::FRAC_PI_4.powi(2) / knee;

    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let eval = |theta: [f64; 2]| -> (DVector<f64>, DMatrix<f64>) {
        let n = points.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 2);
        for (i, &(p, t)) in points.iter().enumerate() {
            r[i] = sqrt_w[i] * (conversion_model(theta[0], theta[1], p) - t);
            let g = conversion_model_gradient(theta[0], theta[1], p);
            j[(i, 0)] = sqrt_w[i] * g[0];
            j[(i, 1)] = sqrt_w[i] * g[1];
        }
        (r, j)
    };
    let feasible = |theta: [f64; 2]| theta[0] > 0.0 && theta[0] <= SATURATION_MAX && theta[1] > 0.0;

    let mut theta = [a0, eta0];
    let (mut r, mut jac) = eval(theta);
    let mut cost = r.norm_squared();
    let mut trace = vec![cost];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jt = jac.transpose();
        let h = &jt * &jac;
        let g = &jt * &r;
        let mut accepted = None;
        while lambda < 1e16 {
            let mut damped = h.clone();
            for k in 0..2 {
                damped[(k, k)] += lambda * h[(k, k)].max(1e-300);
            }
            let step = damped.lu().solve(&(-&g));
            if let Some(step) = step {
                let trial = [theta[0] + step[0], theta[1] + step[1]];
                if feasible(trial) {
                    let (tr, tj) = eval(trial);
                    let tcost = tr.norm_squared();
                    if tcost < cost {
                        accepted = Some((trial, step, tr, tj, tcost));
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        match accepted {
            Some((trial, step, tr, tj, tcost)) => {
                let small = (0..2).all(|k| step[k].abs() <= RELATIVE_STEP_TOL * trial[k].abs());
                theta = trial;
                r = tr;
                jac = tj;
                cost = tcost;
                trace.push(cost);
                lambda = (lambda / 10.0).max(1e-15);
                if small {
                    converged = true;
                    break;
                }
            }
            None => {
                // No damping level lowers the objective: stationary to
                // machine precision.
                converged = true;
                break;
            }
        }
    }

    let n = points.len();
    let dof = n.saturating_sub(2).max(1) as f64;
    let scale = cost / dof;
    let cov = (jac.transpose() * &jac).try_inverse();
    let sigmas = match cov {
        Some(c) => vec![
            (c[(0, 0)] * scale).max(0.0).sqrt(),
            (c[(1, 1)] * scale).max(0.0).sqrt(),
        ],
        None => vec![f64::NAN, f64::NAN],
    };
    let residuals = points
        .iter()
        .map(|&(p, t)| t - conversion_model(theta[0], theta[1], p))
        .collect();
    Ok(FitResult {
        names: vec!["saturation".into(), "coupling_per_mw".into()],
        values: theta.to_vec(),
        sigmas,
        rss: cost,
        converged,
        iterations,
        objective_trace: trace,
        residuals,
    })
}

/// Least-squares polynomial `sum_k c_k x^k` of the given degree, constrained
/// to be non-negative at every sampled `x`.
///
/// The unconstrained solution is returned when it already satisfies the
/// constraint; otherwise a primal active-set QP starting from the zero
/// polynomial is solved. Abscissae are scaled to `[-1, 1]` internally.
pub fn fit_noise_polynomial(points: &[(f64, f64)], degree: usize) -> Result<FitResult> {
    let n_params = degree + 1;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < n_params {
        return Err(Error::Underdetermined {
            points: xs.len(),
            params: n_params,
        });
    }
    if points
        .iter()
        .any(|&(x, d)| !(x.is_finite() && d.is_finite()))
    {
        return Err(Error::InvalidArgument("non-finite noise data".into()));
    }
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let row = |x: f64| -> Vec<f64> {
        let u = x / scale;
        (0..n_params).map(|k| u.powi(k as i32)).collect()
    };

    let n = points.len();
    let v = DMatrix::from_fn(n, n_params, |i, k| row(points[i].0)[k]);
    let d = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let h = v.transpose() * &v;
    let g0 = -(v.transpose() * &d);

    let constraints = DMatrix::from_fn(xs.len(), n_params, |i, k| row(xs[i])[k]);
    let tol = 1e-12 * (1.0 + d.amax());

    let unconstrained = h
        .clone()
        .cholesky()
        .map(|c| c.solve(&(-&g0)))
        .ok_or_else(|| Error::DegenerateData("singular polynomial normal equations".into()))?;
    let b = if (&constraints * &unconstrained).min() >= -tol {
        unconstrained
    } else {
        active_set_qp(&h, &g0, &constraints, tol)?
    };

    let fitted = &v * &b;
    let resid: DVector<f64> = &d - &fitted;
    let rss = resid.norm_squared();
    let dof = n.saturating_sub(n_params);
    let s2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let h_inv = h
        .try_inverse()
        .ok_or_else(|| Error::DegenerateData("singular polynomial normal equations".into()))?;
    let values: Vec<f64> = (0..n_params).map(|k| b[k] / scale.powi(k as i32)).collect();
    let sigmas: Vec<f64> = (0..n_params)
        .map(|k| (h_inv[(k, k)] * s2).max(0.0).sqrt() / scale.powi(k as i32))
        .collect();
    Ok(FitResult {
        names: (0..n_params).map(|k| format!("c{k}")).collect(),
        values,
        sigmas,
        rss,
        converged: true,
        iterations: 0,
        objective_trace: vec![rss],
        residuals: resid.iter().copied().collect(),
    })
}

/// Minimises `1/2 b^T H b + g^T b` subject to `A b >= 0`, from the feasible
/// start `b = 0`.
fn active_set_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let p = h.nrows();
    let mut b = DVector::zeros(p);
    let mut working: Vec<usize> = Vec::new();
    for _ in 0..(50 * (a.nrows() + p)) {
        let grad = h * &b + g;
        let m = working.len();
        let mut kkt = DMatrix::zeros(p + m, p + m);
        kkt.view_mut((0, 0), (p, p)).copy_from(h);
        for (i, &c) in working.iter().enumerate() {
            for k in 0..p {
                kkt[(k, p + i)] = -a[(c, k)];
                kkt[(p + i, k)] = a[(c, k)];
            }
        }
        let mut rhs = DVector::zeros(p + m);
        rhs.rows_mut(0, p).copy_from(&(-&grad));
        let sol = kkt.lu().solve(&rhs).ok_or_else(|| {
            Error::DegenerateData("singular constrained polynomial system".into())
        })?;
        let step = sol.rows(0, p).into_owned();
        if step.amax() <= 1e-12 * (1.0 + b.amax()) {
            let multipliers = sol.rows(p, m);
            match multipliers
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
            {
                Some((i, &mu)) if mu < -tol => {
                    working.remove(i);
                }
                _ => return Ok(b),
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for c in 0..a.nrows() {
                if working.contains(&c) {
                    continue;
                }
                let ap = a.row(c).dot(&step.transpose());
                if ap < 0.0 {
                    let ab = a.row(c).dot(&b.transpose());
                    let limit = (-ab / ap).max(0.0);
                    if limit < alpha {
                        alpha = limit;
                        blocking = Some(c);
                    }
                }
            }
            b += alpha * &step;
            if let Some(c) = blocking {
                working.push(c);
            }
        }
    }
    Err(Error::FitNotConverged {
        iterations: 50 * (a.nrows() + p),
    })
}

/// `V = S / (S + 2 d)` with `S = alpha2 * T_all * f_clock`.
pub fn predict_visibility(
    alpha2: f64,
    overall_transmittance: f64,
    clock_hz: f64,
    noise_cps: f64,
) -> Result<f64> {
    check_non_negative("alpha2", alpha2)?;
    check_non_negative("overall_transmittance", overall_transmittance)?;
    check_non_negative("clock_hz", clock_hz)?;
    check_non_negative("noise_cps", noise_cps)?;
    let s = alpha2 * overall_transmittance * clock_hz;
    let denom = s + 2.0 * noise_cps;
    if denom <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(s / denom)
}

/// Visibility after subtracting `background` from both extremes. A
/// background above `n_min` is clipped to `n_min`.
pub fn net_visibility(n_max: f64, n_min: f64, background: f64) -> Result<VisibilityEstimate> {
    check_non_negative("n_max", n_max)?;
    check_non_negative("n_min", n_min)?;
    check_non_negative("background", background)?;
    let b = if background > n_min {
        log::warn!("background {background} exceeds N_min {n_min}; clipping");
        n_min
    } else {
        background
    };
    let denom = n_max + n_min - 2.0 * b;
    if denom <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    let visibility = (n_max - n_min) / denom;
    // Delta method with independent Poisson N_max, N_min and a known background.
    let d2 = denom * denom;
    let dv_dmax = 2.0 * (n_min - b) / d2;
    let dv_dmin = -2.0 * (n_max - b) / d2;
    let sigma = (n_max * dv_dmax * dv_dmax + n_min * dv_dmin * dv_dmin).sqrt();
    Ok(VisibilityEstimate {
        visibility,
        sigma,
        n_max,
        n_min,
    })
}

/// `T_T / T_V` per pump point from visible and telecom counts and the
/// zero-pump visible count `c0`: `ratio = telecom / (c0 R)` with
/// `R = 1 - visible / c0`. Points with `P <= 0` or `R <= MIN_CONVERSION`
/// are skipped.
pub fn transmittance_ratio(points: &[(f64, f64, f64)], c0: f64) -> Result<Vec<(f64, f64)>> {
    if !(c0 > 0.0) {
        return Err(Error::Domain {
            name: "c0",
            value: c0,
            domain: "(0, inf)",
        });
    }
    let mut out = Vec::with_capacity(points.len());
    for &(pump, visible, telecom) in points {
        check_non_negative("visible_counts", visible)?;
        check_non_negative("telecom_counts", telecom)?;
        let r = 1.0 - visible / c0;
        if pump <= 0.0 || r <= MIN_CONVERSION {
            log::info!(
                "skipping P = {pump} mW: conversion efficiency {r:.3e} too small for a ratio"
            );
            continue;
        }
        out.push((pump, telecom / (c0 * r)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn calibrated_points(pumps: &[f64]) -> Vec<(f64, f64)> {
        pumps
            .iter()
            .map(|&p| (p, conversion_model(0.94, 0.0044, p)))
            .collect()
    }

    fn pump_grid() -> Vec<f64> {
        (0..10).map(|k| 70.0 * k as f64).collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let fit = fit_conversion_curve(&calibrated_points(&pump_grid()), None).unwrap();
        assert!(fit.converged);
        assert!((fit.get("saturation").unwrap() - 0.94).abs() < 1e-9);
        assert!((fit.get("coupling_per_mw").unwrap() - 0.0044).abs() < 1e-9 * 0.0044);
    }

    #[test]
    fn objective_decreases_monotonically() {
        let pts: Vec<(f64, f64)> = calibrated_points(&pump_grid())
            .into_iter()
            .enumerate()
            .map(|(i, (p, t))| (p, t + 0.004 * ((i * 7 % 5) as f64 - 2.0)))
            .collect();
        let fit = fit_conversion_curve(&pts, None).unwrap();
        assert!(fit.converged);
        assert!(fit.objective_trace.len() >= 2);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(fit.sigmas.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn pump_in_watts_rescales_coupling() {
        let pts: Vec<(f64, f64)> = calibrated_points(&pump_grid())
            .into_iter()
            .enumerate()
            .map(|(i, (p, t))| (p, t + 0.003 * ((i * 3 % 4) as f64 - 1.5)))
            .collect();
        let watts: Vec<(f64, f64)> = pts.iter().map(|&(p, t)| (p / 1000.0, t)).collect();
        let mw = fit_conversion_curve(&pts, None).unwrap();
        let w = fit_conversion_curve(&watts, None).unwrap();
        assert!((w.values[0] - mw.values[0]).abs() < 1e-9);
        assert!((w.values[1] / mw.values[1] / 1000.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        for &(a, eta) in &[(0.94, 0.0044), (0.5, 0.01), (1.0, 0.002)] {
            for &p in &[0.0, 1.0, 50.0, 165.0, 560.0, 700.0] {
                let g = conversion_model_gradient(a, eta, p);
                let ha = 1e-6 * a;
                let he = 1e-6 * eta;
                let fd_a = (conversion_model(a + ha, eta, p) - conversion_model(a - ha, eta, p))
                    / (2.0 * ha);
                let fd_e = (conversion_model(a, eta + he, p) - conversion_model(a, eta - he, p))
                    / (2.0 * he);
                for (an, fd) in [(g[0], fd_a), (g[1], fd_e)] {
                    let scale = an.abs().max(fd.abs());
                    if scale > 1e-12 {
                        assert!(
                            (an - fd).abs() <= 1e-6 * scale,
                            "a={a} eta={eta} P={p}: {an} vs {fd}"
                        );
                    } else {
                        assert!(fd.abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let zeros = vec![(0.0, 1.0); 5];
        assert!(matches!(
            fit_conversion_curve(&zeros, None),
            Err(Error::DegenerateData(_))
        ));
        assert!(fit_conversion_curve(&[(0.0, 1.0), (100.0, 0.7)], None).is_err());
        let flat: Vec<(f64, f64)> = pump_grid().into_iter().map(|p| (p, 1.0)).collect();
        assert!(fit_conversion_curve(&flat, None).is_err());
        let pts = calibrated_points(&pump_grid());
        assert!(fit_conversion_curve(&pts, Some(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn explicit_weights_are_used() {
        let pts = calibrated_points(&pump_grid());
        let fit = fit_conversion_curve(&pts, Some(&vec![1.0; pts.len()])).unwrap();
        assert!((fit.values[0] - 0.94).abs() < 1e-9);
    }

    #[test]
    fn polynomial_constant_data_gives_mean() {
        let pts = [(0.0, 3.0), (1.0, 5.0), (2.0, 4.0), (3.0, 8.0)];
        let fit = fit_noise_polynomial(&pts, 0).unwrap();
        assert!((fit.values[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_exact_quadratic() {
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let x = 100.0 * k as f64;
                (x, 0.2 + 0.001 * x + 6.4e-6 * x * x)
            })
            .collect();
        let fit = fit_noise_polynomial(&pts, 2).unwrap();
        assert!((fit.values[0] - 0.2).abs() < 1e-9);
        assert!((fit.values[1] - 0.001).abs() < 1e-9);
        assert!((fit.values[2] - 6.4e-6).abs() < 1e-9);
    }

    #[test]
    fn polynomial_underdetermined() {
        assert!(matches!(
            fit_noise_polynomial(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)], 2),
            Err(Error::Underdetermined {
                points: 2,
                params: 3
            })
        ));
    }

    #[test]
    fn polynomial_is_non_negative_at_samples() {
        // Unconstrained line through this data dips below zero at x = 0.
        let pts = [
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (3.0, 0.0),
            (4.0, 10.0),
            (5.0, 20.0),
        ];
        let fit = fit_noise_polynomial(&pts, 1).unwrap();
        for &(x, _) in &pts {
            let y = fit.values[0] + fit.values[1] * x;
            assert!(y >= -1e-9, "p({x}) = {y}");
        }
        // Constrained optimum of a line: it must touch zero at x = 0.
        assert!(fit.values[0].abs() < 1e-9);
    }

    #[test]
    fn constrained_fit_is_kkt_optimal() {
        // Brute force over the line family c0 + c1 x with c0 >= 0 and
        // c0 + 5 c1 >= 0: the optimum is on c0 = 0, where c1 is the
        // one-dimensional least squares slope.
        let pts = [
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (3.0, 0.0),
            (4.0, 10.0),
            (5.0, 20.0),
        ];
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let fit = fit_noise_polynomial(&pts, 1).unwrap();
        assert!((fit.values[1] - sxy / sxx).abs() < 1e-9);
    }

    #[test]
    fn visibility_prediction_examples() {
        assert_eq!(predict_visibility(0.1, 0.015, 1e6, 0.0).unwrap(), 1.0);
        let v = predict_visibility(0.1, 0.015, 1e6, 15.3).unwrap();
        assert!((v - 0.98).abs() < 5e-4, "{v}");
        assert_eq!(predict_visibility(0.0, 0.015, 1e6, 3.0).unwrap(), 0.0);
        assert!(predict_visibility(1e-9, 0.015, 1e6, 3.0).unwrap() < 1e-4);
        assert!(matches!(
            predict_visibility(0.0, 0.0, 1e6, 0.0),
            Err(Error::UndefinedVisibility)
        ));
        assert!(predict_visibility(-0.1, 0.015, 1e6, 1.0).is_err());
    }

    #[test]
    fn net_visibility_examples() {
        let raw = crate::detection::visibility_from_extremes(1000.0, 60.0).unwrap();
        let net = net_visibility(1000.0, 60.0, 0.0).unwrap();
        assert_eq!(net.visibility, raw.visibility);
        assert!((net.sigma - raw.sigma).abs() < 1e-15);
        assert_eq!(net_visibility(1000.0, 60.0, 60.0).unwrap().visibility, 1.0);
        assert_eq!(net_visibility(1000.0, 60.0, 80.0).unwrap().visibility, 1.0);
        assert!(net_visibility(10.0, 10.0, 10.0).is_err());
        // Raw 0.88 with most of N_min being background.
        let (n_max, n_min) = (940.0, 60.0);
        assert!(
            (crate::detection::visibility_from_extremes(n_max, n_min)
                .unwrap()
                .visibility
                - 0.88)
                .abs()
                < 1e-12
        );
        assert!(net_visibility(n_max, n_min, 58.0).unwrap().visibility > 0.98);
    }

    #[test]
    fn ratio_examples() {
        let c0 = 3000.0;
        let pts: Vec<(f64, f64, f64)> = [0.0, 20.0, 165.0, 560.0]
            .iter()
            .map(|&p| {
                let t = conversion_model(0.94, 0.0044, p);
                (p, c0 * t, 1.5 * c0 * (1.0 - t))
            })
            .collect();
        let ratios = transmittance_ratio(&pts, c0).unwrap();
        assert_eq!(ratios.len(), 3);
        for (_, r) in ratios {
            assert!((r - 1.5).abs() < 1e-9);
        }
        assert!(transmittance_ratio(&pts, 0.0).is_err());
        assert!(transmittance_ratio(&[(10.0, 3000.0, 5.0)], 3000.0)
            .unwrap()
            .is_empty());
    }

    proptest! {
        #[test]
        fn predicted_visibility_is_monotone(
            a in 1e-4..1.0f64, da in 1e-4..1.0f64, t in 1e-3..0.1f64, d in 0.1..100.0f64, dd in 0.1..10.0f64,
        ) {
            let v = predict_visibility(a, t, 1e6, d).unwrap();
            prop_assert!(predict_visibility(a + da, t, 1e6, d).unwrap() > v);
            prop_assert!(predict_visibility(a, t, 1e6, d + dd).unwrap() < v);
        }
    }
}
