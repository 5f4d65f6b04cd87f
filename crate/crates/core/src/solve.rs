//! Small numerical kernels shared by the fitting and design modules.

use nalgebra::{DMatrix, DVector};

/// Outcome of a bracketed bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BisectError {
    /// f(lo) and f(hi) have the same sign.
    NoSignChange { f_lo: f64, f_hi: f64 },
    /// f evaluated to NaN.
    NotANumber { x: f64 },
}

/// Bisection on `[lo, hi]` until `|f(x)| <= f_tol` or the bracket collapses
/// to adjacent floats.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, f_tol: f64) -> Result<Root, BisectError>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.is_nan() {
        return Err(BisectError::NotANumber { x: lo });
    }
    if f_hi.is_nan() {
        return Err(BisectError::NotANumber { x: hi });
    }
    if f_lo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(BisectError::NoSignChange { f_lo, f_hi });
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.is_nan() {
            return Err(BisectError::NotANumber { x: mid });
        }
        if f_mid.abs() <= f_tol || mid <= lo || mid >= hi {
            return Ok(Root { x: mid, residual: f_mid, iterations });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which the fit is converged.
    pub cost_tol: f64,
    /// Relative step size below which the fit is converged.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, cost_tol: 1e-15, step_tol: 1e-13, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// (JᵀJ)⁻¹ at the solution, when it is well defined.
    pub jtj_inverse: Option<DMatrix<f64>>,
}

/// Damped Gauss-Newton (Levenberg-Marquardt) with Marquardt column scaling.
///
/// Each step solves the augmented least-squares system `[J·S⁻¹; √λ·I] δ' = [-r; 0]`
/// by QR, so the normal equations are never formed.
pub fn levenberg_marquardt<R, J>(residual: R, jacobian: J, x0: DVector<f64>, opts: LmOptions) -> LmOutcome
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut r = residual(&x);
    let mut cost = r.norm_squared();
    let mut damping = opts.initial_damping;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&x);
        let m = jac.nrows();
        let scale = DVector::from_iterator(n, (0..n).map(|j| {
            let s = jac.column(j).norm();
            if s > 0.0 { s } else { 1.0 }
        }));
        let mut scaled = jac.clone();
        for j in 0..n {
            scaled.column_mut(j).scale_mut(1.0 / scale[j]);
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut aug = DMatrix::zeros(m + n, n);
            aug.view_mut((0, 0), (m, n)).copy_from(&scaled);
            for j in 0..n {
                aug[(m + j, j)] = damping.sqrt();
            }
            let mut rhs = DVector::zeros(m + n);
            rhs.rows_mut(0, m).copy_from(&(-&r));
            let Some(step_scaled) = lstsq_qr(aug, rhs) else {
                damping *= 10.0;
                continue;
            };
            let step = step_scaled.component_div(&scale);
            let trial = &x + &step;
            let r_trial = residual(&trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial <= cost {
                let x_scaled_norm = x.component_mul(&scale).norm();
                let small_step = step_scaled.norm() <= opts.step_tol * (x_scaled_norm + opts.step_tol);
                let small_gain = cost - cost_trial <= opts.cost_tol * cost;
                x = trial;
                r = r_trial;
                cost = cost_trial;
                damping = (damping * 0.3).max(1e-12);
                converged = cost == 0.0 || small_step || small_gain;
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No descent direction left at any damping: the cost is at a
            // floating-point minimum.
            converged = true;
        }
    }

    let jtj_inverse = {
        let jac = jacobian(&x);
        let jtj = jac.transpose() * &jac;
        jtj.try_inverse()
    };
    LmOutcome { params: x, residuals: r, cost, iterations, converged, jtj_inverse }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns the best abscissa and value seen.
pub fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Least squares `min |A x - b|` by Householder QR. Returns `None` when A is
/// numerically rank deficient.
pub fn lstsq_qr(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    if a.nrows() < n {
        return None;
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..n).any(|i| r[(i, i)].abs() <= max_diag * 1e-13) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb.rows(0, n).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_peak() {
        let (x, y) = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 80);
        assert!((x - 0.3).abs() < 1e-8 && y <= 0.0);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let root = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((root.x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bisect_reports_no_sign_change() {
        assert!(matches!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9), Err(BisectError::NoSignChange { .. })));
    }

    #[test]
    fn bisect_endpoint_root() {
        assert_eq!(bisect(|x| x, 0.0, 1.0, 0.0).unwrap().x, 0.0);
    }

    #[test]
    fn lstsq_detects_rank_deficiency() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(lstsq_qr(a, DVector::from_vec(vec![1.0, 2.0, 3.0])).is_none());
    }

    #[test]
    fn lm_fits_exponential() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.5 * (-1.3 * t).exp()).collect();
        let res = |p: &DVector<f64>| DVector::from_iterator(ts.len(), ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y));
        let jac = |p: &DVector<f64>| {
            let mut j = DMatrix::zeros(ts.len(), 2);
            for (i, t) in ts.iter().enumerate() {
                let e = (-p[1] * t).exp();
                j[(i, 0)] = e;
                j[(i, 1)] = -p[0] * t * e;
            }
            j
        };
        let out = levenberg_marquardt(res, jac, DVector::from_vec(vec![1.0, 0.5]), LmOptions::default());
        assert!(out.converged);
        assert!((out.params[0] - 2.5).abs() < 1e-10);
        assert!((out.params[1] - 1.3).abs() < 1e-10);
    }
}
