use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::solve::golden_section_max;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodogramOptions {
    /// Variance fraction above which the dominant period is flagged as an artifact.
    pub artifact_threshold: f64,
    /// Frequency grid points per 1/window.
    pub oversampling: usize,
}

impl Default for PeriodogramOptions {
    fn default() -> Self {
        Self { artifact_threshold: 0.25, oversampling: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodogramReport {
    /// None when the residuals have no variance.
    pub dominant_period: Option<f64>,
    /// Fraction of the residual variance explained by a sinusoid at the dominant period.
    pub variance_fraction: f64,
    pub artifact: bool,
}

pub const MIN_PERIODOGRAM_SAMPLES: usize = 16;

/// Fraction of variance explained by the least-squares fit of
/// `c + A·cos(2πfx) + B·sin(2πfx)`.
fn explained_fraction(x: &[f64], r: &[f64], total: f64, freq: f64) -> f64 {
    let w = 2.0 * PI * freq;
    let mut m = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (&xi, &ri) in x.iter().zip(r) {
        let (s, c) = (w * xi).sin_cos();
        let basis = Vector3::new(1.0, c, s);
        m += basis * basis.transpose();
        b += basis * ri;
    }
    let Some(chol) = m.cholesky() else { return 0.0 };
    let coef = chol.solve(&b);
    // explained sum of squares above the mean: coefᵀb - n·mean²
    let n = x.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let explained = coef.dot(&b) - n * mean * mean;
    (explained / total).clamp(0.0, 1.0)
}

/// Least-squares spectral scan of residuals on a possibly non-uniform grid.
///
/// Periods from twice the median spacing up to twice the window are scanned
/// on a frequency grid oversampled `oversampling` times per 1/window; the
/// best grid point is refined by golden-section search.
pub fn residual_periodogram(residuals: &[f64], positions: &[f64], opts: &PeriodogramOptions) -> Result<PeriodogramReport> {
    if residuals.len() != positions.len() {
        return Err(domain("residuals and positions differ in length"));
    }
    let n = residuals.len();
    if n < MIN_PERIODOGRAM_SAMPLES {
        return Err(domain(format!("periodogram needs at least {MIN_PERIODOGRAM_SAMPLES} samples, got {n}")));
    }
    let mut gaps: Vec<f64> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::Profile("degenerate spacing: positions must be strictly increasing".into()));
    }
    gaps.sort_by(f64::total_cmp);
    let median_gap = gaps[gaps.len() / 2];
    let window = positions[n - 1] - positions[0];

    // centre positions and rescale residuals for conditioning
    let x0 = 0.5 * (positions[0] + positions[n - 1]);
    let x: Vec<f64> = positions.iter().map(|p| p - x0).collect();
    let scale = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if scale == 0.0 {
        return Ok(PeriodogramReport { dominant_period: None, variance_fraction: 0.0, artifact: false });
    }
    let r: Vec<f64> = residuals.iter().map(|v| v / scale).collect();
    let mean = r.iter().sum::<f64>() / n as f64;
    let total: f64 = r.iter().map(|v| (v - mean).powi(2)).sum();
    if total <= 0.0 {
        return Ok(PeriodogramReport { dominant_period: None, variance_fraction: 0.0, artifact: false });
    }

    let f_min = 1.0 / (2.0 * window);
    let f_max = 1.0 / (2.0 * median_gap);
    let df = 1.0 / (window * opts.oversampling.max(1) as f64);
    let steps = ((f_max - f_min) / df).floor() as usize;
    let mut best = (f_min, explained_fraction(&x, &r, total, f_min));
    for k in 1..=steps {
        let f = f_min + k as f64 * df;
        let p = explained_fraction(&x, &r, total, f);
        if p > best.1 {
            best = (f, p);
        }
    }

    // golden-section refinement within one grid step
    let (a, b) = ((best.0 - df).max(f_min), (best.0 + df).min(f_max));
    let (f_ref, p_ref) = golden_section_max(|f| explained_fraction(&x, &r, total, f), a, b, 60);
    let (freq, fraction) = if p_ref >= best.1 { (f_ref, p_ref) } else { best };
    Ok(PeriodogramReport {
        dominant_period: Some(1.0 / freq),
        variance_fraction: fraction,
        artifact: fraction > opts.artifact_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{NM, UM};

    fn grid(n: usize, window: f64) -> Vec<f64> {
        (0..n).map(|i| -0.5 * window + window * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn pure_sinusoid() {
        let x = grid(401, 100.0 * UM);
        let r: Vec<f64> = x.iter().map(|x| NM * (2.0 * PI * x / (50.0 * UM) + 0.3).sin()).collect();
        let rep = residual_periodogram(&r, &x, &PeriodogramOptions::default()).unwrap();
        let p = rep.dominant_period.unwrap();
        assert!(((p - 50.0 * UM) / (50.0 * UM)).abs() < 0.05, "{p}");
        assert!(rep.variance_fraction > 0.9);
        assert!(rep.artifact);
    }

    #[test]
    fn zero_residuals() {
        let x = grid(64, 100.0 * UM);
        let rep = residual_periodogram(&[0.0; 64], &x, &PeriodogramOptions::default()).unwrap();
        assert_eq!(rep.dominant_period, None);
        assert!(!rep.artifact);
    }

    #[test]
    fn argument_checks() {
        let x = grid(10, 1.0);
        assert!(residual_periodogram(&[1.0; 10], &x, &PeriodogramOptions::default()).is_err());
        let mut x = grid(20, 1.0);
        x[5] = x[4];
        assert!(residual_periodogram(&[1.0; 20], &x, &PeriodogramOptions::default()).is_err());
    }
}
