use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{rms_roughness, SurfaceProfile};
use crate::error::{domain, Error, Result};
use crate::optics::Curvature;
use crate::solve::{levenberg_marquardt, lstsq_qr, LmOptions};
use crate::units::NM;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitModel {
    Circle {
        center_x: f64,
        center_z: f64,
        radius: f64,
    },
    /// Used when the profile is too flat for a circle fit; the curvature is
    /// taken from the quadratic coefficient.
    Parabola {
        roc: Curvature,
        /// z = c0 + c1·x + c2·x² in metres.
        coefficients: [f64; 3],
    },
    /// Legendre-series coefficients in t = (x - center)/half_width.
    Polynomial {
        degree: usize,
        coefficients: Vec<f64>,
        center: f64,
        half_width: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    /// Signed orthogonal distances for circles, vertical residuals otherwise [m].
    pub residuals: Vec<f64>,
    pub rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn from_residuals(model: FitModel, residuals: Vec<f64>) -> Result<Self> {
        let rms = rms_roughness(&residuals)?;
        Ok(Self { model, residuals, rms, converged: true, iterations: 0 })
    }

    /// Radius of curvature of the fitted figure, when the model has one.
    pub fn roc(&self) -> Option<Curvature> {
        match &self.model {
            FitModel::Circle { radius, .. } => Some(Curvature::Radius(*radius)),
            FitModel::Parabola { roc, .. } => Some(*roc),
            FitModel::Polynomial { .. } => None,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.model, FitModel::Parabola { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleFitOptions {
    /// A-priori height noise of the instrument [m].
    pub noise_floor: f64,
    /// Circle fitting needs a sag of at least this many noise floors across
    /// the window; flatter data gets the parabola fallback.
    pub min_sag_ratio: f64,
    pub max_iterations: usize,
}

impl Default for CircleFitOptions {
    fn default() -> Self {
        Self { noise_floor: 0.3 * NM, min_sag_ratio: 10.0, max_iterations: 100 }
    }
}

/// Centre and half-width used to map positions onto [-1, 1].
fn normalization(profile: &SurfaceProfile) -> (f64, f64) {
    let x = profile.positions();
    let (lo, hi) = (x[0], x[x.len() - 1]);
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

fn legendre_row(t: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = t;
    }
    for n in 1..degree {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * t * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

fn legendre_fit(t: &[f64], z: &[f64], degree: usize) -> Result<DVector<f64>> {
    let m = t.len();
    let mut a = DMatrix::zeros(m, degree + 1);
    let mut row = vec![0.0; degree + 1];
    for (i, &ti) in t.iter().enumerate() {
        legendre_row(ti, degree, &mut row);
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    lstsq_qr(a, DVector::from_column_slice(z))
        .ok_or_else(|| Error::RankDeficient(format!("degree {degree} basis on {m} samples")))
}

fn legendre_eval(coefficients: &[f64], t: f64) -> f64 {
    let mut row = vec![0.0; coefficients.len()];
    legendre_row(t, coefficients.len() - 1, &mut row);
    row.iter().zip(coefficients).map(|(p, c)| p * c).sum()
}

/// Least-squares polynomial of the given degree; residuals are vertical.
///
/// Positions are mapped to [-1, 1] and the fit is done in the Legendre basis
/// by Householder QR.
pub fn fit_polynomial(profile: &SurfaceProfile, degree: usize) -> Result<FitResult> {
    if degree < 1 {
        return Err(domain("polynomial degree must be at least 1"));
    }
    if profile.len() <= degree + 1 {
        return Err(domain(format!(
            "degree {degree} needs more than {} samples, got {}",
            degree + 1,
            profile.len()
        )));
    }
    let (center, half_width) = normalization(profile);
    let t: Vec<f64> = profile.positions().iter().map(|x| (x - center) / half_width).collect();
    // fit in units of the height scale so the QR sees O(1) numbers
    let scale = profile.heights().iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let z: Vec<f64> = profile.heights().iter().map(|z| z / scale).collect();
    let coef = legendre_fit(&t, &z, degree)?;
    let residuals: Vec<f64> = t
        .iter()
        .zip(&z)
        .map(|(ti, zi)| scale * (zi - legendre_eval(coef.as_slice(), *ti)))
        .collect();
    let coefficients = coef.iter().map(|c| c * scale).collect();
    FitResult::from_residuals(FitModel::Polynomial { degree, coefficients, center, half_width }, residuals)
}

/// Circle parameterised by its apex (the point whose tangent is horizontal)
/// and signed curvature; the centre is at (xa, za + 1/κ). This form stays
/// well conditioned as κ → 0.
#[derive(Debug, Clone, Copy)]
struct ApexCircle {
    xa: f64,
    za: f64,
    kappa: f64,
}

impl ApexCircle {
    fn from_vector(p: &DVector<f64>) -> Self {
        Self { xa: p[0], za: p[1], kappa: p[2] }
    }

    fn to_vector(self) -> DVector<f64> {
        DVector::from_vec(vec![self.xa, self.za, self.kappa])
    }

    /// Signed orthogonal distance, positive outside the circle.
    fn distance(self, x: f64, z: f64) -> f64 {
        let (u, v) = (x - self.xa, z - self.za);
        let p = self.kappa * (u * u + v * v) - 2.0 * v;
        p / (1.0 + (1.0 + self.kappa * p).max(0.0).sqrt())
    }

    /// Gradient of [`Self::distance`] with respect to (xa, za, κ).
    fn gradient(self, x: f64, z: f64) -> [f64; 3] {
        let (u, v) = (x - self.xa, z - self.za);
        let k = self.kappa;
        let p = k * (u * u + v * v) - 2.0 * v;
        let s = (1.0 + k * p).max(f64::MIN_POSITIVE).sqrt();
        let den = (1.0 + s) * (1.0 + s);
        let dd_dp = ((1.0 + s) - p * k / (2.0 * s)) / den;
        let dd_dk_explicit = -p * (p / (2.0 * s)) / den;
        [
            dd_dp * (-2.0 * k * u),
            dd_dp * (-2.0 * k * v + 2.0),
            dd_dp * (u * u + v * v) + dd_dk_explicit,
        ]
    }
}

/// Algebraic (Kåsa) circle through the points: x² + z² = B·x + C·z + D.
fn algebraic_circle(x: &[f64], z: &[f64]) -> Option<ApexCircle> {
    let m = x.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        a[(i, 0)] = x[i];
        a[(i, 1)] = z[i];
        a[(i, 2)] = 1.0;
        b[i] = x[i] * x[i] + z[i] * z[i];
    }
    let sol = lstsq_qr(a, b)?;
    let (xc, zc) = (0.5 * sol[0], 0.5 * sol[1]);
    let r = (sol[2] + xc * xc + zc * zc).sqrt();
    if !r.is_finite() || r == 0.0 {
        return None;
    }
    let mean_z = z.iter().sum::<f64>() / m as f64;
    // centre above the data: the apex is the lowest point
    let (kappa, za) = if zc >= mean_z { (1.0 / r, zc - r) } else { (-1.0 / r, zc + r) };
    Some(ApexCircle { xa: xc, za, kappa })
}

/// Orthogonal-distance circle fit.
///
/// Initialised from the algebraic fit and refined by damped Gauss-Newton.
/// When the sag across the window is below `min_sag_ratio × noise_floor` the
/// result is a flagged parabola fit instead.
pub fn fit_circle(profile: &SurfaceProfile, opts: &CircleFitOptions) -> Result<FitResult> {
    let (center, half_width) = normalization(profile);
    let x: Vec<f64> = profile.positions().iter().map(|x| (x - center) / half_width).collect();
    let z_mean = profile.heights().iter().sum::<f64>() / profile.len() as f64;
    let z: Vec<f64> = profile.heights().iter().map(|z| (z - z_mean) / half_width).collect();

    // quadratic coefficient gauges the sag across the half-window
    let quad = legendre_fit(&x, &z, 2)?;
    // P2(t) = (3t² - 1)/2, so the t² coefficient is 1.5·c2
    let c2 = 1.5 * quad[2];
    let sag = c2.abs() * half_width;
    if sag < opts.min_sag_ratio * opts.noise_floor {
        return parabola_fallback(profile, &x, &z, &quad, center, z_mean, half_width);
    }

    let init = algebraic_circle(&x, &z).unwrap_or(ApexCircle {
        xa: -(quad[1]) / (2.0 * c2),
        za: quad[0] - 0.5 * quad[2],
        kappa: 2.0 * c2,
    });
    let residual = |p: &DVector<f64>| {
        let c = ApexCircle::from_vector(p);
        DVector::from_iterator(x.len(), x.iter().zip(&z).map(|(&xi, &zi)| c.distance(xi, zi)))
    };
    let jacobian = |p: &DVector<f64>| {
        let c = ApexCircle::from_vector(p);
        let mut j = DMatrix::zeros(x.len(), 3);
        for (i, (&xi, &zi)) in x.iter().zip(&z).enumerate() {
            let g = c.gradient(xi, zi);
            for k in 0..3 {
                j[(i, k)] = g[k];
            }
        }
        j
    };
    let lm_opts = LmOptions { max_iterations: opts.max_iterations, ..LmOptions::default() };
    let out = levenberg_marquardt(residual, jacobian, init.to_vector(), lm_opts);
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            detail: format!(
                "algebraic initialisation: radius {:.6e} m, centre ({:.6e}, {:.6e}) m",
                half_width / init.kappa.abs(),
                center + init.xa * half_width,
                z_mean + (init.za + 1.0 / init.kappa) * half_width
            ),
        });
    }
    let c = ApexCircle::from_vector(&out.params);
    let residuals: Vec<f64> = out.residuals.iter().map(|d| d * half_width).collect();
    let mut fit = FitResult::from_residuals(
        FitModel::Circle {
            center_x: center + c.xa * half_width,
            center_z: z_mean + (c.za + 1.0 / c.kappa) * half_width,
            radius: half_width / c.kappa.abs(),
        },
        residuals,
    )?;
    fit.iterations = out.iterations;
    Ok(fit)
}

fn parabola_fallback(
    profile: &SurfaceProfile,
    t: &[f64],
    z: &[f64],
    quad: &DVector<f64>,
    center: f64,
    z_mean: f64,
    half_width: f64,
) -> Result<FitResult> {
    // Legendre → monomials in t: a0 = c0 - c2/2, a1 = c1, a2 = 1.5·c2
    let (a0, a1, a2) = (quad[0] - 0.5 * quad[2], quad[1], 1.5 * quad[2]);
    // back to physical x: z = h·(a0 + a1·t + a2·t²) + z_mean, t = (x - center)/h
    let h = half_width;
    let k2 = a2 / h;
    let k1 = a1 - 2.0 * a2 * center / h;
    let k0 = h * (a0 - a1 * center / h + a2 * center * center / (h * h)) + z_mean;
    let roc = if k2 == 0.0 { Curvature::Flat } else { Curvature::Radius(1.0 / (2.0 * k2)) };
    let residuals: Vec<f64> = t
        .iter()
        .zip(z)
        .map(|(ti, zi)| h * (zi - (a0 + a1 * ti + a2 * ti * ti)))
        .collect();
    debug_assert_eq!(residuals.len(), profile.len());
    FitResult::from_residuals(FitModel::Parabola { roc, coefficients: [k0, k1, k2] }, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::{synthesize_profile, ProfileSynthesis};
    use crate::units::{MM, UM};

    fn circle_profile(radius: f64, n: usize) -> SurfaceProfile {
        synthesize_profile(&ProfileSynthesis::circle(radius, 100.0 * UM, n, 0.0, 0))
    }

    #[test]
    fn recovers_noiseless_circle() {
        for r in [0.5 * MM, 1.0 * MM, 10.0 * MM, 100.0 * MM] {
            let fit = fit_circle(&circle_profile(r, 501), &CircleFitOptions::default()).unwrap();
            let got = fit.roc().unwrap().as_radius().unwrap();
            assert!(((got - r) / r).abs() < 1e-9, "R = {r}: {got}");
            assert!(fit.rms < 1e-15, "{}", fit.rms);
            assert!(!fit.is_fallback());
        }
    }

    #[test]
    fn convex_profile_recovered() {
        let p = circle_profile(2.0 * MM, 201);
        let flipped = SurfaceProfile::new(p.positions().to_vec(), p.heights().iter().map(|z| -z).collect()).unwrap();
        let fit = fit_circle(&flipped, &CircleFitOptions::default()).unwrap();
        let FitModel::Circle { radius, center_z, .. } = fit.model else { panic!() };
        assert!(((radius - 2.0 * MM) / MM).abs() < 1e-9);
        assert!(center_z < 0.0);
    }

    #[test]
    fn circle_residuals_are_orthogonal_distances() {
        let p = circle_profile(1.0 * MM, 101);
        let bumped: Vec<f64> = p.heights().iter().enumerate().map(|(i, z)| if i == 50 { z - 1.0 * NM } else { *z }).collect();
        let q = SurfaceProfile::new(p.positions().to_vec(), bumped).unwrap();
        let fit = fit_circle(&q, &CircleFitOptions::default()).unwrap();
        let FitModel::Circle { center_x, center_z, radius } = fit.model else { panic!() };
        for (i, (x, z)) in q.positions().iter().zip(q.heights()).enumerate() {
            let d = ((x - center_x).hypot(z - center_z) - radius).abs();
            assert!((d - fit.residuals[i].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_profile_uses_parabola_fallback() {
        let p = circle_profile(10_000.0 * MM, 101); // 0.125 nm sag
        let fit = fit_circle(&p, &CircleFitOptions::default()).unwrap();
        assert!(fit.is_fallback());
        let r = fit.roc().unwrap().as_radius().unwrap();
        assert!(((r - 10.0) / 10.0).abs() < 1e-3, "{r}");
        let level = SurfaceProfile::new((0..20).map(|i| i as f64 * UM).collect(), vec![1e-9; 20]).unwrap();
        let fit = fit_circle(&level, &CircleFitOptions::default()).unwrap();
        assert_eq!(fit.roc(), Some(Curvature::Flat));
    }

    #[test]
    fn polynomial_exact_recovery() {
        let x: Vec<f64> = (0..200).map(|i| -40.0 * UM + i as f64 * 0.4 * UM).collect();
        let z: Vec<f64> = x
            .iter()
            .map(|x| {
                let t = x / (50.0 * UM);
                NM * (1.0 - 2.0 * t + 0.5 * t.powi(2) + 3.0 * t.powi(3) - t.powi(4) + 0.25 * t.powi(5) + 2.0 * t.powi(6))
            })
            .collect();
        let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p = SurfaceProfile::new(x, z).unwrap();
        let fit = fit_polynomial(&p, 6).unwrap();
        assert!(fit.rms < 1e-15 * scale, "{} vs {}", fit.rms, scale);
    }

    #[test]
    fn polynomial_argument_checks() {
        let p = circle_profile(1.0 * MM, 8);
        assert!(fit_polynomial(&p, 0).is_err());
        assert!(fit_polynomial(&p, 7).is_err());
        assert!(fit_polynomial(&p, 6).is_ok());
    }

    #[test]
    fn polynomial_evaluates_fit() {
        let p = circle_profile(1.0 * MM, 301);
        let fit = fit_polynomial(&p, 6).unwrap();
        let FitModel::Polynomial { coefficients, center, half_width, .. } = &fit.model else { panic!() };
        let x = p.positions()[17];
        let t = (x - center) / half_width;
        let resid = p.heights()[17] - legendre_eval(coefficients, t);
        assert!((resid - fit.residuals[17]).abs() < 1e-20);
    }
}
