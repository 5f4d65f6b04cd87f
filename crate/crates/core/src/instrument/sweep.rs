use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::io::{Read, Write};

use super::{moving_average, prominent_peaks};
use crate::error::{domain, require_non_negative, require_positive, Error, Result};
use crate::io::{read_two_columns, write_two_columns};
use crate::solve::{levenberg_marquardt, LmOptions};

pub const TRACE_HEADER: [&str; 2] = ["u", "s"];
pub const MIN_SWEEP_SAMPLES: usize = 64;

/// Recipe for a transmission trace recorded while the laser is swept across
/// a cavity resonance with phase-modulation sidebands at ±`modulation_frequency`.
///
/// The sweep axis `u` is in arbitrary units (e.g. piezo volts) related to the
/// optical detuning by `slope` [Hz per unit u]. The carrier sits at `u = center`.
/// Noise is additive and Gaussian with standard deviation `noise` relative to
/// the carrier peak, drawn from ChaCha8 seeded with `seed`, one draw per
/// sample in order of increasing u; the detector output is clipped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSimulation {
    /// Full width at half maximum of the resonance [Hz].
    pub linewidth: f64,
    pub modulation_frequency: f64,
    pub slope: f64,
    /// Sideband peak height relative to the carrier.
    pub sideband_depth: f64,
    pub noise: f64,
    /// Detector offset relative to the carrier peak.
    pub background: f64,
    pub center: f64,
    pub samples: usize,
    /// Swept optical range [Hz]; `None` spans the sidebands plus five linewidths on each side.
    pub span: Option<f64>,
    pub seed: u64,
}

impl SweepSimulation {
    pub fn new(linewidth: f64, modulation_frequency: f64, slope: f64, sideband_depth: f64, noise: f64, seed: u64) -> Self {
        Self {
            linewidth,
            modulation_frequency,
            slope,
            sideband_depth,
            noise,
            background: 0.05,
            center: 0.0,
            samples: 2001,
            span: None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        require_positive("linewidth", self.linewidth)?;
        require_positive("modulation frequency", self.modulation_frequency)?;
        require_non_negative("sideband depth", self.sideband_depth)?;
        require_non_negative("noise", self.noise)?;
        require_non_negative("background", self.background)?;
        if !(self.slope.is_finite() && self.slope != 0.0) {
            return Err(domain("sweep slope must be finite and non-zero"));
        }
        if !self.center.is_finite() {
            return Err(domain("sweep centre must be finite"));
        }
        if self.samples < MIN_SWEEP_SAMPLES {
            return Err(domain(format!("a sweep needs at least {MIN_SWEEP_SAMPLES} samples, got {}", self.samples)));
        }
        if let Some(span) = self.span {
            require_positive("sweep span", span)?;
        }
        Ok(())
    }
}

/// A recorded or simulated sweep: detector signal `s` against sweep coordinate `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTrace {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
}

impl SweepTrace {
    pub fn new(u: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if u.len() != s.len() {
            return Err(domain("sweep coordinate and signal differ in length"));
        }
        if u.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(domain("sweep trace contains non-finite values"));
        }
        Ok(Self { u, s })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (u, s) = read_two_columns(reader, TRACE_HEADER)?;
        Self::new(u, s)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_two_columns(writer, TRACE_HEADER, self.u.iter().copied().zip(self.s.iter().copied()))
    }
}

fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let t = 2.0 * x / fwhm;
    1.0 / (1.0 + t * t)
}

pub fn simulate_sweep(sim: &SweepSimulation) -> Result<SweepTrace> {
    sim.validate()?;
    let span = sim.span.unwrap_or(2.0 * (sim.modulation_frequency + 5.0 * sim.linewidth));
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let n = sim.samples;
    let mut u = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let nu = -0.5 * span + span * i as f64 / (n - 1) as f64;
        let f = sim.modulation_frequency;
        let clean = lorentzian(nu, sim.linewidth)
            + sim.sideband_depth * (lorentzian(nu - f, sim.linewidth) + lorentzian(nu + f, sim.linewidth));
        let noise: f64 = if sim.noise > 0.0 { sim.noise * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        u.push(sim.center + nu / sim.slope);
        s.push((sim.background + clean + noise).max(0.0));
    }
    // keep u increasing for negative slopes
    if sim.slope < 0.0 {
        u.reverse();
        s.reverse();
    }
    SweepTrace::new(u, s)
}

/// Linewidth calibrated against the sideband spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepFit {
    /// Full width at half maximum [Hz].
    pub linewidth: f64,
    /// One-sigma uncertainty of `linewidth` from the fit covariance [Hz].
    pub linewidth_uncertainty: f64,
    /// Fitted calibration [Hz per unit u].
    pub slope: f64,
    pub carrier_position: f64,
    /// Carrier-to-sideband spacing in sweep units.
    pub sideband_spacing: f64,
    /// Resonance FWHM in sweep units.
    pub width: f64,
    pub carrier_amplitude: f64,
    pub sideband_ratio: f64,
    pub baseline: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

const SMOOTHING_WINDOW: usize = 5;
const MIN_PEAK_PROMINENCE: f64 = 0.05;

// parameters: u0, d, w, A, r, b
fn model(p: &DVector<f64>, u: f64) -> f64 {
    let x = u - p[0];
    p[5] + p[3] * (lorentzian(x, p[2]) + p[4] * (lorentzian(x - p[1], p[2]) + lorentzian(x + p[1], p[2])))
}

// value and derivatives of L(x; w) with respect to x and w
fn lorentzian_grad(x: f64, w: f64) -> (f64, f64, f64) {
    let t = 2.0 * x / w;
    let l = 1.0 / (1.0 + t * t);
    let dl_dt = -2.0 * t * l * l;
    (l, dl_dt * 2.0 / w, dl_dt * (-t / w))
}

fn jacobian(p: &DVector<f64>, u: &[f64]) -> DMatrix<f64> {
    let (u0, d, w, a, r) = (p[0], p[1], p[2], p[3], p[4]);
    let mut jac = DMatrix::zeros(u.len(), 6);
    for (i, &ui) in u.iter().enumerate() {
        let x = ui - u0;
        let (lc, dxc, dwc) = lorentzian_grad(x, w);
        let (lm, dxm, dwm) = lorentzian_grad(x - d, w);
        let (lp, dxp, dwp) = lorentzian_grad(x + d, w);
        jac[(i, 0)] = -a * (dxc + r * (dxm + dxp));
        jac[(i, 1)] = a * r * (-dxm + dxp);
        jac[(i, 2)] = a * (dwc + r * (dwm + dwp));
        jac[(i, 3)] = lc + r * (lm + lp);
        jac[(i, 4)] = a * (lm + lp);
        jac[(i, 5)] = 1.0;
    }
    jac
}

/// Full width at half height above `floor` of the peak at index `p`, by
/// linear interpolation between samples.
fn half_width(u: &[f64], s: &[f64], p: usize, floor: f64) -> f64 {
    let half = floor + 0.5 * (s[p] - floor);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = p;
        for i in range {
            if s[i] <= half {
                let frac = (s[prev] - half) / (s[prev] - s[i]);
                return Some(u[prev] + frac * (u[i] - u[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..p).rev());
    let right = crossing(&mut (p + 1..u.len()));
    match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (u[p] - l),
        (None, Some(r)) => 2.0 * (r - u[p]),
        (None, None) => u[u.len() - 1] - u[0],
    }
}

/// Fits carrier plus two equal sidebands to a sweep and converts the carrier
/// width to Hz using the known `modulation_frequency`.
///
/// The result does not depend on the scale or offset of `u`. Fails with
/// [`Error::CalibrationImpossible`] when three peaks cannot be found or the
/// sidebands are not resolved from the carrier.
pub fn fit_sweep(trace: &SweepTrace, modulation_frequency: f64) -> Result<SweepFit> {
    require_positive("modulation frequency", modulation_frequency)?;
    let n = trace.u.len();
    if n < MIN_SWEEP_SAMPLES {
        return Err(domain(format!("a sweep needs at least {MIN_SWEEP_SAMPLES} samples, got {n}")));
    }
    if trace.u.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("sweep coordinate must be strictly increasing"));
    }
    let (u, s) = (&trace.u, &trace.s);
    let smooth = moving_average(s, SMOOTHING_WINDOW);
    let floor = smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let top = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > floor) {
        return Err(Error::CalibrationImpossible("flat trace".into()));
    }
    let peaks = prominent_peaks(&smooth, MIN_PEAK_PROMINENCE * (top - floor));
    if peaks.len() < 3 {
        return Err(Error::CalibrationImpossible(format!(
            "found {} resolved peak(s), need carrier and two sidebands",
            peaks.len()
        )));
    }
    let mut three = [peaks[0], peaks[1], peaks[2]];
    three.sort_unstable();
    let [lo, mid, hi] = three;
    let spacing_left = u[mid] - u[lo];
    let spacing_right = u[hi] - u[mid];
    if (spacing_left - spacing_right).abs() > 0.25 * (spacing_left + spacing_right) {
        return Err(Error::CalibrationImpossible(format!(
            "sidebands are not symmetric about the carrier (spacings {spacing_left:.4} and {spacing_right:.4})"
        )));
    }
    let d0 = 0.5 * (spacing_left + spacing_right);
    let w0 = half_width(u, &smooth, mid, floor).min(d0);
    let a0 = smooth[mid] - floor;
    let r0 = (0.5 * (smooth[lo] + smooth[hi]) - floor) / a0;
    // work in a centred, unit-scaled coordinate for conditioning
    let (uc, us) = (u[mid], d0);
    let x: Vec<f64> = u.iter().map(|v| (v - uc) / us).collect();
    let p0 = DVector::from_vec(vec![0.0, 1.0, w0 / us, a0, r0, floor]);
    let y = DVector::from_column_slice(s);
    let residual = |p: &DVector<f64>| DVector::from_iterator(n, x.iter().zip(y.iter()).map(|(&xi, &yi)| model(p, xi) - yi));
    let jac = |p: &DVector<f64>| jacobian(p, &x);
    let out = levenberg_marquardt(residual, jac, p0, LmOptions::default());
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            detail: format!("sweep fit; initial spacing {d0}, width {w0}"),
        });
    }
    let p = &out.params;
    let (d, w) = (p[1].abs(), p[2].abs());
    if !(d > w) {
        return Err(Error::CalibrationImpossible(format!(
            "sidebands not resolved: spacing {:.4} does not exceed the linewidth {:.4}",
            d * us,
            w * us
        )));
    }
    let linewidth = w * modulation_frequency / d;
    let dof = (n - 6) as f64;
    let sigma2 = out.cost / dof;
    let linewidth_uncertainty = match &out.jtj_inverse {
        Some(cov) => {
            // gradient of w·f/d with respect to (d, w)
            let gd = -linewidth / d;
            let gw = modulation_frequency / d;
            let var = sigma2 * (gd * gd * cov[(1, 1)] + 2.0 * gd * gw * cov[(1, 2)] + gw * gw * cov[(2, 2)]);
            var.max(0.0).sqrt()
        }
        None => f64::NAN,
    };
    Ok(SweepFit {
        linewidth,
        linewidth_uncertainty,
        slope: modulation_frequency / (d * us),
        carrier_position: uc + p[0] * us,
        sideband_spacing: d * us,
        width: w * us,
        carrier_amplitude: p[3],
        sideband_ratio: p[4],
        baseline: p[5],
        residual_rms: (out.cost / n as f64).sqrt(),
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::MHZ;

    fn sim(noise: f64, seed: u64) -> SweepSimulation {
        SweepSimulation::new(1.5 * MHZ, 7.5 * MHZ, 2.0 * MHZ, 0.3, noise, seed)
    }

    #[test]
    fn noiseless_recovery() {
        let trace = simulate_sweep(&sim(0.0, 1)).unwrap();
        let fit = fit_sweep(&trace, 7.5 * MHZ).unwrap();
        assert!(((fit.linewidth - 1.5 * MHZ) / (1.5 * MHZ)).abs() < 1e-9, "{fit:?}");
        assert!(((fit.slope - 2.0 * MHZ) / (2.0 * MHZ)).abs() < 1e-9);
        assert!((fit.sideband_ratio - 0.3).abs() < 1e-9);
        assert!((fit.baseline - 0.05).abs() < 1e-9);
    }

    #[test]
    fn noisy_recovery_and_uncertainty() {
        let trace = simulate_sweep(&sim(0.01, 7)).unwrap();
        let fit = fit_sweep(&trace, 7.5 * MHZ).unwrap();
        let err = (fit.linewidth - 1.5 * MHZ).abs();
        assert!(err / (1.5 * MHZ) < 0.01);
        assert!(fit.linewidth_uncertainty > 0.0 && err < 5.0 * fit.linewidth_uncertainty);
    }

    #[test]
    fn unresolved_sidebands() {
        let s = SweepSimulation::new(1.5 * MHZ, 0.75 * MHZ, 2.0 * MHZ, 0.3, 0.0, 1);
        let trace = simulate_sweep(&s).unwrap();
        assert!(matches!(fit_sweep(&trace, 0.75 * MHZ), Err(Error::CalibrationImpossible(_))));
    }

    #[test]
    fn negative_slope_and_csv_round_trip() {
        let s = SweepSimulation { slope: -3.0 * MHZ, center: 4.0, ..sim(0.0, 1) };
        let trace = simulate_sweep(&s).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = SweepTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, trace);
        let fit = fit_sweep(&back, 7.5 * MHZ).unwrap();
        assert!(((fit.linewidth - 1.5 * MHZ) / (1.5 * MHZ)).abs() < 1e-9);
        assert!((fit.carrier_position - 4.0).abs() < 1e-9);
    }

    #[test]
    fn signal_is_non_negative() {
        let s = SweepSimulation { background: 0.0, noise: 0.2, ..sim(0.0, 3) };
        assert!(simulate_sweep(&s).unwrap().s.iter().all(|&v| v >= 0.0));
    }
}
