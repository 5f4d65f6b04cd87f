use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::io::{Read, Write};

use super::{moving_average, prominent_peaks};
use crate::error::{domain, require_non_negative, Error, Result};
use crate::io::{read_two_columns, write_two_columns};
use crate::optics::{matching_points_separation, roc_from_separation, BeamParams, Curvature};
use crate::solve::lstsq_qr;
use crate::units::UM;

pub const SCAN_HEADER: [&str; 2] = ["z_um", "coupling"];

/// Power coupling between two fundamental Gaussian modes of equal wavelength.
///
/// Both beams are evaluated at a common plane; the overlap does not depend on
/// which plane is used.
pub fn mode_coupling(a: &BeamParams, b: &BeamParams) -> Result<f64> {
    if (a.wavelength - b.wavelength).abs() > 1e-12 * a.wavelength.max(b.wavelength) {
        return Err(Error::WavelengthMismatch(a.wavelength, b.wavelength));
    }
    let z = 0.5 * (a.waist_position + b.waist_position);
    let (wa, wb) = (a.spot_size(z), b.spot_size(z));
    let k = 0.5 * (a.wavenumber() + b.wavenumber());
    let mismatch = wa / wb + wb / wa;
    let curvature = k * (wa * wb) * (a.wavefront_curvature(z) - b.wavefront_curvature(z));
    Ok(4.0 / (mismatch * mismatch + 0.25 * curvature * curvature))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetroScanSettings {
    /// First and last nominal mirror positions along the beam axis.
    pub start: f64,
    pub end: f64,
    pub samples: usize,
    /// Standard deviation of the random error of each mirror position.
    pub position_noise: f64,
    pub seed: u64,
}

impl RetroScanSettings {
    /// Scan from 100 µm before the beam waist to 100 µm past `waist + roc`
    /// in 1 µm steps.
    pub fn covering(beam: &BeamParams, roc: f64) -> Self {
        let start = beam.waist_position - 100.0 * UM;
        let end = beam.waist_position + roc.abs() + 100.0 * UM;
        let samples = ((end - start) / UM).round() as usize + 1;
        Self { start, end, samples, position_noise: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanRegime {
    /// Two separated coupling maxima.
    TwoMaxima,
    /// R ≤ 2·z_R: the maxima merge and the separation carries no information.
    SingleMaximum,
    Flat,
}

/// Fiber-coupled power against mirror position for a beam reflected back
/// onto itself by a curved mirror.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetroScan {
    pub positions: Vec<f64>,
    pub coupling: Vec<f64>,
    pub beam: BeamParams,
    pub regime: ScanRegime,
}

/// Coupling of the reflected beam back into the fiber mode.
///
/// A mirror at distance z from the waist images the incident waist to 2z in
/// the unfolded frame; the reflected beam is `1/q_r = 1/q_i - 2/R`. Each
/// position is perturbed by Gaussian noise of `position_noise` (ChaCha8
/// seeded with `seed`, one draw per sample in scan order) before evaluation,
/// while the nominal positions are reported.
pub fn retro_scan(mirror: Curvature, beam: &BeamParams, settings: &RetroScanSettings) -> Result<RetroScan> {
    require_non_negative("position noise", settings.position_noise)?;
    if settings.samples < 2 {
        return Err(domain("a scan needs at least two samples"));
    }
    if !(settings.end > settings.start) {
        return Err(domain("scan end must exceed scan start"));
    }
    let zr = beam.rayleigh_length();
    let regime = match mirror {
        Curvature::Flat => ScanRegime::Flat,
        Curvature::Radius(r) if r <= 0.0 => return Err(domain("a convex mirror has no matching points")),
        Curvature::Radius(r) if r <= 2.0 * zr => ScanRegime::SingleMaximum,
        Curvature::Radius(r) => {
            let s = matching_points_separation(r, zr)?;
            let near = beam.waist_position + 0.5 * (r - s);
            let far = beam.waist_position + 0.5 * (r + s);
            if settings.start > near || settings.end < far {
                return Err(domain(format!(
                    "scan [{:.1}, {:.1}] µm misses a matching point at {:.1} or {:.1} µm",
                    settings.start / UM,
                    settings.end / UM,
                    near / UM,
                    far / UM
                )));
            }
            ScanRegime::TwoMaxima
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let step = (settings.end - settings.start) / (settings.samples - 1) as f64;
    let inverse_r = mirror.inverse();
    let mut positions = Vec::with_capacity(settings.samples);
    let mut coupling = Vec::with_capacity(settings.samples);
    for i in 0..settings.samples {
        let z = settings.start + i as f64 * step;
        let jitter: f64 = if settings.position_noise > 0.0 {
            settings.position_noise * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let zm = z + jitter;
        let qi = beam.q_at(zm);
        let qr = 1.0 / (1.0 / qi - 2.0 * inverse_r);
        let reflected = BeamParams::from_q(beam.wavelength, qr, zm)?;
        let image = BeamParams { waist_position: 2.0 * zm - beam.waist_position, ..*beam };
        positions.push(z);
        coupling.push(mode_coupling(&reflected, &image)?);
    }
    Ok(RetroScan { positions, coupling, beam: *beam, regime })
}

impl RetroScan {
    /// Writes positions in µm and the coupled fraction.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_two_columns(writer, SCAN_HEADER, self.positions.iter().map(|z| z / UM).zip(self.coupling.iter().copied()))
    }

    /// Reads a recorded scan; positions are converted from µm.
    pub fn read_csv<R: Read>(reader: R, beam: BeamParams) -> Result<Self> {
        let (z, c) = read_two_columns(reader, SCAN_HEADER)?;
        if z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("scan positions must be strictly increasing"));
        }
        Ok(Self { positions: z.into_iter().map(|v| v * UM).collect(), coupling: c, beam, regime: ScanRegime::TwoMaxima })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocMeasurement {
    pub roc: f64,
    /// One-sigma uncertainty propagated from the peak-location fits.
    pub uncertainty: f64,
    pub peaks: [f64; 2],
    pub separation: f64,
}

const MIN_SMOOTHING_WINDOW: usize = 5;
const MIN_PEAK_PROMINENCE: f64 = 0.05;
/// Prominence required of a maximum relative to the tallest smoothed maximum.
/// The true maxima are separated by a valley near zero coupling; noise bumps
/// on the flank of a maximum are not.
const RELATIVE_PROMINENCE: f64 = 0.25;
const REFINE_LEVEL: f64 = 0.9;
const REFINE_PASSES: usize = 20;

/// Least-squares parabola through `c` over `z[lo..=hi]`; returns the vertex
/// and its one-sigma uncertainty.
fn parabola_vertex(z: &[f64], c: &[f64], lo: usize, hi: usize) -> Option<(f64, f64)> {
    let n = hi - lo + 1;
    if n < 3 {
        return None;
    }
    let zc = 0.5 * (z[lo] + z[hi]);
    let scale = 0.5 * (z[hi] - z[lo]);
    if !(scale > 0.0) {
        return None;
    }
    let a = DMatrix::from_fn(n, 3, |i, j| ((z[lo + i] - zc) / scale).powi(j as i32));
    let b = DVector::from_column_slice(&c[lo..=hi]);
    let coef = lstsq_qr(a.clone(), b.clone())?;
    if !(coef[2] < 0.0) {
        return None;
    }
    let t = -coef[1] / (2.0 * coef[2]);
    if t.abs() > 1.0 {
        return None;
    }
    let sigma = if n > 3 {
        let s2 = (&a * &coef - &b).norm_squared() / (n - 3) as f64;
        let cov = (a.transpose() * &a).try_inverse()?;
        let g = [-1.0 / (2.0 * coef[2]), coef[1] / (2.0 * coef[2] * coef[2])];
        let mut var = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                var += g[i] * g[j] * cov[(i + 1, j + 1)];
            }
        }
        (s2 * var).max(0.0).sqrt() * scale
    } else {
        0.0
    };
    Some((zc + t * scale, sigma))
}

/// Peak position near index `p`. The half-width of the fit window is set by
/// where the smoothed coupling falls below `REFINE_LEVEL` of its maximum; the
/// window is then recentred on the fitted vertex until it stops moving, so a
/// lopsided peak does not bias the vertex.
fn refine_peak(z: &[f64], c: &[f64], smooth: &[f64], p: usize) -> (f64, f64) {
    let level = REFINE_LEVEL * smooth[p];
    let mut lo = p;
    while lo > 0 && smooth[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = p;
    while hi + 1 < z.len() && smooth[hi + 1] >= level {
        hi += 1;
    }
    let step = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
    let half = (0.5 * (z[hi] - z[lo])).max(1.5 * step);
    let mut centre = z[p];
    let mut result = (z[p], f64::NAN);
    for _ in 0..REFINE_PASSES {
        let lo = z.partition_point(|&v| v < centre - half);
        let hi = z.partition_point(|&v| v <= centre + half).saturating_sub(1);
        if hi <= lo {
            break;
        }
        let Some((vertex, sigma)) = parabola_vertex(z, c, lo, hi) else { break };
        let moved = (vertex - centre).abs();
        centre = vertex;
        result = (vertex, sigma);
        if moved < 1e-6 * step {
            break;
        }
    }
    result
}

/// Radius of curvature from the separation of the two coupling maxima.
pub fn measure_roc(scan: &RetroScan) -> Result<RocMeasurement> {
    if scan.positions.len() != scan.coupling.len() {
        return Err(domain("scan positions and coupling differ in length"));
    }
    if scan.regime == ScanRegime::SingleMaximum {
        return Err(Error::Peaks("mirror radius is below twice the Rayleigh length: the maxima merge".into()));
    }
    if scan.positions.len() < 8 {
        return Err(Error::Peaks(format!("scan has only {} samples", scan.positions.len())));
    }
    let zr = scan.beam.rayleigh_length();
    // each maximum is about 2·z_R wide; smooth over z_R
    let mut steps: Vec<f64> = scan.positions.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let step = steps[steps.len() / 2];
    let window = ((zr / step).round() as usize | 1).max(MIN_SMOOTHING_WINDOW);
    let smooth = moving_average(&scan.coupling, window);
    let tallest = smooth.iter().copied().fold(0.0, f64::max);
    let peaks = prominent_peaks(&smooth, MIN_PEAK_PROMINENCE.max(RELATIVE_PROMINENCE * tallest));
    let first = *peaks.first().ok_or_else(|| Error::Peaks("no coupling maximum found".into()))?;
    let second = peaks
        .iter()
        .copied()
        .find(|&p| (scan.positions[p] - scan.positions[first]).abs() > 2.0 * zr)
        .ok_or_else(|| Error::Peaks("found one coupling maximum, need two".into()))?;
    let two = [first.min(second), first.max(second)];
    let (z1, s1) = refine_peak(&scan.positions, &scan.coupling, &smooth, two[0]);
    let (z2, s2) = refine_peak(&scan.positions, &scan.coupling, &smooth, two[1]);
    let separation = z2 - z1;
    let roc = roc_from_separation(separation, zr)?;
    let uncertainty = separation / roc * s1.hypot(s2);
    Ok(RocMeasurement { roc, uncertainty, peaks: [z1, z2], separation })
}
