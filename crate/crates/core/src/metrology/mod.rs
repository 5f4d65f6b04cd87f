//! Profilometer line-scan analysis.
//!
//! A [`SurfaceProfile`] is fitted either by a circle (orthogonal distances) or
//! by a polynomial (vertical residuals); the residual rms is the roughness
//! that feeds the scatter-loss budget. [`residual_periodogram`] looks for a
//! single dominant spatial period in the residuals, the signature of an
//! instrument artifact rather than surface texture.

mod fit;
mod periodogram;
mod synth;

pub use fit::{fit_circle, fit_polynomial, CircleFitOptions, FitModel, FitResult};
pub use periodogram::{residual_periodogram, PeriodogramOptions, PeriodogramReport};
pub use synth::{synthesize_profile, ProfileSynthesis};

use serde::Serialize;
use std::io::{Read, Write};

use crate::error::{domain, Error, Result};
use crate::io::{read_two_columns, write_two_columns};
use crate::qed::{scattering_loss, ScatterForm};
use crate::units::{NM, UM};

/// Minimum number of samples in a profile.
pub const MIN_SAMPLES: usize = 8;

pub const PROFILE_HEADER: [&str; 2] = ["x_um", "z_nm"];
pub const RESIDUAL_HEADER: [&str; 2] = ["x_um", "residual_nm"];

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ProfileMeta {
    pub sample_id: Option<String>,
    pub field_of_view: Option<f64>,
}

/// A 1-D line scan: heights `z` at strictly increasing lateral positions `x` (metres).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceProfile {
    positions: Vec<f64>,
    heights: Vec<f64>,
    pub meta: ProfileMeta,
}

impl SurfaceProfile {
    pub fn new(positions: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if positions.len() != heights.len() {
            return Err(Error::Profile(format!(
                "{} positions but {} heights",
                positions.len(),
                heights.len()
            )));
        }
        if positions.len() < MIN_SAMPLES {
            return Err(Error::Profile(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().chain(&heights).position(|v| !v.is_finite()) {
            return Err(Error::Profile(format!("non-finite value at index {}", i % positions.len())));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Profile(format!(
                "positions must be strictly increasing (sample {} at {} follows {})",
                i + 1,
                positions[i + 1],
                positions[i]
            )));
        }
        Ok(Self { positions, heights, meta: ProfileMeta::default() })
    }

    pub fn with_meta(mut self, meta: ProfileMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Lateral extent of the scan.
    pub fn window(&self) -> f64 {
        self.positions[self.len() - 1] - self.positions[0]
    }

    /// Reads the `x_um,z_nm` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (x, z) = read_two_columns(reader, PROFILE_HEADER)?;
        let positions = x.into_iter().map(|v| v * UM).collect();
        let heights = z.into_iter().map(|v| v * NM).collect();
        Self::new(positions, heights)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_two_columns(
            writer,
            PROFILE_HEADER,
            self.positions.iter().map(|x| x / UM).zip(self.heights.iter().map(|z| z / NM)),
        )
    }
}

/// sqrt(mean(r²)), without removing the mean.
pub fn rms_roughness(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(domain("rms of an empty residual set"));
    }
    // scale first so tiny (nm-scale in metres) residuals don't lose precision
    let scale = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mean_sq = residuals.iter().map(|r| (r / scale).powi(2)).sum::<f64>() / residuals.len() as f64;
    Ok(scale * mean_sq.sqrt())
}

/// Scatter loss implied by a fit's residual rms.
pub fn roughness_to_loss(fit: &FitResult, wavelength: f64, form: ScatterForm) -> Result<f64> {
    if !fit.converged {
        return Err(domain("fit did not converge"));
    }
    scattering_loss(fit.rms, wavelength, form)
}

/// Writes fit residuals as `x_um,residual_nm`.
pub fn write_residuals_csv<W: Write>(writer: W, profile: &SurfaceProfile, fit: &FitResult) -> Result<()> {
    write_two_columns(
        writer,
        RESIDUAL_HEADER,
        profile
            .positions()
            .iter()
            .map(|x| x / UM)
            .zip(fit.residuals.iter().map(|r| r / NM)),
    )
}
