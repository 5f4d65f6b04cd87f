//! Gaussian beam propagation and two-mirror resonator mode geometry.
//!
//! Lengths are in metres. A mirror curvature is either [`Curvature::Flat`] or
//! a finite radius, positive when the mirror is concave towards the cavity.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, require_positive, Error, Result};

/// Radius of curvature of a mirror or a wavefront.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Flat,
    Radius(f64),
}

impl Curvature {
    /// Builds a finite curvature, rejecting zero and non-finite radii.
    pub fn radius(r: f64) -> Result<Self> {
        if r.is_finite() && r != 0.0 {
            Ok(Curvature::Radius(r))
        } else {
            Err(domain(format!("radius of curvature must be finite and non-zero, got {r}")))
        }
    }

    /// 1/R, zero for a flat surface.
    pub fn inverse(self) -> f64 {
        match self {
            Curvature::Flat => 0.0,
            Curvature::Radius(r) => 1.0 / r,
        }
    }

    pub fn is_flat(self) -> bool {
        matches!(self, Curvature::Flat)
    }

    pub fn as_radius(self) -> Option<f64> {
        match self {
            Curvature::Flat => None,
            Curvature::Radius(r) => Some(r),
        }
    }

    /// Stability parameter g = 1 - L/R of a mirror bounding a cavity of length `length`.
    pub fn g_parameter(self, length: f64) -> f64 {
        match self {
            Curvature::Flat => 1.0,
            Curvature::Radius(r) => 1.0 - length / r,
        }
    }
}

/// A fundamental Gaussian beam described by its waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub wavelength: f64,
    pub waist: f64,
    /// Axial position of the waist.
    pub waist_position: f64,
}

impl BeamParams {
    pub fn new(wavelength: f64, waist: f64, waist_position: f64) -> Result<Self> {
        require_positive("wavelength", wavelength)?;
        require_positive("waist", waist)?;
        if !waist_position.is_finite() {
            return Err(domain("waist position must be finite"));
        }
        Ok(Self { wavelength, waist, waist_position })
    }

    /// Recovers the beam from its complex beam parameter `q` at axial position `z`.
    pub fn from_q(wavelength: f64, q: Complex<f64>, z: f64) -> Result<Self> {
        // q = (z - z0) + i z_R
        if !(q.im > 0.0) {
            return Err(domain(format!("complex beam parameter must have positive imaginary part, got {q}")));
        }
        let waist = (q.im * wavelength / PI).sqrt();
        Self::new(wavelength, waist, z - q.re)
    }

    pub fn rayleigh_length(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Complex beam parameter at `z`.
    pub fn q_at(&self, z: f64) -> Complex<f64> {
        Complex::new(z - self.waist_position, self.rayleigh_length())
    }

    /// 1/e² intensity radius at `z`.
    pub fn spot_size(&self, z: f64) -> f64 {
        let zr = self.rayleigh_length();
        let dz = z - self.waist_position;
        self.waist * (1.0 + (dz / zr).powi(2)).sqrt()
    }

    /// Wavefront curvature 1/R at `z`; zero at the waist.
    pub fn wavefront_curvature(&self, z: f64) -> f64 {
        let zr = self.rayleigh_length();
        let dz = z - self.waist_position;
        dz / (dz * dz + zr * zr)
    }
}

/// Rayleigh length π·w0²/λ.
pub fn rayleigh_length(waist: f64, wavelength: f64) -> Result<f64> {
    require_positive("waist", waist)?;
    require_positive("wavelength", wavelength)?;
    Ok(PI * waist * waist / wavelength)
}

/// Mode waist of a flat + curved cavity. The waist sits on the flat mirror.
pub fn waist_half_symmetric(length: f64, roc: f64, wavelength: f64) -> Result<f64> {
    require_positive("cavity length", length)?;
    require_positive("wavelength", wavelength)?;
    require_positive("radius of curvature", roc)?;
    if length >= roc {
        let g2 = 1.0 - length / roc;
        return Err(Error::UnstableCavity { g1: 1.0, g2, product: g2 });
    }
    Ok(((wavelength / PI) * (length * (roc - length)).sqrt()).sqrt())
}

/// Curvature R(z) = z·(1 + z_R²/z²) of a beam at distance `z` from its waist.
/// Returns [`Curvature::Flat`] at the waist.
pub fn wavefront_radius(z: f64, rayleigh: f64) -> Curvature {
    if z == 0.0 {
        Curvature::Flat
    } else {
        Curvature::Radius(z * (1.0 + (rayleigh / z).powi(2)))
    }
}

/// Axial separation of the two points where a beam's wavefront radius equals `roc`.
pub fn matching_points_separation(roc: f64, rayleigh: f64) -> Result<f64> {
    require_positive("radius of curvature", roc)?;
    require_positive("Rayleigh length", rayleigh)?;
    let limit = 2.0 * rayleigh;
    if roc < limit {
        return Err(Error::NoMatchingPoints { roc, limit });
    }
    // (R - 2 z_R)(R + 2 z_R) avoids cancellation close to tangency.
    Ok(((roc - limit) * (roc + limit)).sqrt())
}

/// Inverse of [`matching_points_separation`].
pub fn roc_from_separation(separation: f64, rayleigh: f64) -> Result<f64> {
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(domain(format!("separation must be non-negative, got {separation}")));
    }
    require_positive("Rayleigh length", rayleigh)?;
    Ok(separation.hypot(2.0 * rayleigh))
}

/// Two-mirror resonator geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub length: f64,
    pub mirror_1: Curvature,
    pub mirror_2: Curvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub g1: f64,
    pub g2: f64,
    pub product: f64,
    pub stable: bool,
}

/// Location and size of the fundamental-mode waist inside a cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeWaist {
    pub radius: f64,
    /// Distance of the waist from mirror 1 along the axis.
    pub distance_from_mirror_1: f64,
}

impl CavityGeometry {
    pub fn new(length: f64, mirror_1: Curvature, mirror_2: Curvature) -> Result<Self> {
        require_positive("cavity length", length)?;
        Ok(Self { length, mirror_1, mirror_2 })
    }

    /// Flat mirror 1, curved mirror 2.
    pub fn half_symmetric(length: f64, roc: f64) -> Result<Self> {
        Self::new(length, Curvature::Flat, Curvature::radius(roc)?)
    }

    pub fn stability(&self) -> Stability {
        cavity_stability(self)
    }

    /// Fundamental-mode waist from the g-parameters.
    pub fn mode_waist(&self, wavelength: f64) -> Result<ModeWaist> {
        require_positive("wavelength", wavelength)?;
        let s = self.stability();
        // Marginal cavities (g1·g2 = 0 or 1) have no confined Gaussian mode.
        if !(s.product > 0.0 && s.product < 1.0) {
            return Err(Error::UnstableCavity { g1: s.g1, g2: s.g2, product: s.product });
        }
        let (g1, g2, l) = (s.g1, s.g2, self.length);
        let denom = g1 + g2 - 2.0 * g1 * g2;
        let w0_sq = (wavelength * l / PI) * (s.product * (1.0 - s.product)).sqrt() / denom.abs();
        Ok(ModeWaist {
            radius: w0_sq.sqrt(),
            distance_from_mirror_1: l * g2 * (1.0 - g1) / denom,
        })
    }
}

/// g-parameters and the stability condition 0 ≤ g1·g2 ≤ 1.
pub fn cavity_stability(geom: &CavityGeometry) -> Stability {
    let g1 = geom.mirror_1.g_parameter(geom.length);
    let g2 = geom.mirror_2.g_parameter(geom.length);
    let product = g1 * g2;
    Stability { g1, g2, product, stable: (0.0..=1.0).contains(&product) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{MM, NM, UM};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rayleigh_length_values() {
        let zr = rayleigh_length(2.0 * UM, 780.0 * NM).unwrap();
        assert!((zr / UM - 16.11).abs() < 0.005, "{zr}");
        // λ×4, w0×2 leaves z_R unchanged
        let scaled = rayleigh_length(4.0 * UM, 4.0 * 780.0 * NM).unwrap();
        assert!(rel(scaled, zr) < 1e-15);
        assert_eq!(rayleigh_length(1.0, PI).unwrap(), 1.0);
        assert!(rayleigh_length(0.0, 1.0).is_err());
        assert!(rayleigh_length(1.0, -1.0).is_err());
    }

    #[test]
    fn half_symmetric_waists() {
        let w = waist_half_symmetric(2.53 * MM, 5.0 * MM, 780.0 * NM).unwrap();
        assert!((w / UM - 24.9).abs() < 0.05, "{w}");
        let w = waist_half_symmetric(2.075 * MM, 100.0 * MM, 780.0 * NM).unwrap();
        assert!((w / UM - 59.5).abs() < 0.05, "{w}");
        let tiny = waist_half_symmetric(1e-12, 5.0 * MM, 780.0 * NM).unwrap();
        assert!(tiny < 1e-6);
        assert!(matches!(
            waist_half_symmetric(5.0 * MM, 5.0 * MM, 780.0 * NM),
            Err(Error::UnstableCavity { .. })
        ));
        assert!(matches!(waist_half_symmetric(0.0, 5.0 * MM, 780.0 * NM), Err(Error::Domain(_))));
    }

    #[test]
    fn general_waist_reduces_to_half_symmetric() {
        let geom = CavityGeometry::half_symmetric(2.53 * MM, 5.0 * MM).unwrap();
        let mode = geom.mode_waist(780.0 * NM).unwrap();
        let w = waist_half_symmetric(2.53 * MM, 5.0 * MM, 780.0 * NM).unwrap();
        assert!(rel(mode.radius, w) < 1e-12);
        assert_eq!(mode.distance_from_mirror_1, 0.0);
    }

    #[test]
    fn symmetric_cavity_waist_is_centred() {
        let geom = CavityGeometry::new(1.0 * MM, Curvature::Radius(2.0 * MM), Curvature::Radius(2.0 * MM)).unwrap();
        let mode = geom.mode_waist(780.0 * NM).unwrap();
        assert!((mode.distance_from_mirror_1 - 0.5 * MM).abs() < 1e-15);
    }

    #[test]
    fn stability_examples() {
        let s = CavityGeometry::half_symmetric(2.075 * MM, 100.0 * MM).unwrap().stability();
        assert!((s.product - 0.97925).abs() < 1e-12);
        assert!(s.stable);
        let s = CavityGeometry::half_symmetric(5.0 * MM, 5.0 * MM).unwrap().stability();
        assert_eq!(s.product, 0.0);
        assert!(s.stable);
        let s = CavityGeometry::half_symmetric(6.0 * MM, 5.0 * MM).unwrap().stability();
        assert!(!s.stable);
        let s = CavityGeometry::new(1.0, Curvature::Flat, Curvature::Flat).unwrap().stability();
        assert_eq!((s.g1, s.g2), (1.0, 1.0));
    }

    #[test]
    fn wavefront_radius_values() {
        let zr = 16.11 * UM;
        assert_eq!(wavefront_radius(zr, zr), Curvature::Radius(2.0 * zr));
        let r = wavefront_radius(349.65 * UM, zr).as_radius().unwrap();
        assert!((r / UM - 350.39).abs() < 0.005, "{r}");
        let far = wavefront_radius(1e3, zr).as_radius().unwrap();
        assert!((far / 1e3 - 1.0).abs() < 1e-12);
        assert_eq!(wavefront_radius(0.0, zr), Curvature::Flat);
    }

    #[test]
    fn matching_points() {
        let zr = 16.11 * UM;
        let s = matching_points_separation(0.7 * MM, zr).unwrap();
        assert!((s / MM - 0.69926).abs() < 5e-6, "{s}");
        assert_eq!(matching_points_separation(2.0 * zr, zr).unwrap(), 0.0);
        let s5 = matching_points_separation(5.0 * MM, zr).unwrap();
        assert!((s5 / MM - 4.9999).abs() < 5e-5);
        assert!(matches!(
            matching_points_separation(zr, zr),
            Err(Error::NoMatchingPoints { .. })
        ));
        assert!(rel(roc_from_separation(s, zr).unwrap(), 0.7 * MM) < 1e-12);
        assert_eq!(roc_from_separation(0.0, zr).unwrap(), 2.0 * zr);
        assert!(roc_from_separation(-1.0, zr).is_err());
    }

    #[test]
    fn beam_from_q_round_trip() {
        let b = BeamParams::new(780.0 * NM, 2.0 * UM, 10.0 * UM).unwrap();
        let z = 123.0 * UM;
        let back = BeamParams::from_q(b.wavelength, b.q_at(z), z).unwrap();
        assert!(rel(back.waist, b.waist) < 1e-12);
        assert!((back.waist_position - b.waist_position).abs() < 1e-18);
    }
}
