//! Cavity figures of merit: finesse, loss budgets, surface-scatter limits,
//! single-atom cooperativity and the strong-coupling classification.
//!
//! Rate convention: η = g² / (κ·γ⊥), with κ the angular half-linewidth of the
//! cavity (κ = π·Δν_c) and γ⊥ the atomic dipole decay rate (half the natural
//! linewidth). Both κ and γ⊥ are angular frequencies in rad/s.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{domain, require_non_negative, require_positive, Error, Result};
use crate::optics::{CavityGeometry, Curvature, Stability};
use crate::units::{MHZ, NM, SPEED_OF_LIGHT};

/// Which form of the scatter-loss expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterForm {
    /// 1 - exp(-(4πσ/λ)²)
    Exact,
    /// (4πσ/λ)²
    Approximate,
}

/// Fraction of power scattered by a surface of rms roughness `sigma`.
pub fn scattering_loss(sigma: f64, wavelength: f64, form: ScatterForm) -> Result<f64> {
    require_non_negative("rms roughness", sigma)?;
    require_positive("wavelength", wavelength)?;
    let x = (4.0 * PI * sigma / wavelength).powi(2);
    Ok(match form {
        ScatterForm::Exact => -(-x).exp_m1(),
        ScatterForm::Approximate => x,
    })
}

/// F = c / (2·L·Δν_c) with Δν_c the FWHM linewidth in Hz.
pub fn finesse_from_linewidth(length: f64, linewidth: f64) -> Result<f64> {
    require_positive("cavity length", length)?;
    require_positive("linewidth", linewidth)?;
    Ok(SPEED_OF_LIGHT / (2.0 * length * linewidth))
}

/// Inverse of [`finesse_from_linewidth`].
pub fn linewidth_from_finesse(length: f64, finesse: f64) -> Result<f64> {
    require_positive("cavity length", length)?;
    require_positive("finesse", finesse)?;
    Ok(SPEED_OF_LIGHT / (2.0 * length * finesse))
}

/// Free spectral range c/2L in Hz.
pub fn free_spectral_range(length: f64) -> Result<f64> {
    require_positive("cavity length", length)?;
    Ok(SPEED_OF_LIGHT / (2.0 * length))
}

/// Per-mirror loss entry for the round-trip budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBudget {
    pub transmission: f64,
    pub excess_loss: f64,
}

/// F = 2π / Σ(T_i + excess_i).
pub fn finesse_from_losses(budget: &[LossBudget]) -> Result<f64> {
    let mut total = 0.0;
    for b in budget {
        require_non_negative("transmission", b.transmission)?;
        require_non_negative("excess loss", b.excess_loss)?;
        total += b.transmission + b.excess_loss;
    }
    if total == 0.0 {
        return Err(Error::InfiniteFinesse);
    }
    if total >= 1.0 {
        return Err(domain(format!("total round-trip loss {total} must be below 1")));
    }
    Ok(2.0 * PI / total)
}

/// η = 24·F / (π·k²·w²), k = 2π/λ.
pub fn cooperativity(finesse: f64, waist: f64, wavelength: f64) -> Result<f64> {
    require_positive("finesse", finesse)?;
    require_positive("waist", waist)?;
    require_positive("wavelength", wavelength)?;
    let k = 2.0 * PI / wavelength;
    Ok(24.0 * finesse / (PI * k * k * waist * waist))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MirrorSpec {
    pub curvature: Curvature,
    /// Power transmission as a fraction.
    pub transmission: f64,
    /// Scatter plus absorption as a fraction.
    pub excess_loss: f64,
}

impl MirrorSpec {
    pub fn new(curvature: Curvature, transmission: f64, excess_loss: f64) -> Result<Self> {
        for (name, v) in [("transmission", transmission), ("excess loss", excess_loss)] {
            if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                return Err(domain(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if let Curvature::Radius(r) = curvature {
            if !(r.is_finite() && r != 0.0) {
                return Err(domain(format!("mirror radius must be finite and non-zero, got {r}")));
            }
        }
        Ok(Self { curvature, transmission, excess_loss })
    }

    pub fn budget(&self) -> LossBudget {
        LossBudget { transmission: self.transmission, excess_loss: self.excess_loss }
    }
}

/// A two-mirror cavity with its measurement uncertainties.
///
/// Stability is not enforced on construction; operations that need a
/// confined mode report an unstable geometry as an error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CavityDesign {
    pub name: String,
    pub length: f64,
    pub mirror_1: MirrorSpec,
    pub mirror_2: MirrorSpec,
    pub wavelength: f64,
    pub length_uncertainty: f64,
    /// Applied independently to every curved mirror.
    pub roc_uncertainty: f64,
}

impl CavityDesign {
    pub fn new(
        name: impl Into<String>,
        length: f64,
        mirror_1: MirrorSpec,
        mirror_2: MirrorSpec,
        wavelength: f64,
    ) -> Result<Self> {
        require_positive("cavity length", length)?;
        require_positive("wavelength", wavelength)?;
        Ok(Self {
            name: name.into(),
            length,
            mirror_1,
            mirror_2,
            wavelength,
            length_uncertainty: 0.0,
            roc_uncertainty: 0.0,
        })
    }

    /// Flat mirror 1 with transmission `t_flat`, curved mirror 2.
    pub fn half_symmetric(
        name: impl Into<String>,
        length: f64,
        roc: f64,
        t_flat: f64,
        t_curved: f64,
        wavelength: f64,
    ) -> Result<Self> {
        Self::new(
            name,
            length,
            MirrorSpec::new(Curvature::Flat, t_flat, 0.0)?,
            MirrorSpec::new(Curvature::radius(roc)?, t_curved, 0.0)?,
            wavelength,
        )
    }

    pub fn with_uncertainties(mut self, length: f64, roc: f64) -> Result<Self> {
        require_non_negative("length uncertainty", length)?;
        require_non_negative("roc uncertainty", roc)?;
        self.length_uncertainty = length;
        self.roc_uncertainty = roc;
        Ok(self)
    }

    pub fn geometry(&self) -> CavityGeometry {
        CavityGeometry {
            length: self.length,
            mirror_1: self.mirror_1.curvature,
            mirror_2: self.mirror_2.curvature,
        }
    }

    pub fn stability(&self) -> Stability {
        self.geometry().stability()
    }

    /// Mode waist at the atom, taken at the cavity waist (the flat mirror of a
    /// half-symmetric cavity).
    pub fn atom_waist(&self) -> Result<f64> {
        Ok(self.geometry().mode_waist(self.wavelength)?.radius)
    }

    pub fn expected_finesse(&self) -> Result<f64> {
        finesse_from_losses(&[self.mirror_1.budget(), self.mirror_2.budget()])
    }

    fn require_stable(&self) -> Result<Stability> {
        let s = self.stability();
        if s.stable {
            Ok(s)
        } else {
            Err(Error::UnstableCavity { g1: s.g1, g2: s.g2, product: s.product })
        }
    }
}

/// Atomic transition entering the strong-coupling comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomSpec {
    pub wavelength: f64,
    /// Dipole decay rate γ⊥ in rad/s.
    pub dipole_decay: f64,
}

impl AtomSpec {
    pub fn new(wavelength: f64, dipole_decay: f64) -> Result<Self> {
        require_positive("atomic wavelength", wavelength)?;
        require_positive("dipole decay rate", dipole_decay)?;
        Ok(Self { wavelength, dipole_decay })
    }

    /// Rb D2 preset: 780 nm, γ⊥/2π = 3.03 MHz.
    pub fn rubidium_d2() -> Self {
        Self { wavelength: 780.0 * NM, dipole_decay: 2.0 * PI * 3.03 * MHZ }
    }
}

/// Angular rates (rad/s) of the atom-cavity system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingRates {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub cooperativity: f64,
    pub strong_coupling: bool,
}

impl CouplingRates {
    pub fn from_rates(g: f64, kappa: f64, gamma: f64) -> Self {
        Self {
            g,
            kappa,
            gamma,
            cooperativity: g * g / (kappa * gamma),
            strong_coupling: is_strong_coupling(g, kappa, gamma),
        }
    }
}

pub fn is_strong_coupling(g: f64, kappa: f64, gamma: f64) -> bool {
    g > kappa && g > gamma
}

/// g, κ and γ⊥ for a cavity of measured finesse.
pub fn coupling_rates(design: &CavityDesign, atom: &AtomSpec, finesse: f64) -> Result<CouplingRates> {
    design.require_stable()?;
    if ((design.wavelength - atom.wavelength) / atom.wavelength).abs() > 1e-9 {
        return Err(Error::WavelengthMismatch(design.wavelength, atom.wavelength));
    }
    let linewidth = linewidth_from_finesse(design.length, finesse)?;
    let kappa = PI * linewidth;
    let eta = cooperativity(finesse, design.atom_waist()?, design.wavelength)?;
    let g = (eta * kappa * atom.dipole_decay).sqrt();
    Ok(CouplingRates::from_rates(g, kappa, atom.dipole_decay))
}

/// A value with its standard uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measurement {
    pub value: f64,
    pub uncertainty: f64,
}

impl Measurement {
    pub fn new(value: f64, uncertainty: f64) -> Self {
        Self { value, uncertainty }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, uncertainty: 0.0 }
    }

    pub fn relative(&self) -> f64 {
        self.uncertainty / self.value.abs()
    }
}

/// Inputs the figures of merit depend on, in Jacobian column order.
pub const INPUT_NAMES: [&str; 4] = ["length", "roc_1", "roc_2", "linewidth"];

/// Partial derivatives of (F, η) with respect to (L, R1, R2, Δν). Columns
/// belonging to flat mirrors are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jacobian {
    pub finesse: [f64; 4],
    pub cooperativity: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub finesse: Measurement,
    pub cooperativity: Measurement,
    pub jacobian: Jacobian,
    /// The geometry is within 1e-6 of a stability boundary; the linear
    /// propagation is unreliable there.
    pub near_boundary: bool,
}

const BOUNDARY_MARGIN: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;
const MAX_STEP_HALVINGS: usize = 40;

fn figures(design: &CavityDesign, x: &[f64; 4]) -> Result<(f64, f64)> {
    let mut d = design.clone();
    d.length = x[0];
    if let Curvature::Radius(_) = d.mirror_1.curvature {
        d.mirror_1.curvature = Curvature::Radius(x[1]);
    }
    if let Curvature::Radius(_) = d.mirror_2.curvature {
        d.mirror_2.curvature = Curvature::Radius(x[2]);
    }
    let f = finesse_from_linewidth(d.length, x[3])?;
    let eta = cooperativity(f, d.atom_waist()?, d.wavelength)?;
    Ok((f, eta))
}

/// Central finite-difference Jacobian of (F, η).
pub fn finesse_jacobian(design: &CavityDesign, linewidth: f64) -> Result<Jacobian> {
    let x0 = [
        design.length,
        design.mirror_1.curvature.as_radius().unwrap_or(0.0),
        design.mirror_2.curvature.as_radius().unwrap_or(0.0),
        linewidth,
    ];
    let mut jac = Jacobian { finesse: [0.0; 4], cooperativity: [0.0; 4] };
    for i in 0..4 {
        if x0[i] == 0.0 {
            continue;
        }
        // Shrink the step when it would cross a stability boundary.
        let mut h = FD_STEP * x0[i].abs();
        let mut last_err = None;
        for _ in 0..MAX_STEP_HALVINGS {
            let mut up = x0;
            let mut down = x0;
            up[i] += h;
            down[i] -= h;
            match (figures(design, &up), figures(design, &down)) {
                (Ok((f_up, e_up)), Ok((f_dn, e_dn))) => {
                    let step = up[i] - down[i];
                    jac.finesse[i] = (f_up - f_dn) / step;
                    jac.cooperativity[i] = (e_up - e_dn) / step;
                    last_err = None;
                    break;
                }
                (Err(e), _) | (_, Err(e)) => last_err = Some(e),
            }
            h *= 0.5;
        }
        if let Some(e) = last_err {
            return Err(e);
        }
    }
    Ok(jac)
}

/// First-order propagation of independent L, R and Δν uncertainties into F and η.
pub fn propagate_uncertainty(design: &CavityDesign, linewidth: Measurement) -> Result<UncertaintyReport> {
    let s = design.require_stable()?;
    require_non_negative("linewidth uncertainty", linewidth.uncertainty)?;
    let (f, eta) = figures(
        design,
        &[
            design.length,
            design.mirror_1.curvature.as_radius().unwrap_or(0.0),
            design.mirror_2.curvature.as_radius().unwrap_or(0.0),
            linewidth.value,
        ],
    )?;
    let near_boundary = s.product.abs() < BOUNDARY_MARGIN || (1.0 - s.product).abs() < BOUNDARY_MARGIN;
    let jac = finesse_jacobian(design, linewidth.value)?;
    let sigmas = [
        design.length_uncertainty,
        design.roc_uncertainty,
        design.roc_uncertainty,
        linewidth.uncertainty,
    ];
    let combine = |row: &[f64; 4]| -> f64 {
        row.iter().zip(&sigmas).map(|(d, s)| (d * s).powi(2)).sum::<f64>().sqrt()
    };
    Ok(UncertaintyReport {
        finesse: Measurement::new(f, combine(&jac.finesse)),
        cooperativity: Measurement::new(eta, combine(&jac.cooperativity)),
        jacobian: jac,
        near_boundary,
    })
}

/// One cavity entering the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportInput {
    pub design: CavityDesign,
    /// Measured FWHM linewidth in Hz.
    pub linewidth: Measurement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowMetrics {
    pub finesse_expected: f64,
    pub finesse_obtained: Measurement,
    pub cooperativity: Measurement,
    pub waist: f64,
    pub near_boundary: bool,
    pub coupling: Option<CouplingRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    /// Curvature of mirror 2 (the curved mirror of a half-symmetric cavity).
    pub roc: Curvature,
    pub length: f64,
    /// Transmission of mirror 2.
    pub transmission: f64,
    pub result: std::result::Result<RowMetrics, String>,
}

fn row_metrics(input: &ReportInput, atom: Option<&AtomSpec>) -> Result<RowMetrics> {
    let design = &input.design;
    let unc = propagate_uncertainty(design, input.linewidth)?;
    let coupling = atom
        .map(|a| coupling_rates(design, a, unc.finesse.value))
        .transpose()?;
    Ok(RowMetrics {
        finesse_expected: design.expected_finesse()?,
        finesse_obtained: unc.finesse,
        cooperativity: unc.cooperativity,
        waist: design.atom_waist()?,
        near_boundary: unc.near_boundary,
        coupling,
    })
}

/// Summary table rows; a failing row carries its error and does not affect the others.
pub fn table_report(inputs: &[ReportInput], atom: Option<&AtomSpec>) -> Vec<ReportRow> {
    inputs
        .iter()
        .map(|input| ReportRow {
            name: input.design.name.clone(),
            roc: input.design.mirror_2.curvature,
            length: input.design.length,
            transmission: input.design.mirror_2.transmission,
            result: row_metrics(input, atom).map_err(|e| e.to_string()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::waist_half_symmetric;
    use crate::units::{MM, PPM, UM};

    const LAMBDA: f64 = 780.0 * NM;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn scatter_loss_points() {
        let s = scattering_loss(0.3 * NM, LAMBDA, ScatterForm::Approximate).unwrap();
        assert!((s / PPM - 23.36).abs() < 0.01, "{}", s / PPM);
        assert!(s <= 25.0 * PPM);
        assert_eq!(scattering_loss(0.0, LAMBDA, ScatterForm::Exact).unwrap(), 0.0);
        let e = scattering_loss(LAMBDA / (4.0 * PI), LAMBDA, ScatterForm::Exact).unwrap();
        assert!((e - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(scattering_loss(-1.0, LAMBDA, ScatterForm::Exact).is_err());
    }

    #[test]
    fn finesse_from_linewidth_points() {
        let f = finesse_from_linewidth(2.075 * MM, 2.2435 * MHZ).unwrap();
        assert!((f - 32200.0).abs() < 5.0, "{f}");
        let fsr = free_spectral_range(3.0 * MM).unwrap();
        assert!((finesse_from_linewidth(3.0 * MM, fsr).unwrap() - 1.0).abs() < 1e-15);
        let f = finesse_from_linewidth(0.25 * MM, 157.0 * MHZ).unwrap();
        assert!((f - 3820.0).abs() < 2.0, "{f}");
        assert!(finesse_from_linewidth(0.0, 1.0).is_err());
        assert!(finesse_from_linewidth(1.0, -1.0).is_err());
    }

    #[test]
    fn finesse_from_losses_points() {
        let b = |t: f64| LossBudget { transmission: t * PPM, excess_loss: 0.0 };
        let f = finesse_from_losses(&[b(100.0), b(100.0)]).unwrap();
        assert!((f - 31415.9).abs() < 0.1);
        let f = finesse_from_losses(&[b(100.0), b(350.0)]).unwrap();
        assert!((f - 13963.0).abs() < 1.0);
        assert!((f - 13870.0).abs() < 1200.0);
        let x = 123.0 * PPM;
        assert!(rel(finesse_from_losses(&[b(123.0), b(123.0)]).unwrap(), PI / x) < 1e-12);
        assert_eq!(finesse_from_losses(&[b(0.0), b(0.0)]), Err(Error::InfiniteFinesse));
        assert_eq!(finesse_from_losses(&[]), Err(Error::InfiniteFinesse));
    }

    #[test]
    fn cooperativity_table_rows() {
        let cases = [(2.075, 100.0, 32200.0, 1.07), (2.53, 5.0, 19900.0, 3.8), (0.32, 2.0, 14200.0, 9.2)];
        for (l, r, f, eta) in cases {
            let w = waist_half_symmetric(l * MM, r * MM, LAMBDA).unwrap();
            let got = cooperativity(f, w, LAMBDA).unwrap();
            assert!(rel(got, eta) < 0.02, "L={l} R={r}: {got}");
        }
        assert!(cooperativity(0.0, 1.0, 1.0).is_err());
    }

    fn table_design(l_mm: f64, r_mm: f64, t_ppm: f64) -> CavityDesign {
        CavityDesign::half_symmetric("row", l_mm * MM, r_mm * MM, 100.0 * PPM, t_ppm * PPM, LAMBDA).unwrap()
    }

    #[test]
    fn coupling_rates_rows() {
        let atom = AtomSpec::rubidium_d2();
        let r2 = coupling_rates(&table_design(2.53, 5.0, 200.0), &atom, 19900.0).unwrap();
        assert!((r2.g / (2.0 * PI * MHZ) - 4.1).abs() < 0.05, "{}", r2.g / (2.0 * PI * MHZ));
        assert!((r2.kappa / (2.0 * PI * MHZ) - 1.49).abs() < 0.01);
        assert!(r2.strong_coupling);
        let r4 = coupling_rates(&table_design(0.25, 0.7, 1500.0), &atom, 3820.0).unwrap();
        assert!((r4.kappa / (2.0 * PI * MHZ) - 78.5).abs() < 0.1);
        assert!((r4.g / (2.0 * PI * MHZ) - 35.8).abs() < 0.3, "{}", r4.g / (2.0 * PI * MHZ));
        assert!(!r4.strong_coupling);
        let zero = CouplingRates::from_rates(0.0, 1.0, 1.0);
        assert!(!zero.strong_coupling);
        assert_eq!(zero.cooperativity, 0.0);
    }

    #[test]
    fn coupling_rates_rejects_unstable_and_mismatched() {
        let atom = AtomSpec::rubidium_d2();
        assert!(matches!(
            coupling_rates(&table_design(6.0, 5.0, 100.0), &atom, 1000.0),
            Err(Error::UnstableCavity { .. })
        ));
        let other = AtomSpec::new(852.0 * NM, 1e7).unwrap();
        assert!(matches!(
            coupling_rates(&table_design(2.0, 5.0, 100.0), &other, 1000.0),
            Err(Error::WavelengthMismatch(..))
        ));
    }

    #[test]
    fn uncertainty_row_one() {
        let d = table_design(2.075, 100.0, 100.0).with_uncertainties(25.0 * UM, 0.0).unwrap();
        let lw = linewidth_from_finesse(d.length, 32200.0).unwrap();
        let rep = propagate_uncertainty(&d, Measurement::new(lw, 0.01 * lw)).unwrap();
        let expect = ((25.0f64 / 2075.0).powi(2) + 1e-4).sqrt();
        assert!(rel(rep.finesse.relative(), expect) < 1e-6, "{}", rep.finesse.relative());
        assert!(!rep.near_boundary);
    }

    #[test]
    fn uncertainty_zero_inputs() {
        let d = table_design(2.53, 5.0, 200.0);
        let rep = propagate_uncertainty(&d, Measurement::exact(3e6)).unwrap();
        assert_eq!(rep.finesse.uncertainty, 0.0);
        assert_eq!(rep.cooperativity.uncertainty, 0.0);
    }

    #[test]
    fn uncertainty_roc_matches_analytic_partial() {
        let d = table_design(0.25, 0.7, 1500.0).with_uncertainties(0.0, 20.0 * UM).unwrap();
        let lw = linewidth_from_finesse(d.length, 3820.0).unwrap();
        let rep = propagate_uncertainty(&d, Measurement::exact(lw)).unwrap();
        // η ∝ 1/w², w² ∝ sqrt(L(R-L)) so ∂ln η/∂R = -1/(2(R-L))
        let analytic = 1.0 / (2.0 * (0.7 * MM - 0.25 * MM)) * 20.0 * UM;
        assert!(rel(rep.cooperativity.relative(), analytic) < 1e-6);
    }

    #[test]
    fn uncertainty_flags_boundary() {
        let d = table_design(1.0 * (1.0 - 1e-8), 1.0, 100.0);
        let lw = 1e6;
        let rep = propagate_uncertainty(&d, Measurement::exact(lw)).unwrap();
        assert!(rep.near_boundary);
        assert!(rep.jacobian.cooperativity[2].is_finite());
        let d = table_design(0.5, 1.0, 100.0);
        assert!(!propagate_uncertainty(&d, Measurement::exact(lw)).unwrap().near_boundary);
    }

    #[test]
    fn report_isolates_bad_rows() {
        let good = ReportInput { design: table_design(2.53, 5.0, 200.0), linewidth: Measurement::exact(3e6) };
        let bad = ReportInput { design: table_design(6.0, 5.0, 200.0), linewidth: Measurement::exact(3e6) };
        let rows = table_report(&[good.clone(), bad, good], Some(&AtomSpec::rubidium_d2()));
        assert_eq!(rows.len(), 3);
        assert!(rows[0].result.is_ok());
        assert!(rows[1].result.is_err());
        assert_eq!(rows[0], rows[2]);
        assert!(table_report(&[], None).is_empty());
    }
}
