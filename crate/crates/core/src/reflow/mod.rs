//! Quasi-static model of a glass membrane drawn into a sealed blind hole.
//!
//! A coverslip seals a cylindrical hole of radius `a` and depth `d` while the
//! furnace is at the seal pressure. Raising the furnace pressure pushes the
//! softened glass into the hole as a spherical cap of sag `h` until the
//! outside pressure balances the compressed trapped gas plus the membrane
//! tension term `C·γ_m/R`:
//!
//! ```text
//! f(h) = P_ext - P0·(T_form/T_seal)·V0/(V0 - V_cap(a, h)) - C·γ_m/R(a, h)
//! ```
//!
//! The root is found by bisection on `h ∈ [0, h_max]` with
//! `V_cap(a, h_max) = 0.95·V0`.

mod schedule;

pub use schedule::{anneal_schedule, validate_schedule, AnnealSettings, FurnaceSchedule, ScheduleLimits, Segment, SegmentKind};

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{domain, require_non_negative, require_positive, Error, Result};
use crate::optics::Curvature;
use crate::solve::{bisect, golden_section_max, BisectError};
use crate::units::{celsius_to_kelvin, MBAR, MM, UM};

/// Residual tolerance of the equilibrium solve [Pa].
pub const PRESSURE_TOLERANCE: f64 = 1e-6;

/// Fraction of the hole volume the cap may occupy.
pub const MAX_FILL_FRACTION: f64 = 0.95;

/// Radius of the sphere through the rim of a hole of radius `a` with sag `h`.
pub fn cap_radius(a: f64, h: f64) -> Curvature {
    if h == 0.0 {
        Curvature::Flat
    } else {
        Curvature::Radius((a * a + h * h) / (2.0 * h))
    }
}

/// Volume of a spherical cap of base radius `a` and height `h`.
pub fn cap_volume(a: f64, h: f64) -> f64 {
    PI * h * (3.0 * a * a + h * h) / 6.0
}

/// Ideal-gas pressure of a sealed charge after heating and compression.
pub fn trapped_pressure(
    seal_pressure: f64,
    seal_temperature: f64,
    temperature: f64,
    sealed_volume: f64,
    volume: f64,
) -> Result<f64> {
    require_positive("seal pressure", seal_pressure)?;
    require_positive("seal temperature", seal_temperature)?;
    require_positive("temperature", temperature)?;
    require_positive("sealed volume", sealed_volume)?;
    if !(volume.is_finite() && volume > 0.0) {
        return Err(domain(format!("gas volume must be positive, got {volume} (singular pressure)")));
    }
    Ok(seal_pressure * (temperature / seal_temperature) * (sealed_volume / volume))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflowRecipe {
    pub hole_radius: f64,
    pub hole_depth: f64,
    /// Furnace pressure when the coverslip seals the hole [Pa].
    pub seal_pressure: f64,
    /// [K]
    pub seal_temperature: f64,
    pub forming_pressure: f64,
    pub forming_temperature: f64,
    /// Membrane tension γ_m [N/m].
    pub membrane_tension: f64,
    /// Dimensionless factor C in the tension pressure C·γ_m/R.
    pub tension_factor: f64,
    /// Carried for record keeping; the thin-membrane model does not use it.
    pub coverslip_thickness: f64,
}

impl Default for ReflowRecipe {
    /// 1 mm diameter, 2 mm deep hole; sealed at 300 mbar and 800 °C, formed at 700 mbar.
    fn default() -> Self {
        Self {
            hole_radius: 0.5 * MM,
            hole_depth: 2.0 * MM,
            seal_pressure: 300.0 * MBAR,
            seal_temperature: celsius_to_kelvin(800.0),
            forming_pressure: 700.0 * MBAR,
            forming_temperature: celsius_to_kelvin(800.0),
            membrane_tension: 0.3,
            tension_factor: 4.0,
            coverslip_thickness: 100.0 * UM,
        }
    }
}

impl ReflowRecipe {
    pub fn validate(&self) -> Result<()> {
        require_positive("hole radius", self.hole_radius)?;
        require_positive("hole depth", self.hole_depth)?;
        require_positive("seal pressure", self.seal_pressure)?;
        require_positive("seal temperature", self.seal_temperature)?;
        require_positive("forming pressure", self.forming_pressure)?;
        require_positive("forming temperature", self.forming_temperature)?;
        require_non_negative("membrane tension", self.membrane_tension)?;
        require_positive("tension factor", self.tension_factor)?;
        require_non_negative("coverslip thickness", self.coverslip_thickness)?;
        if self.forming_pressure < self.seal_pressure {
            return Err(domain(format!(
                "forming pressure {} Pa is below seal pressure {} Pa",
                self.forming_pressure, self.seal_pressure
            )));
        }
        Ok(())
    }

    /// Volume of the blind hole, π·a²·d.
    pub fn hole_volume(&self) -> f64 {
        PI * self.hole_radius * self.hole_radius * self.hole_depth
    }

    /// Trapped-gas pressure at the forming temperature before any deformation.
    pub fn initial_internal_pressure(&self) -> f64 {
        self.seal_pressure * self.forming_temperature / self.seal_temperature
    }

    /// Net inward pressure f(h).
    pub fn pressure_imbalance(&self, sag: f64) -> f64 {
        let v0 = self.hole_volume();
        let gas = self.initial_internal_pressure() * v0 / (v0 - cap_volume(self.hole_radius, sag));
        let a = self.hole_radius;
        // C·γ/R written as C·γ·2h/(a² + h²) so that h = 0 is regular.
        let tension = self.tension_factor * self.membrane_tension * 2.0 * sag / (a * a + sag * sag);
        self.forming_pressure - gas - tension
    }

    /// Sag at which the cap fills [`MAX_FILL_FRACTION`] of the hole.
    pub fn max_sag(&self) -> f64 {
        let a = self.hole_radius;
        let target = MAX_FILL_FRACTION * self.hole_volume();
        let upper = (6.0 * target / PI).cbrt().min(2.0 * target / (PI * a * a));
        // cap_volume is strictly increasing in h
        bisect(|h| cap_volume(a, h) - target, 0.0, upper, 0.0)
            .map(|r| r.x)
            .unwrap_or(upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeformationResult {
    pub sag: f64,
    pub roc: Curvature,
    /// Trapped-gas pressure at equilibrium [Pa].
    pub internal_pressure: f64,
    /// Remaining gas volume [m³].
    pub gas_volume: f64,
    /// f(h*) [Pa].
    pub residual: f64,
}

/// Equilibrium sag and curvature for a recipe.
pub fn equilibrium_deformation(recipe: &ReflowRecipe) -> Result<DeformationResult> {
    recipe.validate()?;
    let v0 = recipe.hole_volume();
    let f0 = recipe.pressure_imbalance(0.0);
    if f0 <= 0.0 {
        return Ok(DeformationResult {
            sag: 0.0,
            roc: Curvature::Flat,
            internal_pressure: recipe.initial_internal_pressure(),
            gas_volume: v0,
            residual: f0,
        });
    }
    let h_max = recipe.max_sag();
    let root = bisect(|h| recipe.pressure_imbalance(h), 0.0, h_max, PRESSURE_TOLERANCE).map_err(|e| match e {
        BisectError::NoSignChange { f_hi, .. } => Error::NoEquilibrium(format!(
            "net inward pressure is still {f_hi:.3} Pa when the cap fills {:.0}% of the hole (h_max = {h_max:.4e} m); \
             forming pressure too high for this hole depth",
            MAX_FILL_FRACTION * 100.0
        )),
        BisectError::NotANumber { x } => Error::NoEquilibrium(format!("pressure balance undefined at h = {x:e} m")),
    })?;
    let gas_volume = v0 - cap_volume(recipe.hole_radius, root.x);
    Ok(DeformationResult {
        sag: root.x,
        roc: cap_radius(recipe.hole_radius, root.x),
        internal_pressure: recipe.initial_internal_pressure() * v0 / gas_volume,
        gas_volume,
        residual: root.residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub hole_radius: f64,
    pub forming_pressure: f64,
    pub result: std::result::Result<DeformationResult, String>,
}

/// Evaluates the forward model on the grid `hole_radii × forming_pressures`.
/// An empty axis falls back to the template's value. Failed points are
/// recorded in their row.
pub fn predict_roc_sweep(template: &ReflowRecipe, hole_radii: &[f64], forming_pressures: &[f64]) -> Vec<SweepRow> {
    let radii = if hole_radii.is_empty() { vec![template.hole_radius] } else { hole_radii.to_vec() };
    let pressures = if forming_pressures.is_empty() {
        vec![template.forming_pressure]
    } else {
        forming_pressures.to_vec()
    };
    let mut rows = Vec::with_capacity(radii.len() * pressures.len());
    for &a in &radii {
        for &p in &pressures {
            let recipe = ReflowRecipe { hole_radius: a, forming_pressure: p, ..*template };
            rows.push(SweepRow {
                hole_radius: a,
                forming_pressure: p,
                result: equilibrium_deformation(&recipe).map_err(|e| e.to_string()),
            });
        }
    }
    rows
}

/// Recipe parameter solved for by [`inverse_design`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FreeVariable {
    HoleRadius,
    FormingPressure,
}

impl FreeVariable {
    fn get(self, r: &ReflowRecipe) -> f64 {
        match self {
            FreeVariable::HoleRadius => r.hole_radius,
            FreeVariable::FormingPressure => r.forming_pressure,
        }
    }

    fn set(self, r: &ReflowRecipe, value: f64) -> ReflowRecipe {
        match self {
            FreeVariable::HoleRadius => ReflowRecipe { hole_radius: value, ..*r },
            FreeVariable::FormingPressure => ReflowRecipe { forming_pressure: value, ..*r },
        }
    }

    /// Search interval used when the caller does not supply one.
    pub fn default_bounds(self, r: &ReflowRecipe) -> (f64, f64) {
        match self {
            FreeVariable::HoleRadius => (0.05 * MM, 5.0 * MM),
            FreeVariable::FormingPressure => {
                // the cap can compress the gas by at most 1/(1 - 0.95) = 20×
                (r.seal_pressure.max(r.initial_internal_pressure()), 19.0 * r.initial_internal_pressure())
            }
        }
    }
}

const INVERSE_SCAN_POINTS: usize = 121;
const INVERSE_REL_TOL: f64 = 1e-7;

fn roc_of(recipe: &ReflowRecipe) -> Option<f64> {
    match equilibrium_deformation(recipe) {
        Ok(DeformationResult { roc: Curvature::Radius(r), .. }) => Some(r),
        Ok(_) => Some(f64::INFINITY),
        Err(_) => None,
    }
}

/// Solves for the value of `variable` that yields a mirror of radius `target`.
///
/// The forward model is scanned over `bounds`; every bracketed crossing is
/// refined by bisection and the crossing nearest the template's current value
/// is returned. R(P_ext) is not monotone once the cap passes the hemisphere,
/// so the template value selects the branch.
pub fn inverse_design(
    template: &ReflowRecipe,
    target: f64,
    variable: FreeVariable,
    bounds: Option<(f64, f64)>,
) -> Result<f64> {
    require_positive("target radius", target)?;
    let (lo, hi) = bounds.unwrap_or_else(|| variable.default_bounds(template));
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(domain(format!("invalid search bounds [{lo}, {hi}]")));
    }
    let xs: Vec<f64> = (0..INVERSE_SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (INVERSE_SCAN_POINTS - 1) as f64)
        .collect();
    let rs: Vec<Option<f64>> = xs.iter().map(|&x| roc_of(&variable.set(template, x))).collect();

    let g = |x: f64| match roc_of(&variable.set(template, x)) {
        Some(r) if r.is_infinite() => 1.0,
        Some(r) => (r - target) / target,
        None => f64::NAN,
    };
    let mut roots = Vec::new();
    let bracket = |lo: f64, hi: f64, roots: &mut Vec<f64>| {
        if let Ok(root) = bisect(g, lo, hi, INVERSE_REL_TOL) {
            roots.push(root.x);
        }
    };
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rs.iter().flatten() {
        min = min.min(*r);
        max = max.max(*r);
    }
    for i in 0..xs.len() - 1 {
        let (Some(r0), Some(r1)) = (rs[i], rs[i + 1]) else { continue };
        if r0 == target {
            roots.push(xs[i]);
        } else if (r0 - target).signum() != (r1 - target).signum() {
            bracket(xs[i], xs[i + 1], &mut roots);
        }
    }
    if rs.last().copied().flatten() == Some(target) {
        roots.push(hi);
    }
    // A turning point between grid samples can hide a pair of crossings.
    for i in 1..xs.len() - 1 {
        let (Some(left), Some(mid), Some(right)) = (rs[i - 1], rs[i], rs[i + 1]) else { continue };
        if !mid.is_finite() {
            continue;
        }
        let sign = if mid <= left && mid <= right && mid > target {
            1.0
        } else if mid >= left && mid >= right && mid < target {
            -1.0
        } else {
            continue;
        };
        let (x_turn, value) = golden_section_max(
            |x| roc_of(&variable.set(template, x)).map_or(f64::NEG_INFINITY, |r| -sign * r),
            xs[i - 1],
            xs[i + 1],
            80,
        );
        let extreme = -sign * value;
        min = min.min(extreme);
        max = max.max(extreme);
        if sign * (extreme - target) <= 0.0 {
            bracket(xs[i - 1], x_turn, &mut roots);
            bracket(x_turn, xs[i + 1], &mut roots);
        }
    }
    if !(min <= target && target <= max) {
        return Err(Error::UnachievableTarget { target, min, max });
    }
    let current = variable.get(template);
    roots
        .into_iter()
        .min_by(|a, b| (a - current).abs().total_cmp(&(b - current).abs()))
        .ok_or(Error::UnachievableTarget { target, min, max })
}
