//! Furnace temperature and pressure program for sealing, forming and annealing.

use serde::Serialize;

use super::ReflowRecipe;
use crate::error::{Error, Result};
use crate::units::{celsius_to_kelvin, kelvin_to_celsius, per_minute_to_per_second, MINUTE};

/// Thermal program parameters. Defaults are for borosilicate D263.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnealSettings {
    /// [K]
    pub ambient: f64,
    /// Heating rate to the seal temperature [K/s].
    pub heat_rate: f64,
    /// Time at the forming temperature after pressurizing [s].
    pub forming_hold: f64,
    pub cool_rate_to_anneal: f64,
    pub anneal_point: f64,
    pub anneal_hold: f64,
    pub cool_rate_to_strain: f64,
    pub strain_point: f64,
    /// Fastest cooling the furnace allows below the strain point [K/s].
    pub max_cool_rate: f64,
}

impl Default for AnnealSettings {
    fn default() -> Self {
        Self {
            ambient: celsius_to_kelvin(20.0),
            heat_rate: per_minute_to_per_second(5.0),
            forming_hold: 10.0 * MINUTE,
            cool_rate_to_anneal: per_minute_to_per_second(3.0),
            anneal_point: celsius_to_kelvin(557.0),
            anneal_hold: 30.0 * MINUTE,
            cool_rate_to_strain: per_minute_to_per_second(2.0),
            strain_point: celsius_to_kelvin(529.0),
            max_cool_rate: per_minute_to_per_second(10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Ramp,
    Pressurize,
    Form,
    CoolToAnneal,
    Anneal,
    CoolToStrain,
    CoolToAmbient,
}

impl SegmentKind {
    pub fn label(self) -> &'static str {
        match self {
            SegmentKind::Ramp => "ramp",
            SegmentKind::Pressurize => "pressurize",
            SegmentKind::Form => "form",
            SegmentKind::CoolToAnneal => "cool-to-anneal",
            SegmentKind::Anneal => "anneal",
            SegmentKind::CoolToStrain => "cool-to-strain",
            SegmentKind::CoolToAmbient => "cool-to-ambient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// [K]
    pub start_temperature: f64,
    pub end_temperature: f64,
    /// Signed rate [K/s]; zero for holds.
    pub rate: f64,
    /// [s]
    pub duration: f64,
    /// Furnace pressure during the segment [Pa].
    pub pressure: f64,
}

impl Segment {
    fn ramp(kind: SegmentKind, from: f64, to: f64, rate: f64, pressure: f64) -> Self {
        let dt = to - from;
        let duration = if dt == 0.0 { 0.0 } else { dt.abs() / rate };
        Self {
            kind,
            start_temperature: from,
            end_temperature: to,
            rate: rate.copysign(dt),
            duration,
            pressure,
        }
    }

    fn hold(kind: SegmentKind, at: f64, duration: f64, pressure: f64) -> Self {
        Self { kind, start_temperature: at, end_temperature: at, rate: 0.0, duration, pressure }
    }

    pub fn duration_minutes(&self) -> f64 {
        self.duration / MINUTE
    }

    pub fn rate_per_minute(&self) -> f64 {
        self.rate * MINUTE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FurnaceSchedule {
    pub segments: Vec<Segment>,
}

impl FurnaceSchedule {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// Builds the seal/form/anneal program for a recipe.
pub fn anneal_schedule(recipe: &ReflowRecipe, settings: &AnnealSettings) -> Result<FurnaceSchedule> {
    recipe.validate()?;
    let s = settings;
    for (name, rate) in [
        ("heat rate", s.heat_rate),
        ("cool rate to anneal point", s.cool_rate_to_anneal),
        ("cool rate to strain point", s.cool_rate_to_strain),
        ("maximum cool rate", s.max_cool_rate),
    ] {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Schedule(format!("{name} must be positive")));
        }
    }
    if !(s.forming_hold >= 0.0 && s.anneal_hold >= 0.0) {
        return Err(Error::Schedule("hold durations must be non-negative".into()));
    }
    let (t_form, t_seal) = (recipe.forming_temperature, recipe.seal_temperature);
    if !(t_form >= s.anneal_point && s.anneal_point >= s.strain_point && s.strain_point >= s.ambient) {
        return Err(Error::Schedule(format!(
            "temperatures must satisfy forming ({:.1} °C) >= annealing ({:.1} °C) >= strain ({:.1} °C) >= ambient ({:.1} °C)",
            kelvin_to_celsius(t_form),
            kelvin_to_celsius(s.anneal_point),
            kelvin_to_celsius(s.strain_point),
            kelvin_to_celsius(s.ambient),
        )));
    }
    if t_seal < s.ambient {
        return Err(Error::Schedule("seal temperature is below ambient".into()));
    }
    let (p_seal, p_form) = (recipe.seal_pressure, recipe.forming_pressure);
    let mut segments = vec![Segment::ramp(SegmentKind::Ramp, s.ambient, t_seal, s.heat_rate, p_seal)];
    if t_form != t_seal {
        let rate = if t_form > t_seal { s.heat_rate } else { s.cool_rate_to_anneal };
        segments.push(Segment::ramp(SegmentKind::Ramp, t_seal, t_form, rate, p_seal));
    }
    segments.extend([
        Segment::hold(SegmentKind::Pressurize, t_form, 0.0, p_form),
        Segment::hold(SegmentKind::Form, t_form, s.forming_hold, p_form),
        Segment::ramp(SegmentKind::CoolToAnneal, t_form, s.anneal_point, s.cool_rate_to_anneal, p_form),
        Segment::hold(SegmentKind::Anneal, s.anneal_point, s.anneal_hold, p_form),
        Segment::ramp(SegmentKind::CoolToStrain, s.anneal_point, s.strain_point, s.cool_rate_to_strain, p_form),
        Segment::ramp(SegmentKind::CoolToAmbient, s.strain_point, s.ambient, s.max_cool_rate, p_form),
    ]);
    Ok(FurnaceSchedule { segments })
}

/// Rules a schedule must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleLimits {
    /// [K/s]
    pub max_heat_rate: f64,
    /// Cooling rate limit while the glass is above its strain point [K/s].
    pub max_cool_rate_above_strain: f64,
    pub strain_point: f64,
    pub anneal_point: f64,
    /// Minimum time held at the annealing point [s].
    pub min_anneal_hold: f64,
}

impl Default for ScheduleLimits {
    fn default() -> Self {
        let s = AnnealSettings::default();
        Self {
            max_heat_rate: s.heat_rate,
            max_cool_rate_above_strain: s.cool_rate_to_anneal,
            strain_point: s.strain_point,
            anneal_point: s.anneal_point,
            min_anneal_hold: s.anneal_hold,
        }
    }
}

const TEMP_EPS: f64 = 1e-9;
const RATE_EPS: f64 = 1e-12;

/// Checks a schedule against `limits`, collecting every violation.
pub fn validate_schedule(schedule: &FurnaceSchedule, limits: &ScheduleLimits) -> Result<()> {
    let mut problems = Vec::new();
    let per_min = |r: f64| r * MINUTE;

    for (i, pair) in schedule.segments.windows(2).enumerate() {
        if (pair[0].end_temperature - pair[1].start_temperature).abs() > TEMP_EPS {
            problems.push(format!(
                "segments {} and {} are not contiguous ({:.2} °C -> {:.2} °C)",
                i + 1,
                i + 2,
                kelvin_to_celsius(pair[0].end_temperature),
                kelvin_to_celsius(pair[1].start_temperature)
            ));
        }
    }

    let mut forming_pressure = None;
    let mut annealed = 0.0;
    for (i, seg) in schedule.segments.iter().enumerate() {
        let n = i + 1;
        let dt = seg.end_temperature - seg.start_temperature;
        if seg.duration < 0.0 {
            problems.push(format!("segment {n} has negative duration"));
        }
        if dt != 0.0 && (seg.rate * seg.duration - dt).abs() > 1e-6 * dt.abs().max(1.0) {
            problems.push(format!("segment {n}: rate x duration does not match its temperature change"));
        }
        if dt > 0.0 && seg.rate > limits.max_heat_rate + RATE_EPS {
            problems.push(format!(
                "segment {n} heats at {:.2} °C/min, above the {:.2} °C/min limit",
                per_min(seg.rate),
                per_min(limits.max_heat_rate)
            ));
        }
        if dt < 0.0
            && seg.start_temperature > limits.strain_point + TEMP_EPS
            && -seg.rate > limits.max_cool_rate_above_strain + RATE_EPS
        {
            problems.push(format!(
                "segment {n} cools at {:.2} °C/min above the strain point ({:.1} °C), exceeding the {:.2} °C/min limit",
                -per_min(seg.rate),
                kelvin_to_celsius(limits.strain_point),
                per_min(limits.max_cool_rate_above_strain)
            ));
        }
        if dt == 0.0 && (seg.start_temperature - limits.anneal_point).abs() <= TEMP_EPS {
            annealed += seg.duration;
        }
        match (seg.kind, forming_pressure) {
            (SegmentKind::Pressurize, _) => forming_pressure = Some(seg.pressure),
            (_, Some(p)) if seg.pressure != p => problems.push(format!(
                "segment {n} changes the furnace pressure after forming ({:.1} mbar vs {:.1} mbar)",
                seg.pressure / 100.0,
                p / 100.0
            )),
            _ => {}
        }
    }
    if annealed + 1e-9 < limits.min_anneal_hold {
        problems.push(format!(
            "held {:.1} min at the annealing point ({:.1} °C), need at least {:.1} min",
            annealed / MINUTE,
            kelvin_to_celsius(limits.anneal_point),
            limits.min_anneal_hold / MINUTE
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Schedule(problems.join("; ")))
    }
}
