//! Key-value configuration files with units carried in the key names.
//!
//! ```text
//! # comment
//! [atom]
//! wavelength_nm = 780
//! dipole_decay_mhz = 3.03
//!
//! [cavity]
//! name = "2 mm"
//! length_mm = 0.32
//! roc_2_mm = 2
//! transmission_1_ppm = 100
//! transmission_2_ppm = 350
//! linewidth_mhz = 33.0
//! ```
//!
//! `[cavity]` may repeat; the other sections appear at most once. Every
//! dimensioned key ends in a unit suffix (`length_mm`, `seal_pressure_mbar`,
//! `heat_rate_c_per_min`); dimensionless keys have none. Parsing collects all
//! problems, each with its line number. [`ToolConfig::to_config_string`]
//! writes SI units and reparses to an identical value.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use crate::optics::Curvature;
use crate::qed::{AtomSpec, CavityDesign, Measurement, MirrorSpec, ReportInput};
use crate::reflow::{AnnealSettings, FreeVariable, ReflowRecipe};
use crate::metrology::{CircleFitOptions, PeriodogramOptions};
use crate::units::{MHZ, MM, NM, UM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Length,
    Pressure,
    Temperature,
    Frequency,
    Fraction,
    Tension,
    Rate,
    Time,
    Mass,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Length => "length",
            Dim::Pressure => "pressure",
            Dim::Temperature => "temperature",
            Dim::Frequency => "frequency",
            Dim::Fraction => "fraction",
            Dim::Tension => "tension",
            Dim::Rate => "temperature rate",
            Dim::Time => "time",
            Dim::Mass => "mass",
        }
    }

    fn example(self) -> &'static str {
        match self {
            Dim::Length => "mm",
            Dim::Pressure => "mbar",
            Dim::Temperature => "c",
            Dim::Frequency => "mhz",
            Dim::Fraction => "ppm",
            Dim::Tension => "n_per_m",
            Dim::Rate => "c_per_min",
            Dim::Time => "min",
            Dim::Mass => "kg",
        }
    }
}

struct Unit {
    suffix: &'static str,
    dim: Dim,
    scale: f64,
    offset: f64,
}

const fn unit(suffix: &'static str, dim: Dim, scale: f64) -> Unit {
    Unit { suffix, dim, scale, offset: 0.0 }
}

// Longest suffixes first so that `_c_per_min` wins over `_min`.
const UNITS: &[Unit] = &[
    unit("n_per_m", Dim::Tension, 1.0),
    unit("c_per_min", Dim::Rate, 1.0 / 60.0),
    unit("k_per_min", Dim::Rate, 1.0 / 60.0),
    unit("c_per_s", Dim::Rate, 1.0),
    unit("k_per_s", Dim::Rate, 1.0),
    unit("mbar", Dim::Pressure, 100.0),
    unit("frac", Dim::Fraction, 1.0),
    unit("khz", Dim::Frequency, 1e3),
    unit("mhz", Dim::Frequency, 1e6),
    unit("ghz", Dim::Frequency, 1e9),
    unit("bar", Dim::Pressure, 1e5),
    unit("kpa", Dim::Pressure, 1e3),
    unit("ppm", Dim::Fraction, 1e-6),
    unit("pct", Dim::Fraction, 1e-2),
    unit("min", Dim::Time, 60.0),
    unit("hz", Dim::Frequency, 1.0),
    unit("pa", Dim::Pressure, 1.0),
    unit("mm", Dim::Length, 1e-3),
    unit("um", Dim::Length, 1e-6),
    unit("nm", Dim::Length, 1e-9),
    unit("kg", Dim::Mass, 1.0),
    Unit { suffix: "c", dim: Dim::Temperature, scale: 1.0, offset: 273.15 },
    unit("k", Dim::Temperature, 1.0),
    unit("m", Dim::Length, 1.0),
    unit("s", Dim::Time, 1.0),
    unit("h", Dim::Time, 3600.0),
    unit("g", Dim::Mass, 1e-3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Quantity(Dim),
    /// A length or the word `flat`.
    Radius,
    Number,
    Integer,
    Text,
}

impl Kind {
    fn dim(self) -> Option<Dim> {
        match self {
            Kind::Quantity(d) => Some(d),
            Kind::Radius => Some(Dim::Length),
            _ => None,
        }
    }
}

type Schema = &'static [(&'static str, Kind)];

const ATOM: Schema = &[
    ("preset", Kind::Text),
    ("wavelength", Kind::Quantity(Dim::Length)),
    ("dipole_decay", Kind::Quantity(Dim::Frequency)),
];

const CAVITY: Schema = &[
    ("name", Kind::Text),
    ("length", Kind::Quantity(Dim::Length)),
    ("roc_1", Kind::Radius),
    ("roc_2", Kind::Radius),
    ("transmission_1", Kind::Quantity(Dim::Fraction)),
    ("transmission_2", Kind::Quantity(Dim::Fraction)),
    ("loss_1", Kind::Quantity(Dim::Fraction)),
    ("loss_2", Kind::Quantity(Dim::Fraction)),
    ("wavelength", Kind::Quantity(Dim::Length)),
    ("length_uncertainty", Kind::Quantity(Dim::Length)),
    ("roc_uncertainty", Kind::Quantity(Dim::Length)),
    ("linewidth", Kind::Quantity(Dim::Frequency)),
    ("finesse_measured", Kind::Number),
    ("linewidth_uncertainty", Kind::Quantity(Dim::Fraction)),
];

const REFLOW: Schema = &[
    ("hole_radius", Kind::Quantity(Dim::Length)),
    ("hole_diameter", Kind::Quantity(Dim::Length)),
    ("hole_depth", Kind::Quantity(Dim::Length)),
    ("seal_pressure", Kind::Quantity(Dim::Pressure)),
    ("seal_temperature", Kind::Quantity(Dim::Temperature)),
    ("forming_pressure", Kind::Quantity(Dim::Pressure)),
    ("forming_temperature", Kind::Quantity(Dim::Temperature)),
    ("membrane_tension", Kind::Quantity(Dim::Tension)),
    ("tension_factor", Kind::Number),
    ("coverslip_thickness", Kind::Quantity(Dim::Length)),
    ("target_roc", Kind::Quantity(Dim::Length)),
    ("free_variable", Kind::Text),
    ("ambient_temperature", Kind::Quantity(Dim::Temperature)),
    ("heat_rate", Kind::Quantity(Dim::Rate)),
    ("forming_hold", Kind::Quantity(Dim::Time)),
    ("cool_rate_to_anneal", Kind::Quantity(Dim::Rate)),
    ("anneal_temperature", Kind::Quantity(Dim::Temperature)),
    ("anneal_hold", Kind::Quantity(Dim::Time)),
    ("cool_rate_to_strain", Kind::Quantity(Dim::Rate)),
    ("strain_temperature", Kind::Quantity(Dim::Temperature)),
    ("max_cool_rate", Kind::Quantity(Dim::Rate)),
];

const METROLOGY: Schema = &[
    ("noise_floor", Kind::Quantity(Dim::Length)),
    ("min_sag_ratio", Kind::Number),
    ("max_iterations", Kind::Integer),
    ("polynomial_degree", Kind::Integer),
    ("artifact_threshold", Kind::Quantity(Dim::Fraction)),
    ("oversampling", Kind::Integer),
    ("wavelength", Kind::Quantity(Dim::Length)),
];

const INSTRUMENT: Schema = &[
    ("linewidth", Kind::Quantity(Dim::Frequency)),
    ("modulation_frequency", Kind::Quantity(Dim::Frequency)),
    ("slope", Kind::Quantity(Dim::Frequency)),
    ("sideband_depth", Kind::Number),
    ("noise", Kind::Quantity(Dim::Fraction)),
    ("background", Kind::Quantity(Dim::Fraction)),
    ("samples", Kind::Integer),
    ("trials", Kind::Integer),
    ("probe_waist", Kind::Quantity(Dim::Length)),
    ("probe_wavelength", Kind::Quantity(Dim::Length)),
    ("mirror_roc", Kind::Quantity(Dim::Length)),
    ("position_noise", Kind::Quantity(Dim::Length)),
    ("scan_step", Kind::Quantity(Dim::Length)),
];

fn schema(section: &str) -> Option<Schema> {
    match section {
        "atom" => Some(ATOM),
        "cavity" => Some(CAVITY),
        "reflow" => Some(REFLOW),
        "metrology" => Some(METROLOGY),
        "instrument" => Some(INSTRUMENT),
        _ => None,
    }
}

/// One problem found while reading a configuration. Line 0 marks problems
/// with the file as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Every problem found in a configuration, in line order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomConfig {
    pub wavelength: f64,
    /// γ⊥/2π [Hz].
    pub dipole_decay: f64,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self { wavelength: 780.0 * NM, dipole_decay: 3.03 * MHZ }
    }
}

impl AtomConfig {
    pub fn spec(&self) -> AtomSpec {
        AtomSpec { wavelength: self.wavelength, dipole_decay: 2.0 * std::f64::consts::PI * self.dipole_decay }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityConfig {
    pub design: CavityDesign,
    /// Measured linewidth (FWHM) [Hz].
    pub linewidth: Option<f64>,
    pub linewidth_relative_uncertainty: f64,
}

impl CavityConfig {
    pub fn report_input(&self) -> Option<ReportInput> {
        self.linewidth.map(|lw| ReportInput {
            design: self.design.clone(),
            linewidth: Measurement::new(lw, lw * self.linewidth_relative_uncertainty),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflowConfig {
    pub recipe: ReflowRecipe,
    pub anneal: AnnealSettings,
    pub target_roc: Option<f64>,
    pub free_variable: FreeVariable,
}

impl Default for ReflowConfig {
    fn default() -> Self {
        Self {
            recipe: ReflowRecipe::default(),
            anneal: AnnealSettings::default(),
            target_roc: None,
            free_variable: FreeVariable::FormingPressure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetrologyConfig {
    pub circle: CircleFitOptions,
    pub polynomial_degree: usize,
    pub periodogram: PeriodogramOptions,
    /// Wavelength for the roughness scattering loss.
    pub wavelength: f64,
}

impl Default for MetrologyConfig {
    fn default() -> Self {
        Self {
            circle: CircleFitOptions::default(),
            polynomial_degree: 6,
            periodogram: PeriodogramOptions::default(),
            wavelength: 780.0 * NM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentConfig {
    pub linewidth: f64,
    /// `None` means five linewidths.
    pub modulation_frequency: Option<f64>,
    /// Sweep calibration [Hz per unit of the sweep coordinate].
    pub slope: f64,
    pub sideband_depth: f64,
    pub noise: f64,
    pub background: f64,
    pub samples: usize,
    pub trials: usize,
    pub probe_waist: f64,
    pub probe_wavelength: f64,
    pub mirror_roc: f64,
    pub position_noise: f64,
    pub scan_step: f64,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self {
            linewidth: 1.5 * MHZ,
            modulation_frequency: None,
            slope: 1.0 * MHZ,
            sideband_depth: 0.3,
            noise: 0.01,
            background: 0.05,
            samples: 2001,
            trials: 100,
            probe_waist: 2.0 * UM,
            probe_wavelength: 780.0 * NM,
            mirror_roc: 2.0 * MM,
            position_noise: 20.0 * UM,
            scan_step: 1.0 * UM,
        }
    }
}

impl InstrumentConfig {
    pub fn modulation_frequency(&self) -> f64 {
        self.modulation_frequency.unwrap_or(5.0 * self.linewidth)
    }
}

/// A parsed configuration. Absent sections are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToolConfig {
    pub atom: Option<AtomConfig>,
    pub cavities: Vec<CavityConfig>,
    pub reflow: Option<ReflowConfig>,
    pub metrology: Option<MetrologyConfig>,
    pub instrument: Option<InstrumentConfig>,
}

struct Entry {
    line: usize,
    key: String,
    unit: Option<&'static Unit>,
    value: String,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<&'static str, Entry>,
}

fn split_unit(key: &str) -> Option<(&str, &'static Unit)> {
    UNITS.iter().find_map(|u| {
        let base = key.strip_suffix(u.suffix)?.strip_suffix('_')?;
        (!base.is_empty()).then_some((base, u))
    })
}

/// Strips a trailing comment and surrounding quotes. Inside quotes `\"`
/// and `\\` stand for a quote and a backslash.
fn clean_value(raw: &str) -> std::result::Result<String, String> {
    let raw = raw.trim();
    if let Some(rest) = raw.strip_prefix('"') {
        let mut value = String::new();
        let mut chars = rest.char_indices();
        let end = loop {
            match chars.next() {
                None => return Err("unterminated quoted value".into()),
                Some((i, '"')) => break i,
                Some((_, '\\')) => match chars.next() {
                    Some((_, c @ ('"' | '\\'))) => value.push(c),
                    _ => return Err("only \\\" and \\\\ may follow a backslash in a quoted value".into()),
                },
                Some((_, c)) => value.push(c),
            }
        };
        let tail = rest[end + 1..].trim();
        if !(tail.is_empty() || tail.starts_with('#')) {
            return Err(format!("unexpected text `{tail}` after quoted value"));
        }
        return Ok(value);
    }
    let value = raw.split('#').next().unwrap_or("").trim();
    Ok(value.to_string())
}

fn read_sections(text: &str, errors: &mut Vec<ConfigError>) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    // false while inside an unknown section, whose keys are not checked
    let mut known = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut err = |message: String| errors.push(ConfigError { line, message });
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.split('#').next().and_then(|s| s.trim_end().strip_suffix(']')) else {
                err(format!("malformed section header `{trimmed}`"));
                known = false;
                continue;
            };
            let name = name.trim();
            if schema(name).is_none() {
                err(format!("unknown section `[{name}]`"));
                known = false;
                continue;
            }
            if name != "cavity" && sections.iter().any(|s| s.name == name) {
                err(format!("section `[{name}]` appears more than once"));
                known = false;
                continue;
            }
            known = true;
            sections.push(Section { name: name.to_string(), line, entries: BTreeMap::new() });
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            err(format!("expected `key = value`, found `{trimmed}`"));
            continue;
        };
        let key = key.trim();
        let Some(section) = sections.last_mut() else {
            if known {
                err(format!("key `{key}` appears before any section"));
            }
            continue;
        };
        if !known {
            continue;
        }
        let value = match clean_value(value) {
            Ok(v) => v,
            Err(m) => {
                err(m);
                continue;
            }
        };
        let fields = schema(&section.name).expect("section names are checked");
        let lookup = |base: &str| fields.iter().find(|(b, _)| *b == base).copied();
        let (base, unit) = if let Some((base, kind)) = lookup(key) {
            if let Some(d) = kind.dim() {
                if !(kind == Kind::Radius && value.eq_ignore_ascii_case("flat")) {
                    err(format!("`{key}` needs a unit suffix for a {}, e.g. `{key}_{}`", d.name(), d.example()));
                    continue;
                }
            }
            (base, None)
        } else if let Some((stem, u)) = split_unit(key) {
            match lookup(stem) {
                Some((base, kind)) => match kind.dim() {
                    Some(d) if d == u.dim => (base, Some(u)),
                    Some(d) => {
                        err(format!(
                            "unit mismatch: `{key}` is a {} but `{stem}` is a {} (e.g. `{stem}_{}`)",
                            u.dim.name(),
                            d.name(),
                            d.example()
                        ));
                        continue;
                    }
                    None => {
                        err(format!("`{stem}` is dimensionless and takes no unit suffix"));
                        continue;
                    }
                },
                None => {
                    err(format!("unknown key `{key}` in section [{}]", section.name));
                    continue;
                }
            }
        } else {
            err(format!("unknown key `{key}` in section [{}]", section.name));
            continue;
        };
        if let Some(prev) = section.entries.get(base) {
            err(format!("`{key}` repeats `{}` from line {}", prev.key, prev.line));
            continue;
        }
        section.entries.insert(base, Entry { line, key: key.to_string(), unit, value });
    }
    sections
}

struct Fields<'a> {
    section: &'a Section,
    errors: &'a mut Vec<ConfigError>,
}

impl Fields<'_> {
    fn fail(&mut self, line: usize, message: String) {
        self.errors.push(ConfigError { line, message });
    }

    fn has(&self, base: &str) -> bool {
        self.section.entries.contains_key(base)
    }

    fn parse_number(&mut self, e: &Entry) -> Option<f64> {
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.errors.push(ConfigError { line: e.line, message: format!("`{}`: `{}` is not a finite number", e.key, e.value) });
                None
            }
        }
    }

    /// Value in SI units.
    fn quantity(&mut self, base: &str) -> Option<f64> {
        let e = self.section.entries.get(base)?;
        let v = self.parse_number(e)?;
        let u = e.unit?;
        Some(v * u.scale + u.offset)
    }

    fn number(&mut self, base: &str) -> Option<f64> {
        let e = self.section.entries.get(base)?;
        self.parse_number(e)
    }

    fn integer(&mut self, base: &str) -> Option<usize> {
        let e = self.section.entries.get(base)?;
        match e.value.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.fail(e.line, format!("`{}`: `{}` is not a non-negative integer", e.key, e.value));
                None
            }
        }
    }

    fn text(&self, base: &str) -> Option<&str> {
        self.section.entries.get(base).map(|e| e.value.as_str())
    }

    fn radius(&mut self, base: &str) -> Option<Curvature> {
        let e = self.section.entries.get(base)?;
        if e.unit.is_none() {
            return Some(Curvature::Flat);
        }
        let r = self.quantity(base)?;
        match Curvature::radius(r) {
            Ok(c) => Some(c),
            Err(err) => {
                self.fail(e.line, format!("`{}`: {err}", e.key));
                None
            }
        }
    }

    fn line_of(&self, base: &str) -> usize {
        self.section.entries.get(base).map_or(self.section.line, |e| e.line)
    }

    fn missing(&mut self, base: &str) {
        let (line, name) = (self.section.line, self.section.name.clone());
        self.fail(line, format!("section [{name}] is missing `{base}`"));
    }

    /// Checks a constructor result, attributing failures to `base`'s line.
    fn check<T>(&mut self, base: &str, r: crate::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                let line = self.line_of(base);
                self.fail(line, e.to_string());
                None
            }
        }
    }

    fn exclusive(&mut self, a: &str, b: &str) {
        if self.has(a) && self.has(b) {
            let line = self.line_of(b).max(self.line_of(a));
            self.fail(line, format!("`{a}` and `{b}` are mutually exclusive"));
        }
    }
}

fn build_atom(f: &mut Fields) -> Option<AtomConfig> {
    let mut atom = AtomConfig::default();
    if let Some(p) = f.text("preset").map(str::to_string) {
        if !matches!(p.as_str(), "rb87_d2" | "rubidium_d2") {
            let line = f.line_of("preset");
            f.fail(line, format!("unknown atom preset `{p}` (known: rb87_d2)"));
        }
    }
    if let Some(v) = f.quantity("wavelength") {
        atom.wavelength = v;
    }
    if let Some(v) = f.quantity("dipole_decay") {
        atom.dipole_decay = v;
    }
    f.check("wavelength", AtomSpec::new(atom.wavelength, atom.spec().dipole_decay))?;
    Some(atom)
}

fn build_cavity(f: &mut Fields, index: usize) -> Option<CavityConfig> {
    let before = f.errors.len();
    let name = f.text("name").map_or_else(|| format!("cavity {index}"), str::to_string);
    let length = f.quantity("length");
    let roc_1 = f.radius("roc_1").unwrap_or(Curvature::Flat);
    let roc_2 = f.radius("roc_2");
    let t1 = f.quantity("transmission_1").unwrap_or(0.0);
    let t2 = f.quantity("transmission_2").unwrap_or(0.0);
    let l1 = f.quantity("loss_1").unwrap_or(0.0);
    let l2 = f.quantity("loss_2").unwrap_or(0.0);
    let wavelength = f.quantity("wavelength").unwrap_or(780.0 * NM);
    let dl = f.quantity("length_uncertainty").unwrap_or(0.0);
    let dr = f.quantity("roc_uncertainty").unwrap_or(0.0);
    let linewidth = f.quantity("linewidth");
    let finesse = f.number("finesse_measured");
    let rel = f.quantity("linewidth_uncertainty").unwrap_or(0.0);
    f.exclusive("linewidth", "finesse_measured");
    if !f.has("length") {
        f.missing("length");
    }
    if !f.has("roc_2") {
        f.missing("roc_2");
    }
    if f.errors.len() > before {
        return None;
    }
    let (length, roc_2) = (length?, roc_2?);
    let m1 = f.check("transmission_1", MirrorSpec::new(roc_1, t1, l1))?;
    let m2 = f.check("transmission_2", MirrorSpec::new(roc_2, t2, l2))?;
    let design = f.check("length", CavityDesign::new(name, length, m1, m2, wavelength))?;
    let design = f.check("length_uncertainty", design.with_uncertainties(dl, dr))?;
    let linewidth = match (linewidth, finesse) {
        (Some(lw), _) => {
            f.check("linewidth", crate::error::require_positive("linewidth", lw))?;
            Some(lw)
        }
        (None, Some(fin)) => Some(f.check("finesse_measured", crate::qed::linewidth_from_finesse(length, fin))?),
        (None, None) => None,
    };
    f.check("linewidth_uncertainty", crate::error::require_non_negative("linewidth uncertainty", rel))?;
    Some(CavityConfig { design, linewidth, linewidth_relative_uncertainty: rel })
}

fn build_reflow(f: &mut Fields) -> Option<ReflowConfig> {
    let before = f.errors.len();
    let mut c = ReflowConfig::default();
    let r = &mut c.recipe;
    f.exclusive("hole_radius", "hole_diameter");
    if let Some(v) = f.quantity("hole_radius") {
        r.hole_radius = v;
    }
    if let Some(v) = f.quantity("hole_diameter") {
        r.hole_radius = 0.5 * v;
    }
    let set = |f: &mut Fields, base: &str, slot: &mut f64| {
        if let Some(v) = f.quantity(base) {
            *slot = v;
        }
    };
    set(f, "hole_depth", &mut r.hole_depth);
    set(f, "seal_pressure", &mut r.seal_pressure);
    set(f, "seal_temperature", &mut r.seal_temperature);
    set(f, "forming_pressure", &mut r.forming_pressure);
    set(f, "forming_temperature", &mut r.forming_temperature);
    set(f, "membrane_tension", &mut r.membrane_tension);
    set(f, "coverslip_thickness", &mut r.coverslip_thickness);
    if let Some(v) = f.number("tension_factor") {
        r.tension_factor = v;
    }
    let a = &mut c.anneal;
    set(f, "ambient_temperature", &mut a.ambient);
    set(f, "heat_rate", &mut a.heat_rate);
    set(f, "forming_hold", &mut a.forming_hold);
    set(f, "cool_rate_to_anneal", &mut a.cool_rate_to_anneal);
    set(f, "anneal_temperature", &mut a.anneal_point);
    set(f, "anneal_hold", &mut a.anneal_hold);
    set(f, "cool_rate_to_strain", &mut a.cool_rate_to_strain);
    set(f, "strain_temperature", &mut a.strain_point);
    set(f, "max_cool_rate", &mut a.max_cool_rate);
    c.target_roc = f.quantity("target_roc");
    if let Some(v) = f.text("free_variable").map(str::to_string) {
        match free_variable_from_name(&v) {
            Some(fv) => c.free_variable = fv,
            None => {
                let line = f.line_of("free_variable");
                f.fail(line, format!("unknown free variable `{v}` (expected hole_radius or forming_pressure)"));
            }
        }
    }
    if f.errors.len() > before {
        return None;
    }
    f.check("forming_pressure", c.recipe.validate())?;
    if let Some(t) = c.target_roc {
        f.check("target_roc", crate::error::require_positive("target radius", t))?;
    }
    for (base, v) in [
        ("heat_rate", c.anneal.heat_rate),
        ("cool_rate_to_anneal", c.anneal.cool_rate_to_anneal),
        ("cool_rate_to_strain", c.anneal.cool_rate_to_strain),
        ("max_cool_rate", c.anneal.max_cool_rate),
        ("ambient_temperature", c.anneal.ambient),
        ("anneal_temperature", c.anneal.anneal_point),
        ("strain_temperature", c.anneal.strain_point),
    ] {
        f.check(base, crate::error::require_positive(base, v))?;
    }
    for (base, v) in [("forming_hold", c.anneal.forming_hold), ("anneal_hold", c.anneal.anneal_hold)] {
        f.check(base, crate::error::require_non_negative(base, v))?;
    }
    Some(c)
}

fn free_variable_from_name(name: &str) -> Option<FreeVariable> {
    match name {
        "hole_radius" => Some(FreeVariable::HoleRadius),
        "forming_pressure" => Some(FreeVariable::FormingPressure),
        _ => None,
    }
}

fn free_variable_name(v: FreeVariable) -> &'static str {
    match v {
        FreeVariable::HoleRadius => "hole_radius",
        FreeVariable::FormingPressure => "forming_pressure",
    }
}

fn build_metrology(f: &mut Fields) -> Option<MetrologyConfig> {
    let before = f.errors.len();
    let mut c = MetrologyConfig::default();
    if let Some(v) = f.quantity("noise_floor") {
        c.circle.noise_floor = v;
    }
    if let Some(v) = f.number("min_sag_ratio") {
        c.circle.min_sag_ratio = v;
    }
    if let Some(v) = f.integer("max_iterations") {
        c.circle.max_iterations = v;
    }
    if let Some(v) = f.integer("polynomial_degree") {
        c.polynomial_degree = v;
    }
    if let Some(v) = f.quantity("artifact_threshold") {
        c.periodogram.artifact_threshold = v;
    }
    if let Some(v) = f.integer("oversampling") {
        c.periodogram.oversampling = v;
    }
    if let Some(v) = f.quantity("wavelength") {
        c.wavelength = v;
    }
    if f.errors.len() > before {
        return None;
    }
    use crate::error::{require_non_negative, require_positive};
    f.check("noise_floor", require_non_negative("noise floor", c.circle.noise_floor))?;
    f.check("min_sag_ratio", require_non_negative("minimum sag ratio", c.circle.min_sag_ratio))?;
    f.check("wavelength", require_positive("wavelength", c.wavelength))?;
    f.check("max_iterations", require_positive("max iterations", c.circle.max_iterations as f64))?;
    f.check("oversampling", require_positive("oversampling", c.periodogram.oversampling as f64))?;
    f.check("polynomial_degree", require_positive("polynomial degree", c.polynomial_degree as f64))?;
    let t = c.periodogram.artifact_threshold;
    if !(0.0..=1.0).contains(&t) {
        let line = f.line_of("artifact_threshold");
        f.fail(line, format!("artifact threshold must lie in [0, 1], got {t}"));
        return None;
    }
    Some(c)
}

fn build_instrument(f: &mut Fields) -> Option<InstrumentConfig> {
    let before = f.errors.len();
    let mut c = InstrumentConfig::default();
    let set = |f: &mut Fields, base: &str, slot: &mut f64| {
        if let Some(v) = f.quantity(base) {
            *slot = v;
        }
    };
    set(f, "linewidth", &mut c.linewidth);
    c.modulation_frequency = f.quantity("modulation_frequency");
    set(f, "slope", &mut c.slope);
    if let Some(v) = f.number("sideband_depth") {
        c.sideband_depth = v;
    }
    set(f, "noise", &mut c.noise);
    set(f, "background", &mut c.background);
    if let Some(v) = f.integer("samples") {
        c.samples = v;
    }
    if let Some(v) = f.integer("trials") {
        c.trials = v;
    }
    set(f, "probe_waist", &mut c.probe_waist);
    set(f, "probe_wavelength", &mut c.probe_wavelength);
    set(f, "mirror_roc", &mut c.mirror_roc);
    set(f, "position_noise", &mut c.position_noise);
    set(f, "scan_step", &mut c.scan_step);
    if f.errors.len() > before {
        return None;
    }
    use crate::error::{require_non_negative, require_positive};
    for (base, v) in [
        ("linewidth", c.linewidth),
        ("modulation_frequency", c.modulation_frequency()),
        ("slope", c.slope),
        ("probe_waist", c.probe_waist),
        ("probe_wavelength", c.probe_wavelength),
        ("mirror_roc", c.mirror_roc),
        ("scan_step", c.scan_step),
        ("trials", c.trials as f64),
    ] {
        f.check(base, require_positive(base, v))?;
    }
    for (base, v) in [
        ("sideband_depth", c.sideband_depth),
        ("noise", c.noise),
        ("background", c.background),
        ("position_noise", c.position_noise),
    ] {
        f.check(base, require_non_negative(base, v))?;
    }
    if c.samples < crate::instrument::MIN_SWEEP_SAMPLES {
        let line = f.line_of("samples");
        f.fail(line, format!("a sweep needs at least {} samples, got {}", crate::instrument::MIN_SWEEP_SAMPLES, c.samples));
        return None;
    }
    Some(c)
}

impl ToolConfig {
    /// Parses configuration text, reporting every problem found.
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let sections = read_sections(text, &mut errors);
        let mut config = ToolConfig::default();
        for section in &sections {
            let mut f = Fields { section, errors: &mut errors };
            match section.name.as_str() {
                "atom" => config.atom = build_atom(&mut f),
                "cavity" => {
                    let index = config.cavities.len() + 1;
                    if let Some(c) = build_cavity(&mut f, index) {
                        config.cavities.push(c);
                    }
                }
                "reflow" => config.reflow = build_reflow(&mut f),
                "metrology" => config.metrology = build_metrology(&mut f),
                "instrument" => config.instrument = build_instrument(&mut f),
                _ => unreachable!("unknown sections are dropped while reading"),
            }
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            errors.sort_by_key(|e| e.line);
            Err(ConfigErrors(errors))
        }
    }

    pub fn from_path(path: &Path) -> std::result::Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigErrors(vec![ConfigError { line: 0, message: format!("cannot read {}: {e}", path.display()) }])
        })?;
        Self::parse(&text)
    }

    /// Cavities that carry a measured linewidth, ready for the summary table.
    pub fn report_inputs(&self) -> Vec<ReportInput> {
        self.cavities.iter().filter_map(CavityConfig::report_input).collect()
    }

    /// Writes the configuration in SI units. Reparsing the output gives back
    /// an equal value.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let kv = |out: &mut String, key: &str, v: f64| {
            let _ = writeln!(out, "{key} = {v:?}");
        };
        if let Some(a) = &self.atom {
            out.push_str("[atom]\n");
            kv(&mut out, "wavelength_m", a.wavelength);
            kv(&mut out, "dipole_decay_hz", a.dipole_decay);
        }
        for c in &self.cavities {
            let d = &c.design;
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("[cavity]\n");
            let _ = writeln!(out, "name = \"{}\"", d.name.replace('\\', "\\\\").replace('"', "\\\""));
            kv(&mut out, "length_m", d.length);
            for (key, m) in [("1", &d.mirror_1), ("2", &d.mirror_2)] {
                match m.curvature {
                    Curvature::Flat => {
                        let _ = writeln!(out, "roc_{key} = flat");
                    }
                    Curvature::Radius(r) => kv(&mut out, &format!("roc_{key}_m"), r),
                }
                kv(&mut out, &format!("transmission_{key}_frac"), m.transmission);
                kv(&mut out, &format!("loss_{key}_frac"), m.excess_loss);
            }
            kv(&mut out, "wavelength_m", d.wavelength);
            kv(&mut out, "length_uncertainty_m", d.length_uncertainty);
            kv(&mut out, "roc_uncertainty_m", d.roc_uncertainty);
            if let Some(lw) = c.linewidth {
                kv(&mut out, "linewidth_hz", lw);
            }
            kv(&mut out, "linewidth_uncertainty_frac", c.linewidth_relative_uncertainty);
        }
        if let Some(c) = &self.reflow {
            if !out.is_empty() {
                out.push('\n');
            }
            let r = &c.recipe;
            let a = &c.anneal;
            out.push_str("[reflow]\n");
            kv(&mut out, "hole_radius_m", r.hole_radius);
            kv(&mut out, "hole_depth_m", r.hole_depth);
            kv(&mut out, "seal_pressure_pa", r.seal_pressure);
            kv(&mut out, "seal_temperature_k", r.seal_temperature);
            kv(&mut out, "forming_pressure_pa", r.forming_pressure);
            kv(&mut out, "forming_temperature_k", r.forming_temperature);
            kv(&mut out, "membrane_tension_n_per_m", r.membrane_tension);
            kv(&mut out, "tension_factor", r.tension_factor);
            kv(&mut out, "coverslip_thickness_m", r.coverslip_thickness);
            if let Some(t) = c.target_roc {
                kv(&mut out, "target_roc_m", t);
            }
            let _ = writeln!(out, "free_variable = {}", free_variable_name(c.free_variable));
            kv(&mut out, "ambient_temperature_k", a.ambient);
            kv(&mut out, "heat_rate_k_per_s", a.heat_rate);
            kv(&mut out, "forming_hold_s", a.forming_hold);
            kv(&mut out, "cool_rate_to_anneal_k_per_s", a.cool_rate_to_anneal);
            kv(&mut out, "anneal_temperature_k", a.anneal_point);
            kv(&mut out, "anneal_hold_s", a.anneal_hold);
            kv(&mut out, "cool_rate_to_strain_k_per_s", a.cool_rate_to_strain);
            kv(&mut out, "strain_temperature_k", a.strain_point);
            kv(&mut out, "max_cool_rate_k_per_s", a.max_cool_rate);
        }
        if let Some(m) = &self.metrology {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("[metrology]\n");
            kv(&mut out, "noise_floor_m", m.circle.noise_floor);
            kv(&mut out, "min_sag_ratio", m.circle.min_sag_ratio);
            let _ = writeln!(out, "max_iterations = {}", m.circle.max_iterations);
            let _ = writeln!(out, "polynomial_degree = {}", m.polynomial_degree);
            kv(&mut out, "artifact_threshold_frac", m.periodogram.artifact_threshold);
            let _ = writeln!(out, "oversampling = {}", m.periodogram.oversampling);
            kv(&mut out, "wavelength_m", m.wavelength);
        }
        if let Some(i) = &self.instrument {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("[instrument]\n");
            kv(&mut out, "linewidth_hz", i.linewidth);
            if let Some(f) = i.modulation_frequency {
                kv(&mut out, "modulation_frequency_hz", f);
            }
            kv(&mut out, "slope_hz", i.slope);
            kv(&mut out, "sideband_depth", i.sideband_depth);
            kv(&mut out, "noise_frac", i.noise);
            kv(&mut out, "background_frac", i.background);
            let _ = writeln!(out, "samples = {}", i.samples);
            let _ = writeln!(out, "trials = {}", i.trials);
            kv(&mut out, "probe_waist_m", i.probe_waist);
            kv(&mut out, "probe_wavelength_m", i.probe_wavelength);
            kv(&mut out, "mirror_roc_m", i.mirror_roc);
            kv(&mut out, "position_noise_m", i.position_noise);
            kv(&mut out, "scan_step_m", i.scan_step);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::PPM;

    const TABLE: &str = "\
# half-symmetric test cavity
[atom]
preset = rb87_d2

[cavity]
name = \"2 mm\"
length_mm = 0.32
roc_1 = flat
roc_2_mm = 2
transmission_1_ppm = 100
transmission_2_ppm = 350
finesse_measured = 14200
linewidth_uncertainty_pct = 1
length_uncertainty_um = 25
roc_uncertainty_um = 20
";

    #[test]
    fn parses_cavity() {
        let c = ToolConfig::parse(TABLE).unwrap();
        assert_eq!(c.atom, Some(AtomConfig::default()));
        assert_eq!(c.cavities.len(), 1);
        let d = &c.cavities[0].design;
        assert_eq!(d.name, "2 mm");
        assert!((d.length - 0.32 * MM).abs() < 1e-18);
        assert_eq!(d.mirror_1.curvature, Curvature::Flat);
        assert!((d.mirror_2.transmission - 350.0 * PPM).abs() < 1e-18);
        let lw = c.cavities[0].linewidth.unwrap();
        assert!((lw - crate::qed::linewidth_from_finesse(0.32 * MM, 14200.0).unwrap()).abs() < 1e-6);
        assert!((c.cavities[0].linewidth_relative_uncertainty - 0.01).abs() < 1e-15);
    }

    #[test]
    fn empty_is_valid() {
        assert_eq!(ToolConfig::parse("").unwrap(), ToolConfig::default());
        assert_eq!(ToolConfig::parse("# nothing\n\n").unwrap(), ToolConfig::default());
    }

    #[test]
    fn unit_mismatch_names_line() {
        let err = ToolConfig::parse("[cavity]\nroc_2_mm = 1\nlength_kg = 3\n").unwrap_err();
        assert_eq!(err.0.len(), 2, "{err}");
        assert_eq!(err.0[0].line, 1);
        assert!(err.0[0].message.contains("missing `length`"));
        assert_eq!(err.0[1].line, 3);
        assert!(err.0[1].message.contains("unit mismatch"), "{err}");
    }

    #[test]
    fn collects_every_error() {
        let text = "[reflow]\nhole_depth = 2\nwidth_mm = 3\nseal_pressure_mbar = x\n[bogus]\nk = 1\n[metrology]\npolynomial_degree_mm = 4\n";
        let err = ToolConfig::parse(text).unwrap_err();
        let lines: Vec<usize> = err.0.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 5, 8], "{err}");
    }

    #[test]
    fn temperatures_and_rates_convert() {
        let c = ToolConfig::parse("[reflow]\nseal_temperature_c = 800\nheat_rate_c_per_min = 6\nforming_hold_min = 2\n").unwrap();
        let r = c.reflow.unwrap();
        assert!((r.recipe.seal_temperature - 1073.15).abs() < 1e-12);
        assert!((r.anneal.heat_rate - 0.1).abs() < 1e-15);
        assert_eq!(r.anneal.forming_hold, 120.0);
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{TABLE}\n[reflow]\nhole_diameter_mm = 1\ntarget_roc_mm = 0.6\n[metrology]\nnoise_floor_nm = 0.2\n[instrument]\nmodulation_frequency_mhz = 9\n"
        );
        let c = ToolConfig::parse(&text).unwrap();
        let s = c.to_config_string();
        assert_eq!(ToolConfig::parse(&s).unwrap(), c, "{s}");
    }

    #[test]
    fn value_checks() {
        assert!(ToolConfig::parse("[cavity]\nlength_mm = 1\nroc_2_mm = 2\ntransmission_2_pct = 120\n").is_err());
        assert!(ToolConfig::parse("[cavity]\nlength_mm = 1\nroc_2_mm = 2\nlinewidth_mhz = 1\nfinesse_measured = 3\n").is_err());
        assert!(ToolConfig::parse("[reflow]\nforming_pressure_mbar = 100\n").is_err());
        assert!(ToolConfig::parse("[cavity]\nlength = 1\nroc_2_mm = 2\n").is_err());
        assert!(ToolConfig::parse("[atom]\n[atom]\n").is_err());
    }

    #[test]
    fn names_with_quotes_round_trip() {
        let c = ToolConfig::parse("[cavity]\nname = a\"b\\c\nlength_mm = 1\nroc_2_mm = 2\n").unwrap();
        assert_eq!(c.cavities[0].design.name, "a\"b\\c");
        assert_eq!(ToolConfig::parse(&c.to_config_string()).unwrap(), c);
        assert!(ToolConfig::parse("[cavity]\nname = \"x\\q\"\n").is_err());
    }
}
