use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use microcavity::config::{InstrumentConfig, ToolConfig};
use microcavity::instrument::{
    fit_sweep, measure_roc, retro_scan, simulate_sweep, RetroScan, RetroScanSettings, SweepSimulation, SweepTrace,
};
use microcavity::metrology::{
    fit_circle, fit_polynomial, residual_periodogram, roughness_to_loss, write_residuals_csv, FitModel, SurfaceProfile,
};
use microcavity::optics::{BeamParams, Curvature};
use microcavity::qed::{
    coupling_rates, free_spectral_range, propagate_uncertainty, table_report, CavityDesign, Measurement, ScatterForm,
};
use microcavity::reflow::{
    anneal_schedule, equilibrium_deformation, inverse_design, validate_schedule, FreeVariable, ScheduleLimits,
};
use microcavity::report::{emit_report, format_significant};
use microcavity::units::{kelvin_to_celsius, MBAR, MHZ, MM, NM, PPM, UM};

use crate::{Failure, Format};

pub type Outcome = Result<(Vec<u8>, Option<Failure>), Failure>;

fn records<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize to memory");
        out.push(b'\n');
    }
    out
}

fn roc_mm(c: Curvature) -> String {
    match c {
        Curvature::Flat => "flat".into(),
        Curvature::Radius(r) => format!("{:.3} mm", r / MM),
    }
}

#[derive(Serialize)]
struct DesignRecord {
    name: String,
    g1: f64,
    g2: f64,
    stable: bool,
    waist_um: f64,
    waist_from_mirror_1_mm: f64,
    free_spectral_range_ghz: f64,
    finesse_expected: Option<f64>,
    finesse_obtained: Option<f64>,
    finesse_uncertainty: Option<f64>,
    cooperativity: Option<f64>,
    cooperativity_uncertainty: Option<f64>,
    g_over_2pi_mhz: Option<f64>,
    kappa_over_2pi_mhz: Option<f64>,
    gamma_over_2pi_mhz: Option<f64>,
    strong_coupling: Option<bool>,
}

fn design_record(d: &CavityDesign, linewidth: Option<Measurement>, config: &ToolConfig) -> microcavity::Result<DesignRecord> {
    let s = d.stability();
    if !s.stable {
        return Err(microcavity::Error::UnstableCavity { g1: s.g1, g2: s.g2, product: s.product });
    }
    let waist = d.geometry().mode_waist(d.wavelength)?;
    let atom = config.atom.unwrap_or_default().spec();
    let mut rec = DesignRecord {
        name: d.name.clone(),
        g1: s.g1,
        g2: s.g2,
        stable: s.stable,
        waist_um: waist.radius / UM,
        waist_from_mirror_1_mm: waist.distance_from_mirror_1 / MM,
        free_spectral_range_ghz: free_spectral_range(d.length)? / 1e9,
        finesse_expected: d.expected_finesse().ok(),
        finesse_obtained: None,
        finesse_uncertainty: None,
        cooperativity: None,
        cooperativity_uncertainty: None,
        g_over_2pi_mhz: None,
        kappa_over_2pi_mhz: None,
        gamma_over_2pi_mhz: None,
        strong_coupling: None,
    };
    if let Some(lw) = linewidth {
        let u = propagate_uncertainty(d, lw)?;
        rec.finesse_obtained = Some(u.finesse.value);
        rec.finesse_uncertainty = Some(u.finesse.uncertainty);
        rec.cooperativity = Some(u.cooperativity.value);
        rec.cooperativity_uncertainty = Some(u.cooperativity.uncertainty);
        let c = coupling_rates(d, &atom, u.finesse.value)?;
        let mhz = |w: f64| w / (2.0 * PI * MHZ);
        rec.g_over_2pi_mhz = Some(mhz(c.g));
        rec.kappa_over_2pi_mhz = Some(mhz(c.kappa));
        rec.gamma_over_2pi_mhz = Some(mhz(c.gamma));
        rec.strong_coupling = Some(c.strong_coupling);
    }
    Ok(rec)
}

fn design_text(r: &DesignRecord, d: &CavityDesign) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "cavity \"{}\"", r.name);
    let _ = writeln!(s, "  length              {:.3} mm", d.length / MM);
    let _ = writeln!(s, "  mirrors             {} / {}", roc_mm(d.mirror_1.curvature), roc_mm(d.mirror_2.curvature));
    let _ = writeln!(s, "  g1, g2              {:.6}, {:.6} (stable)", r.g1, r.g2);
    let _ = writeln!(s, "  mode waist          {:.3} um, {:.3} mm from mirror 1", r.waist_um, r.waist_from_mirror_1_mm);
    let _ = writeln!(s, "  free spectral range {:.3} GHz", r.free_spectral_range_ghz);
    match r.finesse_expected {
        Some(f) => {
            let _ = writeln!(s, "  finesse expected    {f:.0}");
        }
        None => {
            let _ = writeln!(s, "  finesse expected    unbounded (lossless mirrors)");
        }
    }
    if let (Some(f), Some(df), Some(eta), Some(deta)) =
        (r.finesse_obtained, r.finesse_uncertainty, r.cooperativity, r.cooperativity_uncertainty)
    {
        let _ = writeln!(s, "  finesse obtained    {f:.0} +/- {df:.0}");
        let _ = writeln!(s, "  cooperativity       {} +/- {}", format_significant(eta, 4), format_significant(deta, 2));
    }
    if let (Some(g), Some(k), Some(gm), Some(strong)) =
        (r.g_over_2pi_mhz, r.kappa_over_2pi_mhz, r.gamma_over_2pi_mhz, r.strong_coupling)
    {
        let regime = if strong { "strong coupling" } else { "not strong coupling" };
        let _ = writeln!(s, "  g, kappa, gamma/2pi {g:.3}, {k:.3}, {gm:.3} MHz ({regime})");
    }
    s
}

pub fn design(config: &ToolConfig, format: Format) -> Outcome {
    if config.cavities.is_empty() {
        return Err(Failure::input("no [cavity] sections in the configuration"));
    }
    let mut text = String::new();
    let mut recs = Vec::new();
    let mut problems = Vec::new();
    for c in &config.cavities {
        let d = &c.design;
        let lw = c.report_input().map(|r| r.linewidth);
        match design_record(d, lw, config) {
            Ok(r) => {
                if !text.is_empty() {
                    text.push('\n');
                }
                text.push_str(&design_text(&r, d));
                recs.push(r);
            }
            Err(e) => problems.push(format!("cavity \"{}\": {e}", d.name)),
        }
    }
    let bytes = match format {
        Format::Text => text.into_bytes(),
        Format::Records => records(&recs),
    };
    let failure = (!problems.is_empty()).then(|| Failure::compute(problems.join("\n")));
    Ok((bytes, failure))
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReflowRecord {
    Deformation {
        hole_radius_mm: f64,
        hole_depth_mm: f64,
        forming_pressure_mbar: f64,
        sag_mm: f64,
        roc_mm: Option<f64>,
        internal_pressure_mbar: f64,
    },
    InverseDesign {
        target_roc_mm: f64,
        variable: &'static str,
        value: f64,
        unit: &'static str,
    },
    Segment {
        segment: &'static str,
        start_c: f64,
        end_c: f64,
        rate_c_per_min: f64,
        duration_min: f64,
        pressure_mbar: f64,
    },
}

pub fn reflow(config: &ToolConfig, format: Format) -> Outcome {
    let rc = config.reflow.unwrap_or_default();
    let recipe = rc.recipe;
    let def = equilibrium_deformation(&recipe).map_err(Failure::compute)?;
    let mut recs = vec![ReflowRecord::Deformation {
        hole_radius_mm: recipe.hole_radius / MM,
        hole_depth_mm: recipe.hole_depth / MM,
        forming_pressure_mbar: recipe.forming_pressure / MBAR,
        sag_mm: def.sag / MM,
        roc_mm: def.roc.as_radius().map(|r| r / MM),
        internal_pressure_mbar: def.internal_pressure / MBAR,
    }];
    let mut text = String::new();
    let _ = writeln!(text, "deformation");
    let _ = writeln!(text, "  hole radius         {:.3} mm", recipe.hole_radius / MM);
    let _ = writeln!(text, "  hole depth          {:.3} mm", recipe.hole_depth / MM);
    let _ = writeln!(text, "  seal pressure       {:.1} mbar", recipe.seal_pressure / MBAR);
    let _ = writeln!(text, "  forming pressure    {:.1} mbar", recipe.forming_pressure / MBAR);
    let _ = writeln!(text, "  sag                 {:.4} mm", def.sag / MM);
    let _ = writeln!(text, "  radius of curvature {}", roc_mm(def.roc));
    let _ = writeln!(text, "  internal pressure   {:.1} mbar", def.internal_pressure / MBAR);

    if let Some(target) = rc.target_roc {
        let value = inverse_design(&recipe, target, rc.free_variable, None).map_err(Failure::compute)?;
        let (variable, shown, unit) = match rc.free_variable {
            FreeVariable::HoleRadius => ("hole_radius", value / MM, "mm"),
            FreeVariable::FormingPressure => ("forming_pressure", value / MBAR, "mbar"),
        };
        let _ = writeln!(text, "inverse design");
        let _ = writeln!(text, "  target radius       {:.4} mm", target / MM);
        let _ = writeln!(text, "  {variable:<19} {shown:.4} {unit}");
        recs.push(ReflowRecord::InverseDesign { target_roc_mm: target / MM, variable, value: shown, unit });
    }

    let schedule = anneal_schedule(&recipe, &rc.anneal).map_err(Failure::input)?;
    let _ = writeln!(text, "furnace schedule");
    let _ = writeln!(
        text,
        "  {:<16} {:>9} {:>9} {:>12} {:>13} {:>14}",
        "segment", "start (C)", "end (C)", "rate (C/min)", "time (min)", "pressure (mbar)"
    );
    for seg in &schedule.segments {
        let start = kelvin_to_celsius(seg.start_temperature);
        let end = kelvin_to_celsius(seg.end_temperature);
        let _ = writeln!(
            text,
            "  {:<16} {:>9.1} {:>9.1} {:>12.2} {:>13.1} {:>14.1}",
            seg.kind.label(),
            start,
            end,
            seg.rate_per_minute(),
            seg.duration_minutes(),
            seg.pressure / MBAR
        );
        recs.push(ReflowRecord::Segment {
            segment: seg.kind.label(),
            start_c: start,
            end_c: end,
            rate_c_per_min: seg.rate_per_minute(),
            duration_min: seg.duration_minutes(),
            pressure_mbar: seg.pressure / MBAR,
        });
    }
    let _ = writeln!(text, "  total               {:.1} min", schedule.total_duration() / 60.0);
    let limits = ScheduleLimits {
        strain_point: rc.anneal.strain_point,
        anneal_point: rc.anneal.anneal_point,
        ..ScheduleLimits::default()
    };
    let failure = validate_schedule(&schedule, &limits).err().map(Failure::input);
    let bytes = match format {
        Format::Text => text.into_bytes(),
        Format::Records => records(&recs),
    };
    Ok((bytes, failure))
}

#[derive(Serialize)]
struct MetrologyRecord {
    file: String,
    samples: usize,
    window_um: f64,
    circle_roc_mm: Option<f64>,
    circle_fallback: bool,
    circle_rms_nm: f64,
    polynomial_degree: usize,
    polynomial_rms_nm: f64,
    dominant_period_um: Option<f64>,
    variance_fraction: f64,
    artifact: bool,
    scatter_loss_ppm: f64,
}

fn read_profile(path: &Path) -> Result<SurfaceProfile, Failure> {
    let file = File::open(path).map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))?;
    SurfaceProfile::read_csv(BufReader::new(file)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn analyze_profile(
    path: &Path,
    config: &ToolConfig,
    residuals_dir: Option<&Path>,
) -> Result<MetrologyRecord, Failure> {
    let m = config.metrology.unwrap_or_default();
    let profile = read_profile(path)?;
    let name = path.display().to_string();
    let at = |e: microcavity::Error| Failure::compute(format!("{name}: {e}"));
    let circle = fit_circle(&profile, &m.circle).map_err(at)?;
    let poly = fit_polynomial(&profile, m.polynomial_degree).map_err(at)?;
    let spectrum = residual_periodogram(&circle.residuals, profile.positions(), &m.periodogram).map_err(at)?;
    let loss = roughness_to_loss(&poly, m.wavelength, ScatterForm::Exact).map_err(at)?;
    if let Some(dir) = residuals_dir {
        let stem = path.file_stem().map_or_else(|| "profile".into(), |s| s.to_string_lossy().into_owned());
        let out: PathBuf = dir.join(format!("{stem}_residuals.csv"));
        let file = File::create(&out).map_err(|e| Failure::input(format!("cannot write {}: {e}", out.display())))?;
        write_residuals_csv(file, &profile, &poly).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    }
    Ok(MetrologyRecord {
        file: name,
        samples: profile.len(),
        window_um: profile.window() / UM,
        circle_roc_mm: circle.roc().and_then(|c| c.as_radius()).map(|r| r / MM),
        circle_fallback: matches!(circle.model, FitModel::Parabola { .. }),
        circle_rms_nm: circle.rms / NM,
        polynomial_degree: m.polynomial_degree,
        polynomial_rms_nm: poly.rms / NM,
        dominant_period_um: spectrum.dominant_period.map(|p| p / UM),
        variance_fraction: spectrum.variance_fraction,
        artifact: spectrum.artifact,
        scatter_loss_ppm: loss / PPM,
    })
}

fn metrology_text(r: &MetrologyRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "profile {}", r.file);
    let _ = writeln!(s, "  samples             {} over {:.1} um", r.samples, r.window_um);
    let fit = if r.circle_fallback { "parabola fallback" } else { "circle" };
    match r.circle_roc_mm {
        Some(roc) => {
            let _ = writeln!(s, "  {fit:<19} R = {roc:.4} mm, rms {:.3} nm", r.circle_rms_nm);
        }
        None => {
            let _ = writeln!(s, "  {fit:<19} flat, rms {:.3} nm", r.circle_rms_nm);
        }
    }
    let _ = writeln!(s, "  polynomial (n = {})  rms {:.3} nm", r.polynomial_degree, r.polynomial_rms_nm);
    match r.dominant_period_um {
        Some(p) => {
            let flag = if r.artifact { " (artifact)" } else { "" };
            let _ = writeln!(s, "  residual period     {p:.1} um, {:.2} of variance{flag}", r.variance_fraction);
        }
        None => {
            let _ = writeln!(s, "  residual period     none");
        }
    }
    let _ = writeln!(s, "  scatter loss        {:.2} ppm", r.scatter_loss_ppm);
    s
}

pub fn metrology(config: &ToolConfig, profiles: &[PathBuf], residuals_dir: Option<&Path>, format: Format) -> Outcome {
    let mut recs = Vec::new();
    let mut problems: Vec<Failure> = Vec::new();
    for path in profiles {
        match analyze_profile(path, config, residuals_dir) {
            Ok(r) => recs.push(r),
            Err(f) => problems.push(f),
        }
    }
    let bytes = match format {
        Format::Text => recs.iter().map(metrology_text).collect::<Vec<_>>().join("\n").into_bytes(),
        Format::Records => records(&recs),
    };
    let failure = if problems.is_empty() {
        None
    } else {
        let code = problems.iter().map(|f| f.code).max().unwrap_or(3);
        let message = problems.into_iter().map(|f| f.message).collect::<Vec<_>>().join("\n");
        Some(Failure { code, message })
    };
    Ok((bytes, failure))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Sweep,
    Retro,
    Both,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(value_enum, default_value_t = Experiment::Both)]
    experiment: Experiment,
    /// Number of seeds (overrides the configuration).
    #[arg(long)]
    trials: Option<usize>,
    /// Write the first simulated sweep as `u,s` CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write the first simulated retro-reflection scan as `z_um,coupling` CSV.
    #[arg(long)]
    scan_out: Option<PathBuf>,
    /// Fit a recorded sweep instead of simulating.
    #[arg(long)]
    fit_trace: Option<PathBuf>,
    /// Measure the radius from a recorded scan instead of simulating.
    #[arg(long)]
    fit_scan: Option<PathBuf>,
}

#[derive(Serialize, Default)]
struct SimulateRecord {
    experiment: &'static str,
    source: String,
    trials: usize,
    failures: usize,
    true_value: Option<f64>,
    unit: &'static str,
    mean: f64,
    rms_error: Option<f64>,
    median_abs_relative_error: Option<f64>,
    p95_abs_relative_error: Option<f64>,
    mean_reported_uncertainty: f64,
}

fn percentile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

fn summarize(
    experiment: &'static str,
    source: String,
    unit: &'static str,
    truth: Option<f64>,
    values: &[(f64, f64)],
    failures: usize,
) -> SimulateRecord {
    let n = values.len().max(1) as f64;
    let mean = values.iter().map(|v| v.0).sum::<f64>() / n;
    let unc = values.iter().map(|v| v.1).filter(|u| u.is_finite()).sum::<f64>() / n;
    let mut rec = SimulateRecord {
        experiment,
        source,
        trials: values.len() + failures,
        failures,
        true_value: truth,
        unit,
        mean,
        mean_reported_uncertainty: unc,
        ..Default::default()
    };
    if let Some(t) = truth.filter(|_| !values.is_empty()) {
        let rel: Vec<f64> = values.iter().map(|v| ((v.0 - t) / t).abs()).collect();
        rec.rms_error = Some((values.iter().map(|v| (v.0 - t).powi(2)).sum::<f64>() / n).sqrt());
        rec.median_abs_relative_error = Some(percentile(rel.clone(), 0.5));
        rec.p95_abs_relative_error = Some(percentile(rel, 0.95));
    }
    rec
}

fn sweep_sim(ic: &InstrumentConfig, seed: u64) -> SweepSimulation {
    SweepSimulation {
        background: ic.background,
        samples: ic.samples,
        ..SweepSimulation::new(ic.linewidth, ic.modulation_frequency(), ic.slope, ic.sideband_depth, ic.noise, seed)
    }
}

fn write_csv_file(path: &Path, write: impl FnOnce(File) -> microcavity::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    write(file).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn run_sweep(ic: &InstrumentConfig, args: &SimulateArgs, trials: usize, seed: u64) -> Result<SimulateRecord, Failure> {
    let fmod = ic.modulation_frequency();
    if let Some(path) = &args.fit_trace {
        let file = File::open(path).map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))?;
        let trace = SweepTrace::read_csv(BufReader::new(file)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let fit = fit_sweep(&trace, fmod).map_err(Failure::compute)?;
        return Ok(summarize("sweep", path.display().to_string(), "MHz", None, &[(fit.linewidth / MHZ, fit.linewidth_uncertainty / MHZ)], 0));
    }
    let mut values = Vec::new();
    let mut failures = 0;
    for k in 0..trials as u64 {
        let trace = simulate_sweep(&sweep_sim(ic, seed.wrapping_add(k))).map_err(Failure::input)?;
        if k == 0 {
            if let Some(path) = &args.trace_out {
                write_csv_file(path, |f| trace.write_csv(f))?;
            }
        }
        match fit_sweep(&trace, fmod) {
            Ok(fit) => values.push((fit.linewidth / MHZ, fit.linewidth_uncertainty / MHZ)),
            Err(e) if trials == 1 => return Err(Failure::compute(e)),
            Err(_) => failures += 1,
        }
    }
    Ok(summarize("sweep", "simulated".into(), "MHz", Some(ic.linewidth / MHZ), &values, failures))
}

fn probe_beam(ic: &InstrumentConfig) -> Result<BeamParams, Failure> {
    BeamParams::new(ic.probe_wavelength, ic.probe_waist, 0.0).map_err(Failure::input)
}

fn run_retro(ic: &InstrumentConfig, args: &SimulateArgs, trials: usize, seed: u64) -> Result<SimulateRecord, Failure> {
    let beam = probe_beam(ic)?;
    if let Some(path) = &args.fit_scan {
        let file = File::open(path).map_err(|e| Failure::input(format!("cannot open {}: {e}", path.display())))?;
        let scan = RetroScan::read_csv(BufReader::new(file), beam).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let m = measure_roc(&scan).map_err(Failure::compute)?;
        return Ok(summarize("retro", path.display().to_string(), "mm", None, &[(m.roc / MM, m.uncertainty / MM)], 0));
    }
    let cover = RetroScanSettings::covering(&beam, ic.mirror_roc);
    let samples = ((cover.end - cover.start) / ic.scan_step).round() as usize + 1;
    let mut values = Vec::new();
    let mut failures = 0;
    for k in 0..trials as u64 {
        let settings = RetroScanSettings { samples, position_noise: ic.position_noise, seed: seed.wrapping_add(k), ..cover };
        let scan = retro_scan(Curvature::Radius(ic.mirror_roc), &beam, &settings).map_err(Failure::input)?;
        if k == 0 {
            if let Some(path) = &args.scan_out {
                write_csv_file(path, |f| scan.write_csv(f))?;
            }
        }
        match measure_roc(&scan) {
            Ok(m) => values.push((m.roc / MM, m.uncertainty / MM)),
            Err(e) if trials == 1 => return Err(Failure::compute(e)),
            Err(_) => failures += 1,
        }
    }
    Ok(summarize("retro", "simulated".into(), "mm", Some(ic.mirror_roc / MM), &values, failures))
}

fn simulate_text(r: &SimulateRecord) -> String {
    let mut s = String::new();
    let what = if r.experiment == "sweep" { "linewidth" } else { "radius of curvature" };
    let _ = writeln!(s, "{} ({})", what, r.source);
    let _ = writeln!(s, "  trials              {} ({} failed)", r.trials, r.failures);
    if let Some(t) = r.true_value {
        let _ = writeln!(s, "  true value          {t:.6} {}", r.unit);
    }
    let _ = writeln!(s, "  mean estimate       {:.6} {}", r.mean, r.unit);
    let _ = writeln!(s, "  mean uncertainty    {:.6} {}", r.mean_reported_uncertainty, r.unit);
    if let Some(e) = r.rms_error {
        let _ = writeln!(s, "  rms error           {e:.6} {}", r.unit);
    }
    if let (Some(m), Some(p)) = (r.median_abs_relative_error, r.p95_abs_relative_error) {
        let _ = writeln!(s, "  |relative error|    median {:.3e}, 95th percentile {:.3e}", m, p);
    }
    s
}

pub fn simulate(config: &ToolConfig, args: &SimulateArgs, seed: u64, format: Format) -> Outcome {
    let ic = config.instrument.unwrap_or_default();
    let trials = args.trials.unwrap_or(ic.trials);
    if trials == 0 {
        return Err(Failure::input("trials must be at least 1"));
    }
    let mut recs = Vec::new();
    if matches!(args.experiment, Experiment::Sweep | Experiment::Both) {
        recs.push(run_sweep(&ic, args, trials, seed)?);
    }
    if matches!(args.experiment, Experiment::Retro | Experiment::Both) {
        recs.push(run_retro(&ic, args, trials, seed)?);
    }
    let bytes = match format {
        Format::Text => recs.iter().map(simulate_text).collect::<Vec<_>>().join("\n").into_bytes(),
        Format::Records => records(&recs),
    };
    Ok((bytes, None))
}

pub fn report(config: &ToolConfig, format: Format) -> Outcome {
    let inputs = config.report_inputs();
    let atom = config.atom.unwrap_or_default().spec();
    let rows = table_report(&inputs, Some(&atom));
    let failed: Vec<String> = rows
        .iter()
        .filter_map(|r| r.result.as_ref().err().map(|e| format!("cavity \"{}\": {e}", r.name)))
        .collect();
    let failure = (!failed.is_empty()).then(|| Failure::compute(failed.join("\n")));
    Ok((emit_report(&rows, format.into()), failure))
}
