//! Writers for the cavity summary table.
//!
//! Output is a pure function of the rows: fixed column order, fixed float
//! formatting (three decimals for millimetres, integers for finesse and ppm,
//! four significant digits for cooperativity).

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::optics::Curvature;
use crate::qed::ReportRow;
use crate::units::{MHZ, MM, PPM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Aligned plain-text table.
    Text,
    /// One JSON object per line.
    Records,
}

/// `x` rounded to `digits` significant digits, in positional notation.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let mut decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // rounding may carry into a new leading digit (9.9996 -> 10.000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && (rounded.abs().log10().floor() as i64) > magnitude && decimals > 0 {
        decimals -= 1;
        return format!("{:.*}", decimals, x);
    }
    s
}

fn roc_text(c: Curvature) -> String {
    match c {
        Curvature::Flat => "flat".into(),
        Curvature::Radius(r) => format!("{:.3}", r / MM),
    }
}

const HEADER: [&str; 9] = [
    "ROC (mm)",
    "L (mm)",
    "T (ppm)",
    "F expected",
    "F obtained",
    "dF",
    "eta",
    "d_eta",
    "regime",
];

fn text_cells(row: &ReportRow) -> Vec<String> {
    let mut cells = vec![
        roc_text(row.roc),
        format!("{:.3}", row.length / MM),
        format!("{:.0}", row.transmission / PPM),
    ];
    match &row.result {
        Ok(m) => {
            cells.push(format!("{:.0}", m.finesse_expected));
            cells.push(format!("{:.0}", m.finesse_obtained.value));
            cells.push(format!("{:.0}", m.finesse_obtained.uncertainty));
            cells.push(format_significant(m.cooperativity.value, 4));
            cells.push(format_significant(m.cooperativity.uncertainty, 2));
            let regime = match &m.coupling {
                Some(c) if c.strong_coupling => "strong",
                Some(_) => "weak",
                None => "-",
            };
            cells.push(if m.near_boundary { format!("{regime}*") } else { regime.to_string() });
        }
        Err(e) => cells.push(format!("error: {e}")),
    }
    cells
}

fn emit_text(rows: &[ReportRow]) -> String {
    let header: Vec<String> = HEADER.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows.iter().map(text_cells).collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for cells in &body {
        // error text spans the remaining columns and is not aligned
        if cells.len() == HEADER.len() {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let aligned = cells.len() == HEADER.len() || i < 3;
            if aligned && i < widths.len() {
                let _ = write!(s, "{c:>w$}", w = widths[i]);
            } else {
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    out.push_str(&line(&header));
    out.push('\n');
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for cells in &body {
        out.push_str(&line(cells));
        out.push('\n');
    }
    if rows.iter().any(|r| matches!(&r.result, Ok(m) if m.near_boundary)) {
        out.push_str("* geometry within 1e-6 of the stability boundary\n");
    }
    out
}

#[derive(Serialize)]
struct Record<'a> {
    name: &'a str,
    roc_mm: Option<f64>,
    length_mm: f64,
    transmission_ppm: f64,
    finesse_expected: Option<f64>,
    finesse_obtained: Option<f64>,
    finesse_uncertainty: Option<f64>,
    cooperativity: Option<f64>,
    cooperativity_uncertainty: Option<f64>,
    waist_um: Option<f64>,
    g_over_2pi_mhz: Option<f64>,
    kappa_over_2pi_mhz: Option<f64>,
    gamma_over_2pi_mhz: Option<f64>,
    strong_coupling: Option<bool>,
    near_boundary: Option<bool>,
    error: Option<&'a str>,
}

fn record(row: &ReportRow) -> Record<'_> {
    let ok = row.result.as_ref().ok();
    let coupling = ok.and_then(|m| m.coupling.as_ref());
    let mhz = |rate: f64| rate / (2.0 * PI * MHZ);
    Record {
        name: &row.name,
        roc_mm: row.roc.as_radius().map(|r| r / MM),
        length_mm: row.length / MM,
        transmission_ppm: row.transmission / PPM,
        finesse_expected: ok.map(|m| m.finesse_expected),
        finesse_obtained: ok.map(|m| m.finesse_obtained.value),
        finesse_uncertainty: ok.map(|m| m.finesse_obtained.uncertainty),
        cooperativity: ok.map(|m| m.cooperativity.value),
        cooperativity_uncertainty: ok.map(|m| m.cooperativity.uncertainty),
        waist_um: ok.map(|m| m.waist / crate::units::UM),
        g_over_2pi_mhz: coupling.map(|c| mhz(c.g)),
        kappa_over_2pi_mhz: coupling.map(|c| mhz(c.kappa)),
        gamma_over_2pi_mhz: coupling.map(|c| mhz(c.gamma)),
        strong_coupling: coupling.map(|c| c.strong_coupling),
        near_boundary: ok.map(|m| m.near_boundary),
        error: row.result.as_ref().err().map(String::as_str),
    }
}

/// Serializes the summary table. Empty input gives the header only (text) or
/// no lines (records).
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => emit_text(rows).into_bytes(),
        ReportFormat::Records => {
            let mut out = Vec::new();
            for row in rows {
                serde_json::to_writer(&mut out, &record(row)).expect("records serialize to memory");
                out.push(b'\n');
            }
            out
        }
    }
}
