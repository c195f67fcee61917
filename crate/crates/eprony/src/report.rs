//! JSON reports.
//!
//! Numbers are rounded to 12 significant digits and fields are emitted in
//! declaration order, so identical inputs give byte-identical files.

use std::io::{self, Write};
use std::path::Path;

use eprony_core::{
    normalform::{HTensor, ModalModel, ResonanceDegree},
    Complex, ErrorReport, ExtendedResult, Interval, Mode, ModeKind, ModeSet, ModeShape,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then(|| sig12(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub kind: String,
    pub freq_hz: f64,
    pub damping_per_s: f64,
    pub amplitude: f64,
    pub phase_deg: f64,
    /// Indices into the report's `natural_modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<[usize; 2]>,
    /// Which parents enter through their negative-frequency member.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugated: Option<[bool; 2]>,
    /// Distance in 1/s from the nearest non-parent natural mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
}

fn kind_name(kind: ModeKind) -> &'static str {
    match kind {
        ModeKind::Dc => "dc",
        ModeKind::Natural => "natural",
        ModeKind::Resonance => "resonance",
    }
}

/// Maps each mode index of `set` to the report entry of its
/// non-negative-frequency member, plus whether it was conjugated.
fn entry_index(set: &ModeSet) -> Vec<(usize, bool)> {
    let modes = set.modes();
    let reported: Vec<usize> = (0..modes.len())
        .filter(|&i| modes[i].eigenvalue.im >= 0.0)
        .collect();
    (0..modes.len())
        .map(|i| {
            if let Some(pos) = reported.iter().position(|&r| r == i) {
                return (pos, false);
            }
            let partner = set.conjugate_of(i).unwrap_or(i);
            (
                reported.iter().position(|&r| r == partner).unwrap_or(0),
                true,
            )
        })
        .collect()
}

fn mode_entry(m: &Mode) -> ModeEntry {
    ModeEntry {
        kind: kind_name(m.kind).to_string(),
        freq_hz: sig12(m.frequency()),
        damping_per_s: sig12(m.damping()),
        amplitude: sig12(m.amplitude()),
        phase_deg: sig12(m.phase().to_degrees()),
        parents: None,
        conjugated: None,
        detuning: None,
    }
}

/// One entry per dc mode and per conjugate pair.
pub fn mode_entries(set: &ModeSet) -> Vec<ModeEntry> {
    set.modes()
        .iter()
        .filter(|m| m.eigenvalue.im >= 0.0)
        .map(mode_entry)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub file: String,
    pub channel: String,
    pub dt: f64,
    pub window: [f64; 2],
}

impl InputInfo {
    pub fn new(file: &str, channel: &str, dt: f64, window: Interval) -> Self {
        InputInfo {
            file: file.to_string(),
            channel: channel.to_string(),
            dt: sig12(dt),
            window: [sig12(window.start), sig12(window.end)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasorEntry {
    pub channel: String,
    pub magnitude: f64,
    pub angle_deg: f64,
}

fn phasor(channel: &str, z: Complex) -> PhasorEntry {
    PhasorEntry {
        channel: channel.to_string(),
        magnitude: sig12(z.norm()),
        angle_deg: sig12(z.arg().to_degrees()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub freq_hz: f64,
    pub damping_per_s: f64,
    pub reference: String,
    pub phasors: Vec<PhasorEntry>,
    /// Combined resonance contribution in this shape's frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance: Option<PhasorEntry>,
}

pub fn shape_entry(shape: &ModeShape, resonance: Option<Complex>) -> ShapeEntry {
    ShapeEntry {
        freq_hz: sig12(shape.frequency().abs()),
        damping_per_s: sig12(shape.eigenvalue.re),
        reference: shape.reference.clone(),
        phasors: shape
            .channels
            .iter()
            .zip(&shape.phasors)
            .map(|(c, &z)| phasor(c, z))
            .collect(),
        resonance: resonance.map(|z| phasor("resonance", z)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PronyReport {
    pub schema_version: u32,
    pub method: String,
    pub input: InputInfo,
    pub order: usize,
    pub modes: Vec<ModeEntry>,
    pub residual: f64,
    pub error_index: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mode_shapes: Vec<ShapeEntry>,
}

impl PronyReport {
    pub fn new(
        input: InputInfo,
        order: usize,
        set: &ModeSet,
        residual: f64,
        error_index: Option<f64>,
    ) -> Self {
        PronyReport {
            schema_version: SCHEMA_VERSION,
            method: "prony".into(),
            input,
            order,
            modes: mode_entries(set),
            residual: sig12(residual),
            error_index: error_index.and_then(finite),
            mode_shapes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearResonanceEntry {
    pub parents: [usize; 2],
    pub conjugated: [bool; 2],
    pub target: usize,
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub natural_residual: f64,
    pub transient_residual: f64,
    pub extended_error_index: f64,
    pub classical_error_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedReport {
    pub schema_version: u32,
    pub method: String,
    pub input: InputInfo,
    pub order: usize,
    pub split_time: f64,
    pub natural_modes: Vec<ModeEntry>,
    pub transient_modes: Vec<ModeEntry>,
    pub candidate_count: usize,
    pub near_resonances: Vec<NearResonanceEntry>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mode_shapes: Vec<ShapeEntry>,
}

impl ExtendedReport {
    pub fn new(input: InputInfo, order: usize, result: &ExtendedResult) -> Self {
        let map = entry_index(&result.natural_modes);
        let pair = |k: usize, l: usize| ([map[k].0, map[l].0], [map[k].1, map[l].1]);
        let transient_modes = result
            .transient_modes
            .modes()
            .iter()
            .filter(|m| m.eigenvalue.im >= 0.0)
            .map(|m| {
                let mut e = mode_entry(m);
                if let Some((k, l)) = m.parents {
                    let (parents, conjugated) = pair(k, l);
                    e.parents = Some(parents);
                    e.conjugated = conjugated.iter().any(|&c| c).then_some(conjugated);
                    e.detuning = result
                        .candidates
                        .iter()
                        .find(|c| c.eigenvalue == m.eigenvalue)
                        .and_then(|c| finite(c.detuning));
                }
                e
            })
            .collect();
        let near_resonances = result
            .near_resonances
            .iter()
            .map(|n| {
                let (parents, conjugated) = pair(n.k, n.l);
                NearResonanceEntry {
                    parents,
                    conjugated,
                    target: map[n.j].0,
                    detuning: sig12(n.detuning),
                }
            })
            .collect();
        let d = &result.diagnostics;
        ExtendedReport {
            schema_version: SCHEMA_VERSION,
            method: "extended".into(),
            input,
            order,
            split_time: sig12(result.split_time),
            natural_modes: mode_entries(&result.natural_modes),
            transient_modes,
            candidate_count: result.candidates.len(),
            near_resonances,
            diagnostics: Diagnostics {
                natural_residual: sig12(d.natural_residual),
                transient_residual: sig12(d.transient_residual),
                extended_error_index: sig12(d.extended_error_index),
                classical_error_index: d.classical_error_index.and_then(finite),
            },
            mode_shapes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub start: f64,
    pub end: f64,
    pub error_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub error_index: f64,
    pub breakdown: Vec<WindowError>,
}

impl CompareRow {
    pub fn new(name: &str, report: &ErrorReport) -> Self {
        CompareRow {
            name: name.to_string(),
            error_index: sig12(report.error_index),
            breakdown: report
                .breakdown
                .iter()
                .map(|(w, e)| WindowError {
                    start: sig12(w.start),
                    end: sig12(w.end),
                    error_index: sig12(*e),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub reference: String,
    pub channel: String,
    pub window: [f64; 2],
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    /// Plain-text table, one row per candidate.
    pub fn table(&self) -> String {
        let mut out = format!("{:<16} {:>12}", "candidate", "whole");
        if let Some(first) = self.rows.first() {
            for w in &first.breakdown {
                out.push_str(&format!(" {:>14}", format!("{}-{} s", w.start, w.end)));
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<16} {:>11.4}%", row.name, row.error_index));
            for w in &row.breakdown {
                out.push_str(&format!(" {:>13.4}%", w.error_index));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEntry {
    pub re: f64,
    pub im: f64,
    pub freq_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HEntry {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedEntry {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormReport {
    pub schema_version: u32,
    pub system: String,
    pub eigenvalues: Vec<EigenEntry>,
    /// Entries with `k <= l` and nonzero `h`, largest first.
    pub h: Vec<HEntry>,
    pub masked: Vec<MaskedEntry>,
    pub detuning_floor: f64,
    /// Most resonant `(k, l, j)` with `j` distinct from both parents.
    pub resonance_argmin: Option<[usize; 3]>,
    pub resonance_min: Option<f64>,
    pub z0: Vec<[f64; 2]>,
}

impl NormalFormReport {
    pub fn new(
        system: &str,
        modal: &ModalModel,
        h: &HTensor,
        degree: &ResonanceDegree,
        z0: &[Complex],
    ) -> Self {
        let n = modal.dim();
        let mut entries = Vec::new();
        let mut masked = Vec::new();
        for j in 0..n {
            for k in 0..n {
                for l in k..n {
                    let detuning = sig12(degree.detuning(k, l, j));
                    match h.get(j, k, l) {
                        None => masked.push(MaskedEntry { j, k, l, detuning }),
                        Some(v) if v.norm() > 0.0 => entries.push(HEntry {
                            j,
                            k,
                            l,
                            re: sig12(v.re),
                            im: sig12(v.im),
                            magnitude: sig12(v.norm()),
                            detuning,
                        }),
                        Some(_) => {}
                    }
                }
            }
        }
        entries.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        NormalFormReport {
            schema_version: SCHEMA_VERSION,
            system: system.to_string(),
            eigenvalues: modal
                .eigenvalues()
                .iter()
                .map(|l| EigenEntry {
                    re: sig12(l.re),
                    im: sig12(l.im),
                    freq_hz: sig12(l.im.abs() / (2.0 * std::f64::consts::PI)),
                })
                .collect(),
            h: entries,
            masked,
            detuning_floor: sig12(h.floor()),
            resonance_argmin: degree.argmin.map(|(k, l, j)| [k, l, j]),
            resonance_min: finite(degree.min),
            z0: z0.iter().map(|z| [sig12(z.re), sig12(z.im)]).collect(),
        }
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report types always serialize");
    s.push('\n');
    s
}

/// Writes a report to `path`, or to stdout when `path` is `None`.
pub fn write_report<T: Serialize>(report: &T, path: Option<&Path>) -> io::Result<()> {
    let text = to_json(report);
    match path {
        Some(p) => std::fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}
