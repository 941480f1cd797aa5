//! Comparison tables across runs and per-tick error series.
//!
//! Reports leave out wall-clock fields, so re-running a preset with the same
//! seeds reproduces its report exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use softarm_control::metrics::tick_errors;
use softarm_control::{summarize, ControllerKind, MeanStd, PlanMode, TrajectoryLog};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub preset: String,
    pub controller: ControllerKind,
    pub mode: PlanMode,
    pub seeds: Vec<u64>,
    pub ticks: usize,
    pub position_error_m: Option<MeanStd>,
    pub constraint_error_m: Option<MeanStd>,
    pub orientation_error_z_deg: Option<MeanStd>,
    pub orientation_error_x_deg: Option<MeanStd>,
    pub terminal_position_error_m: Option<MeanStd>,
    pub min_obstacle_distance_m: Vec<f64>,
    pub degraded_ticks: usize,
}

/// One row per (task, controller, mode), in order of first appearance.
/// Errors within a row are pooled over its runs tick by tick.
pub fn report_rows(logs: &[TrajectoryLog]) -> Vec<ReportRow> {
    let mut groups: Vec<Vec<&TrajectoryLog>> = Vec::new();
    for log in logs {
        let key = |l: &TrajectoryLog| (l.header.task.name.clone(), l.header.controller, l.header.mode);
        match groups.iter_mut().find(|g| key(g[0]) == key(log)) {
            Some(g) => g.push(log),
            None => groups.push(vec![log]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let owned: Vec<TrajectoryLog> = g.iter().map(|l| (*l).clone()).collect();
            let s = summarize(&owned);
            ReportRow {
                preset: g[0].header.task.name.clone(),
                controller: g[0].header.controller,
                mode: g[0].header.mode,
                seeds: g.iter().map(|l| l.header.seed).collect(),
                ticks: s.ticks,
                position_error_m: s.position_error_m,
                constraint_error_m: s.constraint_error_m,
                orientation_error_z_deg: s.orientation_error_z_deg,
                orientation_error_x_deg: s.orientation_error_x_deg,
                terminal_position_error_m: s.terminal_position_error_m,
                min_obstacle_distance_m: s.min_obstacle_distance_m,
                degraded_ticks: s.degraded_ticks,
            }
        })
        .collect()
}

fn cell(v: Option<MeanStd>, scale: f64) -> String {
    v.map_or("-".into(), |m| format!("{:.2}±{:.2}", m.mean * scale, m.std * scale))
}

/// Fixed-width table; lengths in cm, angles in degrees, clearances in m.
/// An empty row set renders as an empty string.
pub fn render_table(rows: &[ReportRow]) -> String {
    if rows.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:<4} {:<7} {:>4} {:>13} {:>13} {:>13} {:>13} {:>13}  min obstacle m",
        "preset", "ctrl", "mode", "runs", "pos cm", "constr cm", "orient z deg", "orient x deg", "terminal cm"
    );
    for r in rows {
        let clear = r
            .min_obstacle_distance_m
            .iter()
            .map(|d| format!("{d:.3}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{:<22} {:<4} {:<7} {:>4} {:>13} {:>13} {:>13} {:>13} {:>13}  {}",
            r.preset,
            r.controller.name(),
            format!("{:?}", r.mode).to_lowercase(),
            r.seeds.len(),
            cell(r.position_error_m, 100.0),
            cell(r.constraint_error_m, 100.0),
            cell(r.orientation_error_z_deg, 1.0),
            cell(r.orientation_error_x_deg, 1.0),
            cell(r.terminal_position_error_m, 100.0),
            if clear.is_empty() { "-".into() } else { clear },
        );
    }
    out
}

/// Per-tick errors of one run as CSV. Columns without data are left empty.
pub fn write_series(log: &TrajectoryLog, path: &Path) -> anyhow::Result<()> {
    let e = tick_errors(log);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "tick".to_string(),
        "position_m".into(),
        "constraint_m".into(),
        "orientation_z_deg".into(),
        "orientation_x_deg".into(),
    ];
    header.extend((0..e.obstacle_distance.len()).map(|i| format!("obstacle_{i}_m")));
    w.write_record(&header)?;
    let at = |v: &[f64], k: usize| v.get(k).map_or(String::new(), |x| x.to_string());
    for (k, rec) in log.ticks.iter().enumerate() {
        let mut row = vec![
            rec.tick.to_string(),
            at(&e.position, k),
            at(&e.constraint, k),
            at(&e.orientation_z, k),
            at(&e.orientation_x, k),
        ];
        row.extend(e.obstacle_distance.iter().map(|d| at(d, k)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
