//! Result tables for evaluations, sweeps, and ablations.
//!
//! Everything here is a plain serializable struct plus a markdown renderer.
//! Multi-run commands produce a [`MatrixReport`]: one row per compared
//! configuration, cells for the individual seeds, and per-row means taken
//! over the cells that succeeded. Failed cells stay visible in the table
//! instead of silently shrinking the denominator.

use serde::Serialize;
use smoothrace_core::smoothness::{RunStats, SmoothnessReport};

/// Outcome of one train-plus-evaluate cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellOutcome {
    pub label: String,
    pub seed: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<SmoothnessReport>,
}

impl CellOutcome {
    pub fn failed(label: &str, seed: u64, error: String) -> CellOutcome {
        CellOutcome { label: label.to_string(), seed, ok: false, error: Some(error), stats: None, smoothness: None }
    }
}

/// One compared configuration with its per-seed cells.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixRow {
    pub key: String,
    pub cells: Vec<CellOutcome>,
    /// Means over succeeded cells; absent when every cell failed.
    pub mean_sm_steering: Option<f64>,
    pub mean_sm_speed: Option<f64>,
    pub mean_lap_time_s: Option<f64>,
    pub mean_completion_pct: Option<f64>,
}

impl MatrixRow {
    pub fn from_cells(key: String, cells: Vec<CellOutcome>) -> MatrixRow {
        let mean = |f: &dyn Fn(&CellOutcome) -> Option<f64>| -> Option<f64> {
            let values: Vec<f64> = cells.iter().filter(|c| c.ok).filter_map(|c| f(c)).collect();
            if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        };
        MatrixRow {
            mean_sm_steering: mean(&|c| c.smoothness.as_ref().map(|s| s.sm_steering)),
            mean_sm_speed: mean(&|c| c.smoothness.as_ref().map(|s| s.sm_speed)),
            mean_lap_time_s: mean(&|c| c.stats.as_ref().and_then(|s| s.avg_lap_time_s)),
            mean_completion_pct: mean(&|c| c.stats.as_ref().map(|s| s.completion_rate_pct)),
            key,
            cells,
        }
    }

    fn ok_count(&self) -> usize {
        self.cells.iter().filter(|c| c.ok).count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixReport {
    pub title: String,
    /// Header of the key column, e.g. the swept parameter's name.
    pub key_header: String,
    pub rows: Vec<MatrixRow>,
}

fn opt(v: Option<f64>, width: usize) -> String {
    match v {
        Some(x) => format!("{x:.width$}"),
        None => "-".to_string(),
    }
}

impl MatrixReport {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# {}\n\n", self.title);
        out.push_str(&format!(
            "| {} | cells | S_m steering | S_m speed | avg lap (s) | completion (%) |\n",
            self.key_header
        ));
        out.push_str("|---|---|---|---|---|---|\n");
        for row in &self.rows {
            let ok = row.ok_count();
            let cells = if ok == row.cells.len() {
                format!("{ok}/{}", row.cells.len())
            } else {
                format!("{ok}/{} ({} failed)", row.cells.len(), row.cells.len() - ok)
            };
            out.push_str(&format!(
                "| {} | {cells} | {} | {} | {} | {} |\n",
                row.key,
                opt(row.mean_sm_steering, 5),
                opt(row.mean_sm_speed, 5),
                opt(row.mean_lap_time_s, 2),
                opt(row.mean_completion_pct, 1),
            ));
        }
        let failed: Vec<&CellOutcome> =
            self.rows.iter().flat_map(|r| &r.cells).filter(|c| !c.ok).collect();
        if !failed.is_empty() {
            out.push_str("\n## Failed cells\n\n");
            for cell in failed {
                out.push_str(&format!(
                    "- `{}` seed {}: {}\n",
                    cell.label,
                    cell.seed,
                    cell.error.as_deref().unwrap_or("unknown error")
                ));
            }
        }
        out
    }
}

/// Summary table for offline re-analysis, where either piece may be absent
/// depending on which artifacts were supplied.
pub fn analysis_markdown(
    title: &str,
    stats: Option<&RunStats>,
    smoothness: Option<&SmoothnessReport>,
) -> String {
    let mut out = format!("# {title}\n\n| metric | value |\n|---|---|\n");
    if let Some(stats) = stats {
        out.push_str(&format!("| runs | {} |\n", stats.runs));
        out.push_str(&format!("| completions | {} |\n", stats.completions));
        out.push_str(&format!("| completion rate (%) | {:.2} |\n", stats.completion_rate_pct));
        out.push_str(&format!("| avg lap time (s) | {} |\n", stats.avg_lap_time_display()));
    }
    if let Some(s) = smoothness {
        out.push_str(&format!("| traces pooled | {} samples |\n", s.n_samples));
        out.push_str(&format!("| S_m steering | {:.5} |\n", s.sm_steering));
        out.push_str(&format!("| S_m speed | {:.5} |\n", s.sm_speed));
        out.push_str(&format!(
            "| mean abs steering change (deg) | {:.3} |\n",
            s.mean_abs_steering_change_deg
        ));
    }
    out
}

/// Summary table for a single evaluation.
pub fn eval_markdown(
    title: &str,
    stats: &RunStats,
    smoothness: Option<&SmoothnessReport>,
    skipped_short: usize,
) -> String {
    let mut out = format!("# {title}\n\n");
    out.push_str("| metric | value |\n|---|---|\n");
    out.push_str(&format!("| runs | {} |\n", stats.runs));
    out.push_str(&format!("| completions | {} |\n", stats.completions));
    out.push_str(&format!("| completion rate (%) | {:.2} |\n", stats.completion_rate_pct));
    out.push_str(&format!("| avg lap time (s) | {} |\n", stats.avg_lap_time_display()));
    match smoothness {
        Some(s) => {
            out.push_str(&format!("| S_m steering | {:.5} |\n", s.sm_steering));
            out.push_str(&format!("| S_m speed | {:.5} |\n", s.sm_speed));
            out.push_str(&format!(
                "| mean abs steering change (deg) | {:.3} |\n",
                s.mean_abs_steering_change_deg
            ));
        }
        None => out.push_str("| S_m | - (no usable traces) |\n"),
    }
    if skipped_short > 0 {
        out.push_str(&format!("\n{skipped_short} trace(s) shorter than 2 samples were skipped.\n"));
    }
    out
}
