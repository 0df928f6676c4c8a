//! Implementations behind the `smoothrace` subcommands.
//!
//! Each command is an ordinary function over an [`ExperimentConfig`] and an
//! output directory, so the binary stays a thin argument-parsing shell and
//! the interesting behavior is testable in-process. Multi-cell commands
//! (sweep, ablation) expand to a plan first; planning is separated from
//! execution so the experiment matrix can be inspected without training
//! anything.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use smoothrace_core::augment::{sample_params, PerturbationKind};
use smoothrace_core::config::{apply_override, ExperimentConfig, SpeedPreset};
use smoothrace_core::error::CoreError;
use smoothrace_core::obs::Image;
use smoothrace_core::render::Renderer;
use smoothrace_core::rng::{stream, StreamId};
use smoothrace_core::runner::{self, EvalEpisode};
use smoothrace_core::smoothness::{
    aggregate_runs, amplitude_spectrum, analyze_traces, read_episode_log, ActionTrace,
    EpisodeRecord, RunStats, SmoothnessReport,
};
use smoothrace_core::track::Track;

use crate::presets::Preset;
use crate::report::{analysis_markdown, eval_markdown, CellOutcome, MatrixReport, MatrixRow};
use crate::svg::{self, Series};
use crate::UsageError;

/// Temporal-weight values swept when no axis is given.
pub const DEFAULT_SWEEP_AXIS: [f64; 4] = [0.5, 0.8, 1.0, 1.3];

/// Build the experiment config from a preset or a config file, then apply
/// `KEY=VALUE` overrides and the seed flag, and validate the result.
pub fn resolve_config(
    preset: Option<Preset>,
    config_path: Option<&Path>,
    seed: Option<u64>,
    sets: &[String],
) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (preset, config_path) {
        (Some(p), None) => p.config(),
        (None, Some(path)) => load_config_file(path)?,
        (Some(_), Some(_)) => {
            bail!(UsageError("--preset and --config are mutually exclusive".into()))
        }
        (None, None) => bail!(UsageError("one of --preset or --config is required".into())),
    };
    if !sets.is_empty() {
        let mut value = serde_json::to_value(&cfg).expect("config serializes");
        for entry in sets {
            let (key, text) = entry
                .split_once('=')
                .ok_or_else(|| UsageError(format!("override `{entry}`: expected KEY=VALUE")))?;
            apply_override(&mut value, key, text)?;
        }
        cfg = serde_json::from_value(value).map_err(|e| CoreError::Config(e.to_string()))?;
    }
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read a config file, filling unspecified fields with defaults. A relative
/// track path is taken relative to the config file's directory.
pub fn load_config_file(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config `{}`", path.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
    let track = cfg.track.to_string_lossy().to_string();
    if !track.starts_with("bundled:") && cfg.track.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.track = dir.join(&cfg.track);
        }
    }
    Ok(cfg)
}

/// Everything one evaluation leaves on disk, plus the numbers themselves.
#[derive(Debug)]
pub struct EvalArtifacts {
    pub stats: RunStats,
    pub smoothness: Option<SmoothnessReport>,
    pub skipped_short: usize,
    pub out_dir: PathBuf,
}

/// Run `runs` greedy-policy episodes from a checkpoint and write traces,
/// stats, and the summary table under `out`.
pub fn evaluate(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    runs: usize,
    speed: Option<SpeedPreset>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<EvalArtifacts> {
    if runs == 0 {
        bail!(UsageError("--runs must be at least 1".into()));
    }
    let mut cfg = cfg.clone();
    if let Some(preset) = speed {
        cfg.speed = preset.config();
    }
    cfg.validate()?;
    let policy = runner::load_policy(&cfg, checkpoint)
        .with_context(|| format!("loading checkpoint `{}`", checkpoint.display()))?;
    let episodes = runner::evaluate(&cfg, &policy, runs, seed)?;
    write_eval_artifacts(&cfg, &episodes, out)
}

fn write_eval_artifacts(
    cfg: &ExperimentConfig,
    episodes: &[EvalEpisode],
    out: &Path,
) -> anyhow::Result<EvalArtifacts> {
    let traces_dir = out.join("traces");
    fs::create_dir_all(&traces_dir)?;
    let dt = cfg.episode.dt();
    let mut traces = Vec::new();
    let mut skipped_short = 0;
    for ep in episodes {
        runner::write_trace_csv(&traces_dir.join(format!("trace_{:02}.csv", ep.index)), ep, dt)?;
        if ep.steering.len() >= 2 {
            let samples = ep.steering.iter().zip(&ep.speed_cmd).map(|(&s, &v)| [s, v]).collect();
            traces.push(ActionTrace { samples, fs: cfg.episode.fps });
        } else {
            skipped_short += 1;
        }
    }

    let records: Vec<EpisodeRecord> = episodes
        .iter()
        .map(|ep| EpisodeRecord {
            actor_id: 0,
            episode_index: ep.index as u64,
            steps: ep.steps,
            ret: ep.ep_return,
            done_reason: ep.done_reason,
            lap_time_s: ep.lap_time_s,
        })
        .collect();
    let mut log = std::io::BufWriter::new(fs::File::create(out.join("episodes.jsonl"))?);
    for record in &records {
        serde_json::to_writer(&mut log, record)?;
        log.write_all(b"\n")?;
    }
    log.flush()?;

    let stats = aggregate_runs(&records)?;
    let smoothness = if traces.is_empty() {
        None
    } else {
        Some(analyze_traces(&traces, cfg.vehicle.steering_limit_deg)?)
    };
    fs::write(out.join("runstats.json"), serde_json::to_string_pretty(&stats)?)?;
    if let Some(s) = &smoothness {
        fs::write(out.join("smoothness.json"), serde_json::to_string_pretty(s)?)?;
    }
    fs::write(
        out.join("summary.md"),
        eval_markdown("Evaluation", &stats, smoothness.as_ref(), skipped_short),
    )?;
    Ok(EvalArtifacts { stats, smoothness, skipped_short, out_dir: out.to_path_buf() })
}

/// One train-plus-evaluate unit of a sweep or ablation.
#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    /// Report row this cell belongs to.
    pub label: String,
    /// Directory name under the matrix output root.
    pub dir_name: String,
    pub seed: u64,
    pub cfg: ExperimentConfig,
}

fn format_weight(value: f64) -> String {
    if value == value.floor() {
        format!("{value:.1}")
    } else {
        format!("{value}")
    }
}

/// Expand a temporal-weight sweep: every axis value crossed with every
/// seed, spatial term off throughout so the axis is isolated.
pub fn sweep_plan(
    base: &ExperimentConfig,
    axis: &[f64],
    seeds: &[u64],
) -> anyhow::Result<Vec<Cell>> {
    if axis.is_empty() {
        bail!(UsageError("sweep axis must contain at least one value".into()));
    }
    if seeds.is_empty() {
        bail!(UsageError("at least one seed is required".into()));
    }
    let mut cells = Vec::new();
    for &value in axis {
        if !value.is_finite() || value < 0.0 {
            bail!(UsageError(format!("temporal weight must be non-negative, got {value}")));
        }
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.caps.lambda_t = value;
            cfg.caps.lambda_s = 0.0;
            cfg.run.seed = seed;
            cells.push(Cell {
                label: format_weight(value),
                dir_name: format!("lt{}_seed{seed}", format_weight(value)),
                seed,
                cfg,
            });
        }
    }
    Ok(cells)
}

fn ablation_label(kind: PerturbationKind) -> &'static str {
    match kind {
        PerturbationKind::GaussianBlur => "blur",
        other => other.name(),
    }
}

/// Expand the leave-one-out perturbation ablation: the full similarity set
/// first, then one configuration per removed kind.
pub fn ablation_plan(base: &ExperimentConfig, seeds: &[u64]) -> anyhow::Result<Vec<Cell>> {
    if seeds.is_empty() {
        bail!(UsageError("at least one seed is required".into()));
    }
    let full = PerturbationKind::similarity_set();
    if base.phi.phi_enabled != full.to_vec() {
        bail!(UsageError(
            "ablation base must enable the full six-kind similarity set".into()
        ));
    }
    if base.caps.lambda_s <= 0.0 {
        bail!(UsageError("ablation base must use the spatial term (caps.lambda_s > 0)".into()));
    }
    let mut variants: Vec<(String, Option<PerturbationKind>)> = vec![("full".to_string(), None)];
    variants.extend(full.iter().map(|&k| (format!("-{}", ablation_label(k)), Some(k))));

    let mut cells = Vec::new();
    for (label, removed) in &variants {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.phi.phi_enabled =
                full.iter().copied().filter(|k| Some(*k) != *removed).collect();
            cfg.run.seed = seed;
            let dir_name = match removed {
                None => format!("full_seed{seed}"),
                Some(k) => format!("no_{}_seed{seed}", ablation_label(*k)),
            };
            cells.push(Cell { label: label.clone(), dir_name, seed, cfg: cfg.clone() });
        }
    }
    Ok(cells)
}

/// Train and evaluate every cell, continuing past failures; each cell is
/// isolated in its own directory under `out`.
pub fn run_cells(cells: &[Cell], out: &Path) -> Vec<CellOutcome> {
    cells
        .iter()
        .map(|cell| match run_cell(cell, &out.join(&cell.dir_name)) {
            Ok(artifacts) => CellOutcome {
                label: cell.label.clone(),
                seed: cell.seed,
                ok: true,
                error: None,
                stats: Some(artifacts.stats),
                smoothness: artifacts.smoothness,
            },
            Err(e) => CellOutcome::failed(&cell.label, cell.seed, format!("{e:#}")),
        })
        .collect()
}

fn run_cell(cell: &Cell, dir: &Path) -> anyhow::Result<EvalArtifacts> {
    let outcome = runner::train(&cell.cfg, dir)?;
    let checkpoint = outcome.out_dir.join("checkpoints").join("policy_final.bin");
    let policy = runner::load_policy(&cell.cfg, &checkpoint)?;
    let episodes =
        runner::evaluate(&cell.cfg, &policy, cell.cfg.run.eval_runs, cell.cfg.run.seed)?;
    write_eval_artifacts(&cell.cfg, &episodes, &dir.join("eval"))
}

fn group_rows(cells: &[Cell], outcomes: &[CellOutcome]) -> Vec<MatrixRow> {
    let mut order: Vec<&str> = Vec::new();
    for cell in cells {
        if !order.contains(&cell.label.as_str()) {
            order.push(&cell.label);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let group = outcomes.iter().filter(|o| o.label == key).cloned().collect();
            MatrixRow::from_cells(key.to_string(), group)
        })
        .collect()
}

/// Run the temporal-weight sweep end to end and write its report files.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &[f64],
    seeds: &[u64],
    out: &Path,
) -> anyhow::Result<MatrixReport> {
    let cells = sweep_plan(base, axis, seeds)?;
    fs::create_dir_all(out)?;
    let outcomes = run_cells(&cells, out);
    let report = MatrixReport {
        title: "Temporal weight sweep".to_string(),
        key_header: "lambda_t".to_string(),
        rows: group_rows(&cells, &outcomes),
    };
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(out.join("sweep.md"), report.to_markdown())?;

    let mut sm_points = Vec::new();
    let mut lap_points = Vec::new();
    for row in &report.rows {
        if let Ok(x) = row.key.parse::<f64>() {
            if let Some(y) = row.mean_sm_steering {
                sm_points.push((x, y));
            }
            if let Some(y) = row.mean_lap_time_s {
                lap_points.push((x, y));
            }
        }
    }
    let series = [
        Series { label: "S_m steering".to_string(), points: sm_points },
        Series { label: "avg lap time (s)".to_string(), points: lap_points },
    ];
    fs::write(
        out.join("sweep.svg"),
        svg::line_chart("Temporal weight sensitivity", "lambda_t", "value", &series),
    )?;
    Ok(report)
}

/// Run the perturbation ablation end to end and write its report files.
pub fn ablate(
    base: &ExperimentConfig,
    seeds: &[u64],
    out: &Path,
) -> anyhow::Result<MatrixReport> {
    let cells = ablation_plan(base, seeds)?;
    fs::create_dir_all(out)?;
    let outcomes = run_cells(&cells, out);
    let report = MatrixReport {
        title: "Perturbation ablation".to_string(),
        key_header: "configuration".to_string(),
        rows: group_rows(&cells, &outcomes),
    };
    fs::write(out.join("ablation.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(out.join("ablation.md"), report.to_markdown())?;
    let bars: Vec<(String, f64)> = report
        .rows
        .iter()
        .filter_map(|r| Some((r.key.clone(), r.mean_sm_steering?)))
        .collect();
    fs::write(
        out.join("ablation.svg"),
        svg::bar_chart("Steering smoothness by configuration", "S_m steering", &bars),
    )?;
    Ok(report)
}

pub struct AnalyzeArtifacts {
    pub smoothness: Option<SmoothnessReport>,
    pub stats: Option<RunStats>,
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct AnalysisFile<'a> {
    smoothness: &'a Option<SmoothnessReport>,
    stats: &'a Option<RunStats>,
}

/// Recompute smoothness and completion statistics from recorded artifacts,
/// no simulator involved.
pub fn analyze(
    traces: &[PathBuf],
    episodes: Option<&Path>,
    steering_limit_deg: f64,
    out: &Path,
) -> anyhow::Result<AnalyzeArtifacts> {
    if traces.is_empty() && episodes.is_none() {
        bail!(UsageError("nothing to analyze: pass --trace and/or --episodes".into()));
    }
    fs::create_dir_all(out)?;
    let mut parsed = Vec::new();
    for path in traces {
        let trace = ActionTrace::read_csv(path)
            .with_context(|| format!("trace `{}`", path.display()))?;
        parsed.push(trace);
    }
    let smoothness = if parsed.is_empty() {
        None
    } else {
        Some(analyze_traces(&parsed, steering_limit_deg)?)
    };
    let stats = match episodes {
        Some(path) => {
            let records = read_episode_log(path)
                .with_context(|| format!("episode log `{}`", path.display()))?;
            Some(aggregate_runs(&records)?)
        }
        None => None,
    };

    if !parsed.is_empty() {
        let mut series = Vec::new();
        for (i, trace) in parsed.iter().take(6).enumerate() {
            let steering: Vec<f64> = trace.samples.iter().map(|s| s[0]).collect();
            series.push(Series {
                label: format!("trace {i}"),
                points: amplitude_spectrum(&steering, trace.fs)?,
            });
        }
        fs::write(
            out.join("spectrum.svg"),
            svg::line_chart("Steering amplitude spectrum", "frequency (Hz)", "amplitude", &series),
        )?;
    }
    let file = AnalysisFile { smoothness: &smoothness, stats: &stats };
    fs::write(out.join("analysis.json"), serde_json::to_string_pretty(&file)?)?;
    fs::write(
        out.join("analysis.md"),
        analysis_markdown("Offline analysis", stats.as_ref(), smoothness.as_ref()),
    )?;
    Ok(AnalyzeArtifacts { smoothness, stats, out_dir: out.to_path_buf() })
}

fn blit(dst: &mut Image, src: &Image, y0: usize, x0: usize) {
    for y in 0..src.h {
        for x in 0..src.w {
            dst.set_pixel(y0 + y, x0 + x, src.pixel(y, x));
        }
    }
}

/// Contact sheet of the perturbation family: one row per kind (the first
/// row is the unmodified observation), `samples` independent draws across.
/// Returns the sheet and the row labels, top to bottom.
pub fn augment_sheet(
    cfg: &ExperimentConfig,
    seed: u64,
    samples: usize,
) -> anyhow::Result<(Image, Vec<String>)> {
    if samples == 0 {
        bail!(UsageError("--samples must be at least 1".into()));
    }
    let track = Track::load_spec(&cfg.track.to_string_lossy())?;
    let renderer = Renderer::new(&cfg.observation, &cfg.camera);
    let base = renderer.render(&track, &track.start_pose);
    let mut rng = stream(seed, StreamId::Eval);

    let kinds = PerturbationKind::ALL;
    let rows = 1 + kinds.len();
    let pad = 2;
    let cell_h = base.h + pad;
    let cell_w = base.w + pad;
    let mut sheet = Image::filled(pad + rows * cell_h, pad + samples * cell_w, [24, 24, 24]);
    let mut labels = vec!["original".to_string()];
    for col in 0..samples {
        blit(&mut sheet, &base, pad, pad + col * cell_w);
    }
    for (row, &kind) in kinds.iter().enumerate() {
        labels.push(kind.name().to_string());
        for col in 0..samples {
            let perturbed = sample_params(kind, &cfg.phi, &mut rng).apply(&base);
            blit(&mut sheet, &perturbed, pad + (row + 1) * cell_h, pad + col * cell_w);
        }
    }
    Ok((sheet, labels))
}

pub fn write_png(path: &Path, img: &Image) -> anyhow::Result<()> {
    let buf = image::RgbImage::from_raw(img.w as u32, img.h as u32, img.data.clone())
        .context("image dimensions do not match the pixel buffer")?;
    buf.save(path).with_context(|| format!("writing `{}`", path.display()))?;
    Ok(())
}
