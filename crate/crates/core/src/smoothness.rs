//! Control smoothness analytics.
//!
//! A policy's jerkiness shows up as high-frequency energy in its action
//! signal. The headline number here is a frequency-weighted mean of the
//! one-sided amplitude spectrum: for a trace of `n` samples at rate `f_s`,
//!
//! ```text
//! S = (2 / (n_b * f_s)) * sum_k M_k * f_k ,   n_b = floor(n / 2)
//! ```
//!
//! where `M_k` is the amplitude at bin frequency `f_k`. Constant signals
//! score zero; the same amplitude at a higher frequency scores higher, so
//! lower is smoother. The DC bin carries `f = 0` and is excluded. Alongside
//! the spectral value this module reports mean absolute steering change and
//! run-level aggregates (completion rate, average finishing lap time).

use std::io::{BufRead, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::env::DoneReason;
use crate::error::{CoreError, Result};

/// Executed actions at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionTrace {
    /// (steering, speed) commands in [-1, 1].
    pub samples: Vec<[f64; 2]>,
    /// Sample rate in Hz.
    pub fs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub sm_steering: f64,
    pub sm_speed: f64,
    pub mean_abs_steering_change_deg: f64,
    pub n_samples: usize,
}

/// One-sided amplitude spectrum: `(f_k, M_k)` for bins `k = 1 ..= n/2`.
///
/// `M_k = (2/n) |X_k|`, except the Nyquist bin of an even-length series
/// which is not mirrored and scales by `1/n`. The DC bin is omitted.
pub fn amplitude_spectrum(series: &[f64], fs: f64) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 2 {
        return Err(CoreError::Trace(format!("spectrum needs at least 2 samples, got {n}")));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nb = n / 2;
    let mut out = Vec::with_capacity(nb);
    for k in 1..=nb {
        let f = k as f64 * fs / n as f64;
        let scale = if n % 2 == 0 && k == nb { 1.0 } else { 2.0 };
        out.push((f, scale * buf[k].norm() / n as f64));
    }
    Ok(out)
}

/// Frequency-weighted spectral smoothness of one series. Lower is smoother.
pub fn smoothness_value(series: &[f64], fs: f64) -> Result<f64> {
    let spectrum = amplitude_spectrum(series, fs)?;
    let nb = series.len() / 2;
    let weighted: f64 = spectrum.iter().map(|&(f, m)| m * f).sum();
    Ok(2.0 * weighted / (nb as f64 * fs))
}

/// Mean absolute change of consecutive steering commands, in degrees.
pub fn mean_abs_steering_change_deg(trace: &ActionTrace, steering_limit_deg: f64) -> Result<f64> {
    if trace.samples.len() < 2 {
        return Err(CoreError::Trace("steering change needs at least 2 samples".into()));
    }
    let sum: f64 = trace
        .samples
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).abs() * steering_limit_deg)
        .sum();
    Ok(sum / (trace.samples.len() - 1) as f64)
}

/// Smoothness of both action dimensions of one trace.
pub fn analyze_trace(trace: &ActionTrace, steering_limit_deg: f64) -> Result<SmoothnessReport> {
    let steering: Vec<f64> = trace.samples.iter().map(|s| s[0]).collect();
    let speed: Vec<f64> = trace.samples.iter().map(|s| s[1]).collect();
    Ok(SmoothnessReport {
        sm_steering: smoothness_value(&steering, trace.fs)?,
        sm_speed: smoothness_value(&speed, trace.fs)?,
        mean_abs_steering_change_deg: mean_abs_steering_change_deg(trace, steering_limit_deg)?,
        n_samples: trace.samples.len(),
    })
}

/// Pooled smoothness over several traces: one report on the concatenated
/// per-trace values, averaging the per-trace spectra.
pub fn analyze_traces(traces: &[ActionTrace], steering_limit_deg: f64) -> Result<SmoothnessReport> {
    if traces.is_empty() {
        return Err(CoreError::Trace("no traces to analyze".into()));
    }
    let reports: Vec<SmoothnessReport> =
        traces.iter().map(|t| analyze_trace(t, steering_limit_deg)).collect::<Result<_>>()?;
    let n = reports.len() as f64;
    Ok(SmoothnessReport {
        sm_steering: reports.iter().map(|r| r.sm_steering).sum::<f64>() / n,
        sm_speed: reports.iter().map(|r| r.sm_speed).sum::<f64>() / n,
        mean_abs_steering_change_deg: reports.iter().map(|r| r.mean_abs_steering_change_deg).sum::<f64>() / n,
        n_samples: reports.iter().map(|r| r.n_samples).sum(),
    })
}

impl ActionTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,steering,speed")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(f, "{},{},{}", i as f64 / self.fs, s[0], s[1])?;
        }
        Ok(())
    }

    /// Read a trace written by [`write_csv`](Self::write_csv); the sample
    /// rate is recovered from the time column.
    pub fn read_csv(path: &Path) -> Result<ActionTrace> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        {
            let headers = reader.headers().map_err(|e| CoreError::Trace(e.to_string()))?;
            if headers.iter().collect::<Vec<_>>() != ["t", "steering", "speed"] {
                return Err(CoreError::LogParse { line: 1, reason: "expected header `t,steering,speed`".into() });
            }
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| CoreError::LogParse { line, reason: e.to_string() })?;
            if record.len() != 3 {
                return Err(CoreError::LogParse { line, reason: format!("expected 3 fields, got {}", record.len()) });
            }
            let field = |j: usize, name: &str| -> Result<f64> {
                record[j].trim().parse::<f64>().map_err(|_| CoreError::LogParse {
                    line,
                    reason: format!("bad {name} value `{}`", &record[j]),
                })
            };
            times.push(field(0, "t")?);
            samples.push([field(1, "steering")?, field(2, "speed")?]);
        }
        if samples.len() < 2 {
            return Err(CoreError::Trace("trace has fewer than 2 samples".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(CoreError::LogParse { line: 3, reason: "time column must increase".into() });
        }
        let fs = (1.0 / dt * 1e6).round() / 1e6;
        Ok(ActionTrace { samples, fs })
    }
}

impl From<csv::Error> for CoreError {
    fn from(e: csv::Error) -> Self {
        CoreError::Trace(e.to_string())
    }
}

/// One line of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub actor_id: usize,
    pub episode_index: u64,
    pub steps: u64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub done_reason: DoneReason,
    /// Present only when the episode finished its laps.
    pub lap_time_s: Option<f64>,
}

/// Completion statistics over a set of evaluation runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runs: usize,
    pub completions: usize,
    pub completion_rate_pct: f64,
    /// Mean lap time over completed runs; absent when nothing completed.
    pub avg_lap_time_s: Option<f64>,
}

impl RunStats {
    /// Lap time as a plain float, NaN when no run completed.
    pub fn avg_lap_time_or_nan(&self) -> f64 {
        self.avg_lap_time_s.unwrap_or(f64::NAN)
    }

    /// Lap time for human-facing tables: seconds or `NaN`.
    pub fn avg_lap_time_display(&self) -> String {
        match self.avg_lap_time_s {
            Some(t) => format!("{t:.2}"),
            None => "NaN".to_string(),
        }
    }
}

pub fn aggregate_runs(records: &[EpisodeRecord]) -> Result<RunStats> {
    if records.is_empty() {
        return Err(CoreError::Trace("no runs to aggregate".into()));
    }
    let completed: Vec<&EpisodeRecord> =
        records.iter().filter(|r| r.done_reason == DoneReason::LapComplete).collect();
    let lap_times: Vec<f64> = completed.iter().filter_map(|r| r.lap_time_s).collect();
    let avg = if lap_times.is_empty() {
        None
    } else {
        Some(lap_times.iter().sum::<f64>() / lap_times.len() as f64)
    };
    Ok(RunStats {
        runs: records.len(),
        completions: completed.len(),
        completion_rate_pct: 100.0 * completed.len() as f64 / records.len() as f64,
        avg_lap_time_s: avg,
    })
}

pub fn read_episode_log(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EpisodeRecord = serde_json::from_str(&line)
            .map_err(|e| CoreError::LogParse { line: i + 1, reason: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Textbook O(n^2) transform, the reference the fast path must match.
    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex::new(0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                    acc += Complex::new(ang.cos(), ang.sin()) * v;
                }
                acc
            })
            .collect()
    }

    fn naive_spectrum(x: &[f64], fs: f64) -> Vec<(f64, f64)> {
        let n = x.len();
        let dft = naive_dft(x);
        (1..=n / 2)
            .map(|k| {
                let scale = if n % 2 == 0 && k == n / 2 { 1.0 } else { 2.0 };
                (k as f64 * fs / n as f64, scale * dft[k].norm() / n as f64)
            })
            .collect()
    }

    #[test]
    fn fast_spectrum_matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[16usize, 17, 30, 64, 100, 255, 256] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let fast = amplitude_spectrum(&x, 30.0).unwrap();
            let slow = naive_spectrum(&x, 30.0);
            assert_eq!(fast.len(), slow.len());
            for ((ff, fm), (sf, sm)) in fast.iter().zip(&slow) {
                assert_relative_eq!(ff, sf, max_relative = 1e-12);
                assert!((fm - sm).abs() < 1e-9, "n={n}: {fm} vs {sm}");
            }
        }
    }

    #[test]
    fn constant_series_has_empty_spectrum_and_zero_smoothness() {
        let x = vec![0.73; 300];
        for (_, m) in amplitude_spectrum(&x, 30.0).unwrap() {
            assert!(m.abs() < 1e-12);
        }
        assert!(smoothness_value(&x, 30.0).unwrap() <= 1e-12);
    }

    #[test]
    fn single_bin_sinusoid_recovers_amplitude() {
        let (n, k0, amp, fs) = (256usize, 12usize, 0.8, 30.0);
        let x: Vec<f64> =
            (0..n).map(|t| amp * (2.0 * PI * k0 as f64 * t as f64 / n as f64).sin()).collect();
        let spec = amplitude_spectrum(&x, fs).unwrap();
        for (i, &(f, m)) in spec.iter().enumerate() {
            let k = i + 1;
            if k == k0 {
                assert!((m - amp).abs() < 1e-9, "peak bin {m}");
                assert_relative_eq!(f, k0 as f64 * fs / n as f64, max_relative = 1e-12);
            } else {
                assert!(m.abs() < 1e-9, "leak at bin {k}: {m}");
            }
        }
        // With a single occupied bin the smoothness value reduces to
        // 2*A*f0/(n_b*fs), checked by direct substitution.
        let nb = n / 2;
        let f0 = k0 as f64 * fs / n as f64;
        let expected = 2.0 * amp * f0 / (nb as f64 * fs);
        assert_relative_eq!(smoothness_value(&x, fs).unwrap(), expected, max_relative = 1e-9);
    }

    #[test]
    fn spectrum_is_linear_in_the_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let n = 128;
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let da = naive_dft(&a);
            let db = naive_dft(&b);
            let dsum = naive_dft(&sum);
            let fast = amplitude_spectrum(&sum, 30.0).unwrap();
            for k in 1..=n / 2 {
                let combined = (da[k] + db[k]).norm();
                assert!((dsum[k].norm() - combined).abs() < 1e-9);
                let scale = if k == n / 2 { 1.0 } else { 2.0 };
                assert!((fast[k - 1].1 - scale * combined / n as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn higher_frequency_scores_rougher() {
        let n = 240;
        let make = |k: usize| -> Vec<f64> {
            (0..n).map(|t| 0.5 * (2.0 * PI * k as f64 * t as f64 / n as f64).sin()).collect()
        };
        let low = smoothness_value(&make(3), 30.0).unwrap();
        let high = smoothness_value(&make(40), 30.0).unwrap();
        assert!(high > low, "{high} vs {low}");
    }

    #[test]
    fn smoothness_scales_linearly_with_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let base = smoothness_value(&x, 30.0).unwrap();

        // Scaling by a power of two commutes with every rounding step.
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(smoothness_value(&doubled, 30.0).unwrap(), 2.0 * base);

        let c = 1.7;
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        assert_relative_eq!(smoothness_value(&scaled, 30.0).unwrap(), c * base, max_relative = 1e-12);
    }

    #[test]
    fn one_sided_spectrum_preserves_signal_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for &n in &[64usize, 101, 512, 4096] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let var_energy: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
            let spec = amplitude_spectrum(&x, 30.0).unwrap();
            let mut spectral = 0.0;
            for (i, &(_, m)) in spec.iter().enumerate() {
                let k = i + 1;
                if n % 2 == 0 && k == n / 2 {
                    let xk = m * n as f64;
                    spectral += xk * xk;
                } else {
                    let xk = m * n as f64 / 2.0;
                    spectral += 2.0 * xk * xk;
                }
            }
            assert_relative_eq!(spectral / n as f64, var_energy, max_relative = 1e-6);
        }
    }

    #[test]
    fn spectrum_rejects_tiny_series() {
        assert!(amplitude_spectrum(&[1.0], 30.0).is_err());
        assert!(amplitude_spectrum(&[], 30.0).is_err());
    }

    #[test]
    fn steering_change_of_constant_trace_is_zero() {
        let trace = ActionTrace { samples: vec![[0.4, 0.0]; 50], fs: 30.0 };
        assert_eq!(mean_abs_steering_change_deg(&trace, 25.8).unwrap(), 0.0);
    }

    #[test]
    fn alternating_full_lock_changes_by_twice_the_limit() {
        let samples: Vec<[f64; 2]> =
            (0..100).map(|i| [if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0]).collect();
        let trace = ActionTrace { samples, fs: 30.0 };
        assert_relative_eq!(mean_abs_steering_change_deg(&trace, 25.8).unwrap(), 51.6, max_relative = 1e-12);
    }

    #[test]
    fn single_step_change_averages_over_intervals() {
        let n = 11;
        let mut samples = vec![[0.0, 0.0]; n];
        for s in samples.iter_mut().skip(4) {
            s[0] = 0.5;
        }
        let trace = ActionTrace { samples, fs: 30.0 };
        let expected = 0.5 * 25.8 / (n - 1) as f64;
        assert_relative_eq!(mean_abs_steering_change_deg(&trace, 25.8).unwrap(), expected, max_relative = 1e-12);
    }

    fn record(reason: DoneReason, lap: Option<f64>) -> EpisodeRecord {
        EpisodeRecord {
            actor_id: 0,
            episode_index: 0,
            steps: 100,
            ret: 1.0,
            done_reason: reason,
            lap_time_s: lap,
        }
    }

    #[test]
    fn eleven_of_fifteen_completions_is_73_33_percent() {
        let mut records = vec![record(DoneReason::LapComplete, Some(20.0)); 11];
        records.extend(vec![record(DoneReason::Collision, None); 4]);
        let stats = aggregate_runs(&records).unwrap();
        assert_eq!(stats.runs, 15);
        assert_eq!(stats.completions, 11);
        assert!((stats.completion_rate_pct - 73.33).abs() <= 0.01);
        assert_eq!(stats.avg_lap_time_s, Some(20.0));
    }

    #[test]
    fn no_completions_reports_nan_lap_time() {
        let records = vec![record(DoneReason::Collision, None); 15];
        let stats = aggregate_runs(&records).unwrap();
        assert_eq!(stats.completion_rate_pct, 0.0);
        assert_eq!(stats.avg_lap_time_s, None);
        assert!(stats.avg_lap_time_or_nan().is_nan());
        assert_eq!(stats.avg_lap_time_display(), "NaN");
    }

    #[test]
    fn full_completion_is_100_percent() {
        let records = vec![record(DoneReason::LapComplete, Some(18.5)); 15];
        let stats = aggregate_runs(&records).unwrap();
        assert_eq!(stats.completion_rate_pct, 100.0);
    }

    #[test]
    fn aggregate_rejects_empty_input() {
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let samples: Vec<[f64; 2]> =
            (0..90).map(|_| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]).collect();
        let trace = ActionTrace { samples, fs: 30.0 };
        trace.write_csv(&path).unwrap();
        let back = ActionTrace::read_csv(&path).unwrap();
        assert_eq!(back.fs, 30.0);
        assert_eq!(back.samples, trace.samples);
    }

    #[test]
    fn truncated_trace_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,steering,speed\n0,0.1,0.2\n0.033,0.15\n").unwrap();
        let err = ActionTrace::read_csv(&path).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn episode_log_round_trip_and_error_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episodes.jsonl");
        let rec = record(DoneReason::LapComplete, Some(21.0));
        let mut text = serde_json::to_string(&rec).unwrap();
        text.push('\n');
        std::fs::write(&path, &text).unwrap();
        let back = read_episode_log(&path).unwrap();
        assert_eq!(back, vec![rec]);

        std::fs::write(&path, format!("{text}{{broken\n")).unwrap();
        let err = read_episode_log(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
