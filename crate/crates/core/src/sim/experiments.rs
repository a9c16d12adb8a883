//! Training-data generation, speed sweeps and variant comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, ScenarioConfig};
use super::log::{Outcome, RunLog};
use super::metrics::{compute_metrics, Metrics};
use super::run::simulate;
use crate::error::{Error, Result};
use crate::mpcc::Variant;
use crate::stp::{MismatchDataset, MismatchModels, MismatchSample};
use crate::track::Scenario;

/// Scenarios the learning data is recorded on.
pub fn training_scenarios() -> [ScenarioConfig; 3] {
    [ScenarioConfig::dlc(55.0, false), ScenarioConfig::dlc(80.0, false), ScenarioConfig::dlc(55.0, true)]
}

/// Held-out scenarios for mismatch evaluation.
pub fn test_scenarios() -> [ScenarioConfig; 2] {
    [ScenarioConfig::dlc(60.0, false), ScenarioConfig::dlc(60.0, true)]
}

/// Speeds of the completion sweep [km/h].
pub fn sweep_speeds() -> Vec<f64> {
    (0..=8).map(|i| 55.0 + 2.5 * i as f64).collect()
}

/// One regression row per tick after the first: features from the applied
/// command and the measurements, targets as measured minus nominal.
pub fn training_samples(log: &RunLog) -> impl Iterator<Item = MismatchSample> + '_ {
    log.ticks.iter().skip(1).map(|t| MismatchSample {
        features: [t.vx, t.delta, t.fx, t.meas_r, t.meas_fy_f, t.meas_fy_r],
        dfy_f: t.meas_fy_f - t.nom_fy_f,
        dfy_r: t.meas_fy_r - t.nom_fy_r,
        dr: t.meas_r - t.nom_r,
    })
}

pub fn build_training_set(logs: &[RunLog]) -> Result<MismatchDataset> {
    let mut ds = MismatchDataset::default();
    for log in logs {
        ds.push_run(format!("{}_{}", log.meta.scenario, log.meta.variant), training_samples(log));
    }
    if ds.is_empty() {
        return Err(Error::InvalidInput("no training samples in the given logs".into()));
    }
    ds.validate()?;
    Ok(ds)
}

/// Reads every `*.csv` run log in `dir`, in file-name order.
pub fn load_logs(dir: impl AsRef<Path>) -> Result<Vec<RunLog>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(RunLog::load).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub train: Vec<RunLog>,
    pub test: Vec<RunLog>,
}

/// Runs the baseline controller on the training and test scenarios. With
/// `out_dir`, logs go to `<out_dir>/train` and `<out_dir>/test`.
pub fn generate_training_runs(base: &RunConfig, out_dir: Option<&Path>) -> Result<GeneratedData> {
    let run = |sc: &ScenarioConfig| -> Result<RunLog> {
        let cfg = RunConfig { variant: Variant::Mpcc, scenario: sc.clone(), models: None, ..base.clone() };
        let log = simulate(&cfg, &sc.build()?, None)?;
        if log.meta.outcome == Outcome::Divergence {
            return Err(Error::InvalidInput(format!("training run {} diverged", log.meta.scenario)));
        }
        Ok(log)
    };
    let all: Vec<ScenarioConfig> = training_scenarios().into_iter().chain(test_scenarios()).collect();
    let mut logs = all.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    let test = logs.split_off(training_scenarios().len());
    let data = GeneratedData { train: logs, test };
    if let Some(dir) = out_dir {
        for (sub, logs) in [("train", &data.train), ("test", &data.test)] {
            let d = dir.join(sub);
            std::fs::create_dir_all(&d)?;
            for log in logs {
                log.save(d.join(log.file_name()))?;
            }
        }
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub speed_kmh: f64,
    pub outcome: Outcome,
    pub peak_sideslip: f64,
    pub min_clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variant: Variant,
    pub rows: Vec<SweepRow>,
    /// Highest speed that completed.
    pub max_speed_kmh: Option<f64>,
}

/// Runs `base` at every speed (ascending) and reports the highest that
/// completes. Runs execute in parallel.
pub fn speed_sweep(
    base: &RunConfig,
    variant: Variant,
    speeds: &[f64],
    models: Option<&MismatchModels>,
) -> Result<(Sweep, Vec<RunLog>)> {
    if speeds.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("sweep speeds must be strictly ascending".into()));
    }
    let hw = 0.5 * base.vehicle.width;
    let results = speeds
        .par_iter()
        .map(|&v| -> Result<(SweepRow, RunLog)> {
            let sc = ScenarioConfig { speed_kmh: v, ..base.scenario.clone() };
            let cfg = RunConfig { variant, scenario: sc.clone(), ..base.clone() };
            let scenario = sc.build()?;
            let log = simulate(&cfg, &scenario, models)?;
            let m = compute_metrics(&log, &scenario, hw)?;
            let row = SweepRow {
                speed_kmh: v,
                outcome: m.outcome,
                peak_sideslip: m.peak_sideslip,
                min_clearance: m.min_clearance,
            };
            Ok((row, log))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let max_speed_kmh = rows
        .iter()
        .filter(|r| r.outcome.is_success())
        .map(|r| r.speed_kmh)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    Ok((Sweep { variant, rows, max_speed_kmh }, logs))
}

/// Markdown table of sweep outcomes, one column per variant.
pub fn sweep_table(sweeps: &[Sweep]) -> String {
    let mut out = String::from("| speed [km/h] |");
    for s in sweeps {
        let _ = write!(out, " {} |", s.variant);
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(sweeps.len()));
    out.push('\n');
    let speeds: Vec<f64> = sweeps.first().map(|s| s.rows.iter().map(|r| r.speed_kmh).collect()).unwrap_or_default();
    for (i, v) in speeds.iter().enumerate() {
        let _ = write!(out, "| {v} |");
        for s in sweeps {
            let _ = write!(out, " {} |", s.rows.get(i).map_or("-", |r| r.outcome.as_str()));
        }
        out.push('\n');
    }
    out.push_str("| **max** |");
    for s in sweeps {
        match s.max_speed_kmh {
            Some(v) => {
                let _ = write!(out, " {v} |");
            }
            None => out.push_str(" none |"),
        }
    }
    out.push('\n');
    out
}

/// Relative change of `value` against `baseline` as a reduction in percent.
pub fn reduction_percent(baseline: f64, value: f64) -> f64 {
    if baseline == value {
        0.0
    } else {
        100.0 * (baseline - value) / baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub quantity: String,
    pub reference: String,
    pub variant: String,
    /// Positive values are improvements over the reference [%].
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub metrics: Vec<Metrics>,
    pub deltas: Vec<DeltaRow>,
}

impl Report {
    pub fn markdown(&self) -> String {
        let mut out = format!("# Comparison on `{}`\n\n", self.scenario);
        out.push_str("| variant | outcome | peak sideslip [rad] | peak v_y [m/s] | RMS dFyF [N] | RMS dFyR [N] | RMS dr [rad/s] | min clearance [m] | mean v_x [m/s] |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {:.4} | {:.1} | {:.1} | {:.5} | {:.3} | {:.2} |",
                m.variant,
                m.outcome,
                m.peak_sideslip,
                m.peak_vy,
                m.rms_dfy_f,
                m.rms_dfy_r,
                m.rms_dr,
                m.min_clearance,
                m.mean_vx
            );
        }
        out.push_str("\n| quantity | variant | reference | reduction [%] |\n|---|---|---|---|\n");
        for d in &self.deltas {
            let _ = writeln!(out, "| {} | {} | {} | {:.2} |", d.quantity, d.variant, d.reference, d.percent);
        }
        out
    }

    pub fn deltas_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for d in &self.deltas {
            w.serialize(d)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn metrics_csv(&self) -> Result<String> {
        metrics_csv(&self.metrics)
    }
}

pub fn metrics_csv(metrics: &[Metrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        w.serialize(m)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Parse(e.to_string()))
}

/// Metrics per log plus percentage deltas: every learning variant against
/// the baseline, and the Student-t variant against the Gaussian one. Sweeps,
/// when given, add the completion-speed gain.
pub fn compare_report(logs: &[RunLog], scenario: &Scenario, half_width: f64, sweeps: &[Sweep]) -> Result<Report> {
    if logs.len() < 2 {
        return Err(Error::InvalidInput("a comparison needs at least two logs".into()));
    }
    if let Some(bad) = logs.iter().find(|l| l.meta.scenario != scenario.name) {
        return Err(Error::ScenarioMismatch(format!("log of `{}` compared on `{}`", bad.meta.scenario, scenario.name)));
    }
    let metrics = logs.iter().map(|l| compute_metrics(l, scenario, half_width)).collect::<Result<Vec<_>>>()?;
    let by = |v: Variant| metrics.iter().find(|m| m.variant == v.as_str());
    let reference = by(Variant::Mpcc).unwrap_or(&metrics[0]);
    let mut deltas = Vec::new();
    let mut push = |q: &str, r: &Metrics, m: &Metrics, pct: f64| {
        deltas.push(DeltaRow {
            quantity: q.into(),
            reference: r.variant.clone(),
            variant: m.variant.clone(),
            percent: pct,
        });
    };
    let pairs: Vec<(&Metrics, &Metrics)> = {
        let mut p: Vec<(&Metrics, &Metrics)> =
            metrics.iter().filter(|m| !std::ptr::eq(*m, reference)).map(|m| (reference, m)).collect();
        if let (Some(gp), Some(stp)) = (by(Variant::LmpccGp), by(Variant::LmpccStp)) {
            if !std::ptr::eq(gp, reference) {
                p.push((gp, stp));
            }
        }
        p
    };
    for (r, m) in pairs {
        push("rms_dfy_f", r, m, reduction_percent(r.rms_dfy_f, m.rms_dfy_f));
        push("rms_dfy_r", r, m, reduction_percent(r.rms_dfy_r, m.rms_dfy_r));
        push("rms_dr", r, m, reduction_percent(r.rms_dr, m.rms_dr));
        push("peak_sideslip", r, m, reduction_percent(r.peak_sideslip, m.peak_sideslip));
    }
    let speed = |v: Variant| sweeps.iter().find(|s| s.variant == v).and_then(|s| s.max_speed_kmh);
    if let Some(v0) = speed(Variant::Mpcc) {
        for v in [Variant::LmpccGp, Variant::LmpccStp] {
            if let Some(v1) = speed(v) {
                deltas.push(DeltaRow {
                    quantity: "max_speed_gain".into(),
                    reference: Variant::Mpcc.to_string(),
                    variant: v.to_string(),
                    percent: 100.0 * (v1 - v0) / v0,
                });
            }
        }
    }
    Ok(Report { scenario: scenario.name.clone(), metrics, deltas })
}
