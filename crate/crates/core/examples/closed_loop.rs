//! One closed-loop run against the surrogate plant, written as a CSV log
//! with its metrics.
//!
//! `cargo run --release --example closed_loop -- [speed_kmh] [out_dir]`

use lmpcc::sim::{compute_metrics, run_closed_loop, RunConfig, ScenarioConfig};

fn main() -> lmpcc::Result<()> {
    let mut args = std::env::args().skip(1);
    let speed: f64 = args.next().map_or(Ok(55.0), |s| s.parse()).map_err(|_| lmpcc::Error::Parse("speed".into()))?;
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "out".into()));

    let cfg = RunConfig { scenario: ScenarioConfig::dlc(speed, false), ..Default::default() };
    let log = run_closed_loop(&cfg)?;
    let metrics = compute_metrics(&log, &cfg.scenario.build()?, 0.5 * cfg.vehicle.width)?;
    std::fs::create_dir_all(&out)?;
    log.save(out.join(log.file_name()))?;
    println!("{} ticks, {}", log.ticks.len(), metrics.outcome);
    println!(
        "peak sideslip {:.4} rad, RMS mismatch {:.1} N / {:.1} N / {:.5} rad/s, min clearance {:.3} m",
        metrics.peak_sideslip, metrics.rms_dfy_f, metrics.rms_dfy_r, metrics.rms_dr, metrics.min_clearance
    );
    Ok(())
}
