//! Full learning pipeline: record baseline runs, fit Student-t and Gaussian
//! mismatch models, then compare all three controllers on the held-out
//! scenarios. Takes a few minutes in release mode.

use lmpcc::mpcc::Variant;
use lmpcc::sim::{build_training_set, compare_report, generate_training_runs, simulate, RunConfig};
use lmpcc::stp::{FitOptions, MismatchModels, Process, DEFAULT_M_MAX};

fn main() -> lmpcc::Result<()> {
    let base = RunConfig::default();
    let data = generate_training_runs(&base, None)?;
    let dataset = build_training_set(&data.train)?;
    println!("{} training rows from {} runs", dataset.len(), data.train.len());

    let opts = FitOptions { restarts: 3, seed: 1, ..Default::default() };
    let stp = MismatchModels::fit(&dataset, Process::StudentT, DEFAULT_M_MAX, &opts)?;
    let gp = MismatchModels::fit(&dataset, Process::Gaussian, DEFAULT_M_MAX, &opts)?;

    for test in &data.test {
        let scenario_cfg = lmpcc::sim::ScenarioConfig::dlc(60.0, test.meta.scenario.contains("priority"));
        let scenario = scenario_cfg.build()?;
        let cfg = RunConfig { scenario: scenario_cfg, ..base.clone() };
        let mut logs = vec![test.clone()];
        for (variant, models) in [(Variant::LmpccGp, &gp), (Variant::LmpccStp, &stp)] {
            logs.push(simulate(&RunConfig { variant, ..cfg.clone() }, &scenario, Some(models))?);
        }
        println!("{}", compare_report(&logs, &scenario, 0.5 * base.vehicle.width, &[])?.markdown());
    }
    Ok(())
}
