//! Runs a reduced preset experiment and prints the NMSE table as CSV.

use graphspec::experiment::{run_experiment, ExperimentConfig, Scenario};

fn main() -> graphspec::error::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "tc1_windows".into());
    let mut cfg = ExperimentConfig::preset(Scenario::parse(&name)?);
    cfg.trials = 10;
    let report = run_experiment(&cfg)?;
    print!("{}", report.to_csv());
    Ok(())
}
