//! Error-versus-width studies.

use std::io::Write;

use pielm::convergence_study;
use pielm::metrics::ConvergenceTable;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::build_problem;

pub const DEFAULT_WIDTHS: [usize; 3] = [800, 1600, 3200];

/// Runs `config.repeats` seeds per width; repeat `r` uses seeds offset by `r`.
pub fn run_rates(
    config: &ExperimentConfig,
    widths: &[usize],
) -> Result<ConvergenceTable, CliError> {
    config.validate()?;
    let problem = build_problem(config)?;
    Ok(convergence_study(
        &problem,
        &config.pipeline_settings(),
        widths,
        config.repeats,
        &config.seeds,
    )?)
}

#[derive(Serialize)]
struct RateRow<'a> {
    problem: &'a str,
    d: usize,
    activation: &'a str,
    width: usize,
    repeats: usize,
    median_relative_l2: f64,
    iqr: f64,
    slope: Option<f64>,
}

pub fn write_rates<W: Write>(
    out: W,
    config: &ExperimentConfig,
    table: &ConvergenceTable,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for row in &table.rows {
        w.serialize(RateRow {
            problem: config.problem.name(),
            d: config.d,
            activation: config.activation.name(),
            width: row.width,
            repeats: row.errors.len(),
            median_relative_l2: row.median,
            iqr: row.iqr,
            slope: table.slope,
        })?;
    }
    w.flush()?;
    Ok(())
}
