//! Single experiments and their CSV rows.

use std::io::Write;

use pielm::{
    black_scholes_volatilities, run_pipeline, ErrorReport, HestonParams, PdeProblem, SolveReport,
};
use serde::Serialize;

use crate::config::{backend_name, noise_name, ExperimentConfig, ProblemKind};
use crate::error::CliError;

/// Drift used for every Black-Scholes run.
pub const BS_DRIFT: f64 = -0.05;

pub fn build_problem(config: &ExperimentConfig) -> Result<PdeProblem, CliError> {
    let d = config.d;
    Ok(match config.problem {
        ProblemKind::Heat => PdeProblem::heat(d)?,
        ProblemKind::BlackScholes => {
            PdeProblem::black_scholes(d, BS_DRIFT, black_scholes_volatilities(d))?
        }
        ProblemKind::Heston => PdeProblem::heston(d, HestonParams::default())?,
    })
}

/// One CSV line. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub table: String,
    pub row: usize,
    pub problem: String,
    pub d: usize,
    pub n_int: usize,
    pub n_sb: usize,
    pub n_tb: usize,
    pub n_s: usize,
    pub n_test: usize,
    pub width: usize,
    pub activation: String,
    pub weight_low: f64,
    pub weight_high: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub backend: String,
    pub solver: String,
    pub rcond: f64,
    pub oracle_n_s: usize,
    pub oracle_noise: String,
    pub relative_l2: Option<f64>,
    pub l2: Option<f64>,
    pub mc_uncertainty: Option<f64>,
    pub effective_rank: Option<usize>,
    pub wall_time: String,
    pub seed_weights: u64,
    pub seed_collocation: u64,
    pub seed_boundary_mc: u64,
    pub seed_test: u64,
    pub seed_oracle: u64,
    pub status: String,
}

/// Index of the `wall_time` column.
pub const WALL_TIME_COLUMN: usize = 24;

impl CsvRow {
    /// A row with the configuration filled in and no results.
    pub fn skeleton(config: &ExperimentConfig, table: &str, row: usize) -> Self {
        Self {
            table: table.to_string(),
            row,
            problem: config.problem.name().into(),
            d: config.d,
            n_int: config.n_int,
            n_sb: config.n_sb,
            n_tb: config.n_tb,
            n_s: config.n_s,
            n_test: config.n_test,
            width: config.width,
            activation: config.activation.name().into(),
            weight_low: config.weight_range.0,
            weight_high: config.weight_range.1,
            beta1: config.beta1,
            beta2: config.beta2,
            backend: backend_name(config.backend).into(),
            solver: config.solver.method.name().into(),
            rcond: config.solver.rcond,
            oracle_n_s: config.oracle.n_samples,
            oracle_noise: noise_name(config.oracle.noise).into(),
            relative_l2: None,
            l2: None,
            mc_uncertainty: None,
            effective_rank: None,
            wall_time: String::new(),
            seed_weights: config.seeds.weights,
            seed_collocation: config.seeds.collocation,
            seed_boundary_mc: config.seeds.boundary_mc,
            seed_test: config.seeds.test,
            seed_oracle: config.seeds.oracle,
            status: String::new(),
        }
    }

    pub fn failed(config: &ExperimentConfig, table: &str, row: usize, err: &CliError) -> Self {
        Self {
            status: format!("error: {err}"),
            ..Self::skeleton(config, table, row)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ErrorReport,
    pub solve: SolveReport,
    pub row: CsvRow,
}

/// Runs the pipeline once with `config.seeds`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, CliError> {
    run_labelled(config, "", 0)
}

pub(crate) fn run_labelled(
    config: &ExperimentConfig,
    table: &str,
    row: usize,
) -> Result<ExperimentRun, CliError> {
    config.validate()?;
    let problem = build_problem(config)?;
    let outcome = run_pipeline(&problem, &config.pipeline_settings())?;
    let report = outcome.error;
    if !report.relative_l2.is_finite() || !report.l2_error.is_finite() {
        return Err(CliError::NonFinite(format!(
            "relative L2 error is {}",
            report.relative_l2
        )));
    }
    let row = CsvRow {
        relative_l2: Some(report.relative_l2),
        l2: Some(report.l2_error),
        mc_uncertainty: report.mc_uncertainty,
        effective_rank: Some(outcome.solve.effective_rank),
        wall_time: format!("{:.3}", report.wall_time_seconds),
        status: "ok".into(),
        ..CsvRow::skeleton(config, table, row)
    };
    Ok(ExperimentRun {
        report,
        solve: outcome.solve,
        row,
    })
}

/// Writes a header and the rows.
pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(csv_header())?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_header() -> [&'static str; 31] {
    [
        "table",
        "row",
        "problem",
        "d",
        "n_int",
        "n_sb",
        "n_tb",
        "n_s",
        "n_test",
        "width",
        "activation",
        "weight_low",
        "weight_high",
        "beta1",
        "beta2",
        "backend",
        "solver",
        "rcond",
        "oracle_n_s",
        "oracle_noise",
        "relative_l2",
        "l2",
        "mc_uncertainty",
        "effective_rank",
        "wall_time",
        "seed_weights",
        "seed_collocation",
        "seed_boundary_mc",
        "seed_test",
        "seed_oracle",
        "status",
    ]
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults_for;

    #[test]
    fn header_matches_serialized_fields() {
        let row = CsvRow::skeleton(&defaults_for(ProblemKind::Heat, 2), "T1", 0);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, csv_header().join(","));
        assert_eq!(csv_header()[WALL_TIME_COLUMN], "wall_time");
    }

    #[test]
    fn empty_table_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim_end(),
            csv_header().join(",")
        );
    }
}
