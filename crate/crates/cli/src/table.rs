//! Experiment grids T1 to T5, at full or desk scale.

use std::fmt;
use std::str::FromStr;

use pielm::{Activation, NoiseMode, SeedBundle};

use crate::config::{defaults_for, ExperimentConfig, ProblemKind};
use crate::error::CliError;
use crate::run::{run_labelled, CsvRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl FromStr for TableId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(TableId::T1),
            "T2" => Ok(TableId::T2),
            "T3" => Ok(TableId::T3),
            "T4" => Ok(TableId::T4),
            "T5" => Ok(TableId::T5),
            _ => Err(CliError::UnknownTable(s.to_string())),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    Full,
    Desk,
}

impl FromStr for Scale {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            _ => Err(CliError::UnknownScale(s.to_string())),
        }
    }
}

/// Limits applied at desk scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeskPolicy {
    pub max_dim: usize,
    pub max_width: usize,
    pub mc_divisor: usize,
    /// Test-set cap for problems whose reference is itself Monte Carlo.
    pub max_mc_test: usize,
    pub oracle_noise: NoiseMode,
}

pub const DESK: DeskPolicy = DeskPolicy {
    max_dim: 20,
    max_width: 1600,
    mc_divisor: 4,
    max_mc_test: 4096,
    oracle_noise: NoiseMode::Shared,
};

impl DeskPolicy {
    /// `None` when the row is dropped.
    pub fn apply(&self, mut c: ExperimentConfig) -> Option<ExperimentConfig> {
        if c.d > self.max_dim {
            return None;
        }
        c.width = c.width.min(self.max_width);
        if c.problem != ProblemKind::Heat {
            c.n_s = (c.n_s / self.mc_divisor).max(1);
            c.oracle.n_samples = (c.oracle.n_samples / self.mc_divisor).max(1);
            c.oracle.noise = self.oracle_noise;
            c.n_test = c.n_test.min(self.max_mc_test);
        }
        Some(c)
    }
}

const HEAT_DIMS: [usize; 5] = [5, 10, 20, 50, 100];
const HEAT_WIDTHS: [usize; 3] = [800, 1600, 3200];
const BS_DIMS: [usize; 6] = [1, 2, 10, 20, 50, 100];
const HESTON_DIMS: [usize; 6] = [2, 4, 10, 30, 50, 100];

/// Full-scale rows of a table, in grid order.
pub fn full_rows(table: TableId) -> Vec<ExperimentConfig> {
    let grid: Vec<(ProblemKind, usize, Option<usize>, Activation)> = match table {
        TableId::T1 | TableId::T2 => {
            let act = if table == TableId::T1 {
                Activation::Tanh
            } else {
                Activation::Sigmoid
            };
            HEAT_DIMS
                .iter()
                .flat_map(|&d| {
                    HEAT_WIDTHS
                        .iter()
                        .map(move |&n| (ProblemKind::Heat, d, Some(n), act))
                })
                .collect()
        }
        TableId::T3 | TableId::T4 => {
            let act = if table == TableId::T3 {
                Activation::Tanh
            } else {
                Activation::Sigmoid
            };
            BS_DIMS
                .iter()
                .map(|&d| (ProblemKind::BlackScholes, d, None, act))
                .collect()
        }
        TableId::T5 => HESTON_DIMS
            .iter()
            .map(|&d| (ProblemKind::Heston, d, None, Activation::Tanh))
            .collect(),
    };
    grid.into_iter()
        .enumerate()
        .map(|(i, (problem, d, width, activation))| {
            let base = defaults_for(problem, d);
            ExperimentConfig {
                width: width.unwrap_or(base.width),
                activation,
                seeds: SeedBundle::for_index(i as u64),
                ..base
            }
        })
        .collect()
}

/// Rows of `table` at `scale`, each paired with its index in the full
/// table. Desk scale drops, caps and deduplicates.
pub fn table_rows(table: TableId, scale: Scale) -> Vec<(usize, ExperimentConfig)> {
    let rows = full_rows(table).into_iter().enumerate();
    match scale {
        Scale::Full => rows.collect(),
        Scale::Desk => {
            let mut out: Vec<(usize, ExperimentConfig)> = Vec::new();
            for (i, c) in rows {
                let Some(c) = DESK.apply(c) else { continue };
                let duplicate = out.iter().any(|(_, o)| {
                    (o.problem, o.d, o.width, o.activation)
                        == (c.problem, c.d, c.width, c.activation)
                });
                if !duplicate {
                    out.push((i, c));
                }
            }
            out
        }
    }
}

/// Runs every row in order. A failing row becomes an error row.
pub fn reproduce_table(
    table: TableId,
    scale: Scale,
    mut on_row: impl FnMut(&CsvRow),
) -> Vec<CsvRow> {
    let label = table.to_string();
    table_rows(table, scale)
        .into_iter()
        .map(|(i, config)| {
            let row = match run_labelled(&config, &label, i) {
                Ok(run) => run.row,
                Err(e) => CsvRow::failed(&config, &label, i, &e),
            };
            on_row(&row);
            row
        })
        .collect()
}
