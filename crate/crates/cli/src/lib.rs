//! Experiment runner for randomized-feature PDE solvers: single runs,
//! table reproduction and width studies, all reported as CSV.

pub mod config;
pub mod error;
pub mod rates;
pub mod run;
pub mod table;

pub use config::{defaults_for, parse_config, ConfigFile, ExperimentConfig, ProblemKind};
pub use error::{CliError, ConfigError};
pub use rates::run_rates;
pub use run::{run_experiment, write_csv, CsvRow, ExperimentRun};
pub use table::{reproduce_table, table_rows, Scale, TableId};

/// Thread cap read from `PIELM_THREADS`.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("PIELM_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Sizes the rayon pool and the dense kernels. Call once, before any work.
pub fn configure_threads(threads: Option<usize>) {
    let n = threads.unwrap_or_else(rayon::current_num_threads);
    if threads.is_some() {
        // A pool may already exist; the dense kernels are capped regardless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    pielm::lstsq::set_dense_threads(n);
}
