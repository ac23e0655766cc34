use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pielm_cli::config::SeedSection;
use pielm_cli::rates::{write_rates, DEFAULT_WIDTHS};
use pielm_cli::{
    configure_threads, parse_config, reproduce_table, run_experiment, run_rates, threads_from_env,
    write_csv, CliError, ConfigFile, CsvRow, ExperimentConfig, Scale, TableId,
};

#[derive(Parser)]
#[command(
    name = "pielm",
    version,
    about = "Randomized-feature PDE solver experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration (once per repeat).
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in experiment grid.
    Table {
        #[arg(value_parser = clap::value_parser!(TableId))]
        table: TableId,
        #[arg(long, default_value = "desk", value_parser = clap::value_parser!(Scale))]
        scale: Scale,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error against width, with a fitted log-log slope.
    Rates {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed_weights: Option<u64>,
    #[arg(long)]
    seed_collocation: Option<u64>,
    #[arg(long)]
    seed_boundary_mc: Option<u64>,
    #[arg(long)]
    seed_test: Option<u64>,
    #[arg(long)]
    seed_oracle: Option<u64>,
}

impl ConfigArgs {
    fn overrides(&self) -> ConfigFile {
        let mut f = ConfigFile {
            problem: self.problem.clone(),
            d: self.dim,
            width: self.width,
            activation: self.activation.clone(),
            backend: self.backend.clone(),
            n_test: self.n_test,
            repeats: self.repeats,
            seeds: SeedSection {
                weights: self.seed_weights,
                collocation: self.seed_collocation,
                boundary_mc: self.seed_boundary_mc,
                test: self.seed_test,
                oracle: self.seed_oracle,
            },
            ..Default::default()
        };
        f.solver.method = self.solver.clone();
        f
    }

    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let config = parse_config(self.config.as_deref(), &self.overrides())?;
        eprintln!("# effective config\n{}", config.to_toml());
        Ok(config)
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn log_row(row: &CsvRow) {
    match row.relative_l2 {
        Some(e) => eprintln!(
            "{} row {}: {} d={} N={} {} relative L2 {e:.3e} in {} s",
            row.table, row.row, row.problem, row.d, row.width, row.activation, row.wall_time
        ),
        None => eprintln!("{} row {}: {}", row.table, row.row, row.status),
    }
}

fn execute(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Run { config, out } => {
            let config = config.resolve()?;
            let mut rows = Vec::with_capacity(config.repeats);
            for r in 0..config.repeats {
                let run = ExperimentConfig {
                    seeds: config.seeds.offset(r as u64),
                    ..config.clone()
                };
                let mut row = run_experiment(&run)?.row;
                row.row = r;
                log_row(&row);
                rows.push(row);
            }
            write_csv(output(out.as_deref())?, &rows)?;
            Ok(true)
        }
        Command::Table { table, scale, out } => {
            let rows = reproduce_table(table, scale, log_row);
            write_csv(output(out.as_deref())?, &rows)?;
            Ok(rows.iter().all(|r| r.status == "ok"))
        }
        Command::Rates {
            config,
            widths,
            out,
        } => {
            let config = config.resolve()?;
            let widths = widths.unwrap_or_else(|| DEFAULT_WIDTHS.to_vec());
            let table = run_rates(&config, &widths)?;
            for row in &table.rows {
                eprintln!(
                    "N={} median {:.3e} iqr {:.3e}",
                    row.width, row.median, row.iqr
                );
            }
            match table.slope {
                Some(s) => eprintln!("slope {s:.4}"),
                None => eprintln!("slope undefined"),
            }
            write_rates(output(out.as_deref())?, &config, &table)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(threads_from_env());
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some rows failed");
            ExitCode::FAILURE
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
