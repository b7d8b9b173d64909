//! `bciwall`: filter recordings, measure their SNR-wall, run studies and
//! check the detector maths by simulation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bciwall::io::{Column, ColumnMap, Units};
use bciwall::{DomainMode, Scenario};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bciwall", version, about = "SNR-wall analysis of EEG recordings")]
struct Cli {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct Overrides {
    /// Sliding-window length in seconds.
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Power lost by a narrowband filter in frequency mode.
    #[arg(long, global = true)]
    reduction_fraction: Option<f64>,
    /// Seconds dropped from the start of each filtered recording.
    #[arg(long, global = true)]
    discard: Option<f64>,
    #[arg(long, global = true, value_enum)]
    domain_mode: Option<ModeArg>,
    #[arg(long, global = true)]
    dc_cutoff: Option<f64>,
    #[arg(long, global = true)]
    notch_center: Option<f64>,
    #[arg(long, global = true)]
    notch_bandwidth: Option<f64>,
    /// Comma-separated scenario tags, e.g. `A,D`.
    #[arg(long, global = true, value_delimiter = ',')]
    scenarios: Option<Vec<Scenario>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Time,
    Frequency,
}

impl From<ModeArg> for DomainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Time => DomainMode::Time,
            ModeArg::Frequency => DomainMode::Frequency,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitsArg {
    Volts,
    Microvolts,
}

/// Where to find the samples in a delimited file.
#[derive(Debug, Args)]
struct InputArgs {
    /// CSV or TSV recording.
    file: PathBuf,
    /// Sample column, by zero-based index or header name.
    #[arg(long, default_value = "1")]
    column: String,
    #[arg(long, default_value_t = 250.0)]
    sample_rate: f64,
    #[arg(long, value_enum, default_value = "volts")]
    units: UnitsArg,
}

impl InputArgs {
    fn column_map(&self) -> ColumnMap {
        ColumnMap {
            sample: parse_column(&self.column),
            ..ColumnMap::default()
        }
    }

    fn units(&self) -> Units {
        match self.units {
            UnitsArg::Volts => Units::Volts,
            UnitsArg::Microvolts => Units::Microvolts,
        }
    }
}

fn parse_column(s: &str) -> Column {
    s.parse().map_or_else(|_| Column::Name(s.to_string()), Column::Index)
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario's filter chain over a recording and write the result.
    Filter {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        scenario: Scenario,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the noise profile and SNR-wall of a recording.
    Wall {
        #[command(flatten)]
        input: InputArgs,
        /// Filter with this scenario first (and drop the discard span).
        #[arg(long)]
        scenario: Option<Scenario>,
    },
    /// Full verdict for one recording against a P300 reference.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        /// Stimulus recording holding the P300 responses.
        #[arg(long)]
        reference: PathBuf,
        /// Reference sample column.
        #[arg(long, default_value = "1")]
        reference_column: String,
        /// Reference trigger column.
        #[arg(long, default_value = "3")]
        trigger_column: String,
        /// Trigger indices in a separate file instead of a trigger column.
        #[arg(long)]
        trigger_file: Option<PathBuf>,
        /// Also write the results as CSV (plus companion JSON).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Analyse every recording of a manifest under every scenario.
    Study {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for results.csv, results.json, summaries.csv and chart.svg.
        #[arg(long, default_value = "bciwall-out")]
        out_dir: PathBuf,
    },
    /// Compare the detection formulas against Monte Carlo rates.
    Simulate {
        /// Trials per hypothesis.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // usage errors exit with 2, help and version with 0
        Err(e) => e.exit(),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
