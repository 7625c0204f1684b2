use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ote::bench::{self, ExperimentConfig};
use ote::simgen::{self, ScenarioSpec, SimConfig};
use ote::{Execution, OteError};

#[derive(Parser)]
#[command(name = "ote", version, about = "Optimal trees ensemble experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one simulated scenario data set as CSV.
    Simulate {
        #[arg(long)]
        scenario: usize,
        #[arg(long, default_value_t = 1)]
        variant: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        theta1: f64,
        #[arg(long, default_value_t = 15.0)]
        theta2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "y")]
        label_column: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run repeated-split experiments and write per-repetition results.
    Bench {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Repeat the experiment for several candidate-pool fractions.
    SweepM {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Comma-separated fractions of T kept after ranking.
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Every option here mirrors a key of the config file and overrides it.
#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    theta1: Option<String>,
    #[arg(long)]
    theta2: Option<String>,
    /// Comma-separated subset of ote, ote_oob, ote_sub, full_forest.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    split_fraction: Option<String>,
    #[arg(long)]
    repetitions: Option<String>,
    #[arg(long)]
    trees: Option<String>,
    #[arg(long)]
    top_fraction: Option<String>,
    #[arg(long)]
    validation_fraction: Option<String>,
    #[arg(long)]
    subsample_fraction: Option<String>,
    #[arg(long)]
    mtry: Option<String>,
    #[arg(long)]
    min_node_size: Option<String>,
    #[arg(long)]
    max_depth: Option<String>,
    #[arg(long)]
    min_impurity_decrease: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Append a wall_time_s column to the CSV.
    #[arg(long)]
    timing: bool,
}

impl ExperimentArgs {
    fn resolve(&self, execution: Execution) -> Result<ExperimentConfig, OteError> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| OteError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                bench::parse_key_values(&text)?
            }
            None => Vec::new(),
        };
        let flags = [
            ("csv", &self.csv),
            ("label_column", &self.label_column),
            ("positive_label", &self.positive_label),
            ("scenario", &self.scenario),
            ("variant", &self.variant),
            ("n", &self.n),
            ("theta1", &self.theta1),
            ("theta2", &self.theta2),
            ("methods", &self.methods),
            ("split_fraction", &self.split_fraction),
            ("repetitions", &self.repetitions),
            ("trees", &self.trees),
            ("top_fraction", &self.top_fraction),
            ("validation_fraction", &self.validation_fraction),
            ("subsample_fraction", &self.subsample_fraction),
            ("mtry", &self.mtry),
            ("min_node_size", &self.min_node_size),
            ("max_depth", &self.max_depth),
            ("min_impurity_decrease", &self.min_impurity_decrease),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                pairs.push((key.to_owned(), v.clone()));
            }
        }
        if self.timing {
            pairs.push(("timing".to_owned(), "true".to_owned()));
        }
        let mut config = ExperimentConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        config.execution = execution;
        Ok(config)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, OteError> {
    File::create(path).map(BufWriter::new).map_err(|e| OteError::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> OteError + '_ {
    move |e| OteError::Io {
        path: path.to_owned(),
        source: e,
    }
}

fn execute(command: Command, execution: Execution) -> Result<(), OteError> {
    match command {
        Command::Simulate {
            scenario,
            variant,
            n,
            theta1,
            theta2,
            seed,
            label_column,
            output,
        } => {
            let spec = ScenarioSpec::new(scenario, variant)?;
            let sim = SimConfig {
                n,
                theta1,
                theta2,
                seed,
                execution,
            };
            simgen::generate(&spec, &sim)?.write_csv(&output, &label_column)?;
            println!("wrote {n} rows to {}", output.display());
        }
        Command::Bench { experiment, output } => {
            let config = experiment.resolve(execution)?;
            let rows = bench::run(&config)?;
            let mut out = create(&output)?;
            bench::write_results_csv(&rows, &mut out, config.record_timing).map_err(io_err(&output))?;
            out.flush().map_err(io_err(&output))?;
            print!("{}", bench::format_summary(&bench::aggregate(&rows)?));
        }
        Command::SweepM {
            experiment,
            fractions,
            output,
        } => {
            let config = experiment.resolve(execution)?;
            let blocks = bench::sweep_m(&config, &fractions)?;
            let mut out = create(&output)?;
            for (i, block) in blocks.iter().enumerate() {
                let mut buf = Vec::new();
                bench::write_results_csv(&block.rows, &mut buf, config.record_timing).map_err(io_err(&output))?;
                let text = String::from_utf8(buf).expect("CSV output is UTF-8");
                for (j, line) in text.lines().enumerate() {
                    match j {
                        0 if i > 0 => continue,
                        0 => writeln!(out, "top_fraction,candidates,{line}"),
                        _ => writeln!(out, "{},{},{line}", block.top_fraction, block.candidates),
                    }
                    .map_err(io_err(&output))?;
                }
                let trees: Vec<usize> = block.rows.iter().map(|r| r.selected_tree_count).collect();
                println!(
                    "M fraction {} ({} candidates), selected trees min {} max {}",
                    block.top_fraction,
                    block.candidates,
                    trees.iter().min().copied().unwrap_or(0),
                    trees.iter().max().copied().unwrap_or(0),
                );
                print!("{}", bench::format_summary(&block.summary));
                println!();
            }
            out.flush().map_err(io_err(&output))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = with_threads(cli.threads, || execute(cli.command, execution));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Result<(), OteError> + Send) -> Result<(), OteError> {
    match threads {
        Some(0) => Err(OteError::InvalidParameter("threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| OteError::InvalidParameter(e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads(_threads: Option<usize>, f: impl FnOnce() -> Result<(), OteError>) -> Result<(), OteError> {
    f()
}
