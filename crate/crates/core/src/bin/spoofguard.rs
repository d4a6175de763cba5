use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use spoofguard::attack::AttackedScenario;
use spoofguard::detect::{run_algorithm, Algorithm};
use spoofguard::harness::{
    attack_scenario, build_clean, csv_string, initial_partition, run_sweep, ExperimentConfig, Point,
};
use spoofguard::sdr::{assemble, check_feasibility, FeasibilityProblem};
use spoofguard::{Error, Result};

/// Position-spoofing detection for UAV swarms.
#[derive(Parser)]
#[command(name = "spoofguard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an attack-free swarm with noisy measurements.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Inject the configured attack into a swarm, generated when no input is given.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Clean scenario from `generate`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run one detector on a scenario, generated and attacked when no input is given.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algo: Algorithm,
        /// Attacked scenario from `attack`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte-Carlo sweep; writes the metrics CSV and a companion `.dat` plot file.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Named sweep used instead of `--config`.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Comma-separated algorithms; overrides the config.
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<Algorithm>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Solve one feasibility problem.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// A feasibility problem, or a scenario together with `--subnet`.
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated UAV ids to test; the whole swarm when absent.
        #[arg(long, value_delimiter = ',')]
        subnet: Option<Vec<usize>>,
        /// Print the assembled constraint matrices instead of solving.
        #[arg(long)]
        dump: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    Ok(cfg)
}

/// Single-scenario commands use the first point of whatever the config sweeps.
fn first_point(cfg: &ExperimentConfig) -> Result<Point> {
    cfg.validate()?;
    Ok(cfg.points()?.remove(0))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: out.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    })?;
    text.push('\n');
    emit(out, &text)
}

fn attacked(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<AttackedScenario> {
    let point = first_point(cfg)?;
    let clean = match input {
        Some(path) => read_json(path)?,
        None => build_clean(&point, cfg.cube_half_width, cfg.base_seed)?,
    };
    let offset = cfg.fake_offset_min.unwrap_or(clean.comm_range());
    attack_scenario(&clean, cfg.attack_kind, point.m, offset, &point.noise(), cfg.base_seed)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => {
            let cfg = load_config(&common)?;
            let scenario = build_clean(&first_point(&cfg)?, cfg.cube_half_width, cfg.base_seed)?;
            emit_json(common.out.as_deref(), &scenario)
        }
        Command::Attack { common, input } => {
            let cfg = load_config(&common)?;
            let scenario = attacked(&cfg, input.as_deref())?;
            emit_json(common.out.as_deref(), &scenario)
        }
        Command::Detect { common, algo, input } => {
            let cfg = load_config(&common)?;
            let scenario = match &input {
                Some(path) => read_json::<AttackedScenario>(path)?,
                None => attacked(&cfg, None)?,
            };
            scenario.validate()?;
            let initial = initial_partition(&scenario, &cfg.detector)?;
            let result = run_algorithm(algo, &scenario, &initial, &cfg.detector, cfg.base_seed)?;
            emit_json(common.out.as_deref(), &result)
        }
        Command::Sweep {
            common,
            preset,
            algo,
            trials,
        } => {
            let mut cfg = match &preset {
                Some(name) => ExperimentConfig::preset(name)?,
                None => load_config(&common)?,
            };
            if let Some(seed) = common.seed {
                cfg.base_seed = seed;
            }
            if let Some(algos) = algo {
                cfg.algorithms = algos;
            }
            if let Some(t) = trials {
                cfg.trials_per_point = t;
            }
            if common.out.is_some() {
                cfg.output_path = common.out.clone();
            }
            let out = run_sweep(&cfg)?;
            // with an output path, run_sweep has already written the CSV and plot data
            if cfg.output_path.is_none() {
                emit(None, &csv_string(&out.rows)?)?;
            }
            Ok(())
        }
        Command::OracleCheck {
            common,
            input,
            subnet,
            dump,
        } => {
            let cfg = load_config(&common)?;
            let problem = match read_json::<FeasibilityProblem>(&input) {
                Ok(p) if subnet.is_none() => p,
                _ => {
                    let scenario: AttackedScenario = read_json(&input)?;
                    scenario.validate()?;
                    let ids: BTreeSet<usize> = match subnet {
                        Some(ids) => ids.into_iter().collect(),
                        None => (0..scenario.n()).collect(),
                    };
                    assemble(&ids, &scenario, &cfg.detector.problem)?
                }
            };
            if dump {
                emit_json(common.out.as_deref(), &problem.dump())
            } else {
                emit_json(common.out.as_deref(), &check_feasibility(&problem, &cfg.detector.oracle)?)
            }
        }
    }
}
