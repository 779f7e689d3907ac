//! `ris-sim`: command-line front end for the experiment harness.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ris_opt::harness::{profile, run_experiment, ExperimentConfig, ExperimentKind, Method};

#[derive(Parser)]
#[command(
    name = "ris-sim",
    about = "RIS phase-shift optimization: training runs, sweeps, and baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML experiment config; fields present in the file override the profile.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Preset scale: tiny | small | paper.
    #[arg(long, default_value = "small")]
    profile: String,

    /// Comma-separated RNG seeds, one run per seed.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,

    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Record real wall-clock time in summaries (breaks byte-reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train or evaluate a single method.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// flat | random | ddqn | ddqn-ga | dqn-enum | ddqn-enum | pso
        #[arg(long, default_value = "ddqn-ga")]
        method: String,
    },
    /// Sweep the number of accumulation steps per episode.
    SweepSteps {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated step counts.
        #[arg(long, value_delimiter = ',')]
        steps: Vec<usize>,
        #[arg(long, default_value = "ddqn-ga")]
        method: String,
    },
    /// Sweep the surface side length (N = side^2).
    SweepSize {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated side lengths.
        #[arg(long, value_delimiter = ',')]
        sides: Vec<usize>,
        #[arg(long, default_value = "ddqn-ga")]
        method: String,
    },
    /// Run several methods on the same channel realizations.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
    /// Tabulate exact action-space sizes of the control schemes.
    ActionSpace {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated side lengths.
        #[arg(long, value_delimiter = ',')]
        sides: Vec<usize>,
        /// Comma-separated phase resolutions in bits.
        #[arg(long, value_delimiter = ',')]
        bits: Vec<u32>,
    },
    /// Compare methods against the exhaustive optimum on a small instance.
    OracleCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
}

/// Base config from profile, then file fields layered on top, then CLI flags.
fn resolve(common: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let base = profile(&common.profile)?;
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file_val: toml::Value = toml::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let base_val = toml::Value::try_from(&base).context("serializing profile")?;
            let merged = merge_toml(base_val, file_val);
            merged
                .try_into()
                .with_context(|| format!("interpreting {}", path.display()))?
        }
        None => base,
    };
    if !common.seed.is_empty() {
        cfg.seeds = common.seed.clone();
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if common.timing {
        cfg.timing = true;
    }
    Ok(cfg)
}

/// Recursive table merge: values from `over` win, tables merge key-wise.
fn merge_toml(base: toml::Value, over: toml::Value) -> toml::Value {
    match (base, over) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(existing) => merge_toml(existing, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, over) => over,
    }
}

fn parse_methods(names: &[String], default: &[Method]) -> anyhow::Result<Vec<Method>> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names
        .iter()
        .map(|n| Method::parse(n).map_err(Into::into))
        .collect()
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();

    let cfg = match &cli.command {
        Command::Run { common, method } => {
            let mut cfg = resolve(common)?;
            cfg.kind = ExperimentKind::SingleRun;
            cfg.methods = vec![Method::parse(method)?];
            cfg
        }
        Command::SweepSteps {
            common,
            steps,
            method,
        } => {
            let mut cfg = resolve(common)?;
            cfg.kind = ExperimentKind::SweepSteps;
            cfg.methods = vec![Method::parse(method)?];
            if !steps.is_empty() {
                cfg.steps_list = steps.clone();
            }
            cfg
        }
        Command::SweepSize {
            common,
            sides,
            method,
        } => {
            let mut cfg = resolve(common)?;
            cfg.kind = ExperimentKind::SweepSize;
            cfg.methods = vec![Method::parse(method)?];
            if !sides.is_empty() {
                cfg.sides_list = sides.clone();
            }
            cfg
        }
        Command::Compare { common, methods } => {
            let mut cfg = resolve(common)?;
            cfg.kind = ExperimentKind::Compare;
            cfg.methods = parse_methods(
                methods,
                &[
                    Method::Flat,
                    Method::Random,
                    Method::Pso,
                    Method::Ddqn,
                    Method::DdqnGa,
                ],
            )?;
            cfg
        }
        Command::ActionSpace {
            common,
            sides,
            bits,
        } => {
            let mut cfg = resolve(common)?;
            cfg.kind = ExperimentKind::ActionSpace;
            if !sides.is_empty() {
                cfg.space_sides = sides.clone();
            }
            if !bits.is_empty() {
                cfg.space_bits = bits.clone();
            }
            cfg
        }
        Command::OracleCheck { common, methods } => {
            let mut cfg = resolve(common)?;
            cfg.kind = ExperimentKind::OracleCheck;
            cfg.methods =
                parse_methods(methods, &[Method::Flat, Method::Random, Method::Pso])?;
            let bits = cfg.system.n_elements as u32 * cfg.system.resolution_bits;
            if bits > 20 {
                bail!(
                    "oracle-check needs N * resolution_bits <= 20, got {bits}; \
                     use --profile tiny or a smaller surface"
                );
            }
            cfg
        }
    };

    let written = run_experiment(&cfg)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
