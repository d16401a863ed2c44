use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use v2v_core::dqn::Checkpoint;
use v2v_core::harness::{self, PolicyKind, PolicySpec};
use v2v_core::{Error, Mode, Result, RunConfig};

#[derive(Parser)]
#[command(name = "v2v", version, about = "V2V spectrum sharing simulator with deep Q-learning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured mode.
    #[arg(long)]
    mode: Option<Mode>,
    /// Overrides the configured vehicle count.
    #[arg(long)]
    vehicles: Option<usize>,
    /// Overrides the training seed.
    #[arg(long)]
    train_seed: Option<u64>,
    /// Overrides the first evaluation seed.
    #[arg(long)]
    eval_seed_base: Option<u64>,
    /// Overrides the number of evaluation seeds.
    #[arg(long)]
    eval_seeds: Option<usize>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Q-network; writes checkpoint.bin and training_curve.csv.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Evaluate a policy and write a JSON report.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dqn")]
        policy: PolicyKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate several policies over several vehicle counts.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "dqn,random")]
        policies: Vec<PolicyKind>,
        #[arg(long = "counts", value_delimiter = ',', default_value = "10,20,30,40")]
        counts: Vec<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Print the default configuration for a mode.
    DumpConfig {
        #[arg(long, default_value = "unicast")]
        mode: Mode,
    },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::for_mode(c.mode.unwrap_or(Mode::Unicast)),
    };
    if let Some(m) = c.mode {
        cfg.mode = m;
    }
    if let Some(n) = c.vehicles {
        cfg.n_vehicles = n;
    }
    if let Some(s) = c.train_seed {
        cfg.train.seed = s;
    }
    if let Some(s) = c.eval_seed_base {
        cfg.eval.seed_base = s;
    }
    if let Some(n) = c.eval_seeds {
        cfg.eval.n_seeds = n;
    }
    let eval = cfg.eval.seed_base..cfg.eval.seed_base + cfg.eval.n_seeds as u64;
    if eval.contains(&cfg.train.seed) {
        return Err(Error::Config(format!(
            "training seed {} lies in the evaluation seed range {eval:?}",
            cfg.train.seed
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn policy_spec(kind: PolicyKind, checkpoint: Option<&Path>) -> Result<PolicySpec> {
    match kind {
        PolicyKind::Dqn => {
            let path = checkpoint.ok_or_else(|| Error::InvalidArgument("--checkpoint is required for dqn".into()))?;
            Ok(PolicySpec::Dqn(Checkpoint::load(path)?.network))
        }
        other => PolicySpec::baseline(other),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DumpConfig { mode } => {
            print!("{}", RunConfig::for_mode(mode).to_toml_string()?);
        }
        Command::Train { common, episodes, out } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = episodes {
                cfg.train.episodes = e;
            }
            if common.dump_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(());
            }
            let outcome = harness::train(&cfg)?;
            harness::write_outputs(&out, &outcome)?;
            let path = out.join("config.toml");
            std::fs::write(&path, cfg.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
            info!("wrote {}", out.display());
        }
        Command::Eval { common, policy, checkpoint, out } => {
            let cfg = load_config(&common)?;
            if common.dump_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(());
            }
            let spec = policy_spec(policy, checkpoint.as_deref())?;
            let report = harness::evaluate(&cfg, &spec)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(&p, json).map_err(|e| Error::io(&p, e))?,
                None => println!("{json}"),
            }
        }
        Command::Sweep { common, policies, counts, checkpoint, out } => {
            let cfg = load_config(&common)?;
            if common.dump_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(());
            }
            let specs = policies
                .iter()
                .map(|&k| policy_spec(k, checkpoint.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let cells = harness::sweep(&cfg, &counts, &specs)?;
            harness::write_sweep(&out, &cells)?;
            let failed = cells.iter().filter(|c| c.result.is_err()).count();
            info!("{} cells, {failed} failed; wrote {}", cells.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
