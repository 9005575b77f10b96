use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctqo::config::Mode;
use ctqo::{campaign, CampaignConfig, CliError, Experiment};

#[derive(Parser)]
#[command(
    name = "ctqo",
    version,
    about = "Run and verify quantum optimisation campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the campaign seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Force dense ensemble bookkeeping for rqa/bqa.
        #[arg(long, conflicts_with = "sampled")]
        dense: bool,
        /// Force per-shot sampling for rqa/bqa.
        #[arg(long)]
        sampled: bool,
    },
    /// Check a campaign directory (or its manifest.json).
    Verify { target: PathBuf },
    /// List the experiments and what they produce.
    ListExperiments,
    /// Print an example config.
    PrintSchema { experiment: Option<String> },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
            dense,
            sampled,
        } => {
            let mut cfg = CampaignConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.problem.seed = s;
            }
            if dense || sampled {
                let p = cfg.protocol.as_mut().ok_or_else(|| {
                    CliError::Config("--dense/--sampled apply only to rqa and bqa".into())
                })?;
                p.mode = if dense { Mode::Dense } else { Mode::Sampled };
            }
            if jobs == Some(0) {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            let out = out.or_else(|| cfg.output.take()).ok_or_else(|| {
                CliError::Config("no output directory: pass --out or set `output`".into())
            })?;
            cfg.output = None;
            let m = campaign::run(&cfg, &out, jobs)?;
            println!(
                "{}: {} instance(s), {} file(s) in {}",
                m.experiment,
                m.instance_seeds.len(),
                m.files.len() + 1,
                out.display()
            );
        }
        Command::Verify { target } => {
            let m = campaign::verify(&target)?;
            println!("ok: {} file(s) match {}", m.files.len(), campaign::MANIFEST);
        }
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<12} {}", e.name(), e.describe());
            }
        }
        Command::PrintSchema { experiment } => {
            let exps = match experiment {
                None => Experiment::ALL.to_vec(),
                Some(name) => vec![Experiment::parse(&name)
                    .ok_or_else(|| CliError::Config(format!("unknown experiment `{name}`")))?],
            };
            for (k, e) in exps.into_iter().enumerate() {
                if k > 0 {
                    println!();
                }
                println!("# --- {} ---", e.name());
                print!("{}", CampaignConfig::example(e).to_toml());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
