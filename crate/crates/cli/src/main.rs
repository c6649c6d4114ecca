//! `decoy`: bounds tables, oracle solves and learning experiments as CSV.

mod experiments;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decoy_core::model::draw_channels;
use decoy_core::oracle::{brute_force, solve_full};
use decoy_core::rng::{stream, Lane};
use decoy_core::{ChannelState, ScenarioConfig};

use crate::output::Output;

#[derive(Parser)]
#[command(name = "decoy", version, about = "Victim-channel deception against a reactive jammer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic tables: minimum cap (fig3), bound ratios (fig4), ratio vs cap (fig5)
    Bounds {
        /// User counts, `a..b` inclusive or a single value
        #[arg(long, default_value = "1..5")]
        n: String,
        /// Channel counts, `a..b` inclusive or a single value
        #[arg(long, default_value = "3..14")]
        l: String,
        /// User counts of the cap sweep (comma list of ranges)
        #[arg(long, default_value = "1..3")]
        sweep_n: String,
        /// Channel counts of the cap sweep
        #[arg(long, default_value = "4,6,8")]
        sweep_l: String,
        /// Channel draws per point of the cap sweep
        #[arg(long, default_value_t = 200)]
        draws: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Full-knowledge optimum for one channel realisation
    Solve {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        /// Every gain equal to one
        #[arg(long)]
        symmetric: bool,
        /// Draw the channels from this seed
        #[arg(long)]
        seed: Option<u64>,
        /// Channel CSV (`user,channel,h_c,h_j`)
        #[arg(long)]
        channels: Option<PathBuf>,
        /// Compare against brute force
        #[arg(long)]
        verify: bool,
        /// Brute-force power step
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run a registered learning experiment over several seeds
    Simulate {
        experiment: String,
        #[arg(long)]
        seeds: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Registered experiments
    List,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
    Failed(String),
}

impl From<decoy_core::Error> for CliError {
    fn from(e: decoy_core::Error) -> Self {
        match e {
            decoy_core::Error::Config(m) => CliError::Usage(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

/// Defaults, then the config file, then `--set` pairs.
fn resolve(common: &Common, preset: &[(&str, String)]) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_kv_text(&text)?;
    }
    for (k, v) in preset {
        cfg.set(k, v)?;
    }
    for pair in &common.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got {pair}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

pub fn parse_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("bad range {text}"));
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (text, text),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for e in experiments::REGISTRY {
                println!("{}\tfigure {}\t{}\t{}", e.name, e.figure, e.scenario.label(), e.about);
            }
            Ok(())
        }
        Command::Bounds {
            n,
            l,
            sweep_n,
            sweep_l,
            draws,
            common,
        } => {
            let ns = parse_range(&n)?;
            let ls = parse_range(&l)?;
            let cfg = resolve(&common, &[])?;
            cfg.validate()?;
            let out = Output::new(
                &common.out,
                &cfg,
                &[
                    ("command", "bounds".into()),
                    ("n", n),
                    ("l", l),
                    ("sweep_n", sweep_n.clone()),
                    ("sweep_l", sweep_l.clone()),
                    ("draws", draws.to_string()),
                ],
            )?;
            let sweep = experiments::SweepArgs {
                n: sweep_n,
                l: sweep_l,
                draws,
            };
            pool(common.jobs)?.install(|| experiments::bounds(&cfg, &ns, &ls, &sweep, &out))
        }
        Command::Solve {
            n,
            l,
            symmetric,
            seed,
            channels,
            verify,
            step,
            common,
        } => {
            let mut preset = Vec::new();
            if let Some(n) = n {
                preset.push(("n_users", n.to_string()));
            }
            if let Some(l) = l {
                preset.push(("n_channels", l.to_string()));
            }
            if let Some(s) = seed {
                preset.push(("seed", s.to_string()));
            }
            let mut cfg = resolve(&common, &preset)?;
            let ch = if let Some(path) = channels {
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                let ch = ChannelState::from_csv(&text)?;
                cfg.n_users = ch.n_users();
                cfg.n_channels = ch.n_channels();
                ch
            } else if symmetric {
                ChannelState::uniform(cfg.n_users, cfg.n_channels, 1.0)
            } else if seed.is_some() {
                draw_channels(&cfg, &mut stream(cfg.seed, 0, Lane::Channels))
            } else {
                return Err(CliError::Usage("solve needs --symmetric, --seed or --channels".into()));
            };
            cfg.validate()?;
            let res = solve_full(&ch, &cfg)?;
            print!("{}", res.to_csv());
            let sensed = decoy_core::model::sensed_spectrum(&res.allocation, &ch);
            let loudest_comm = res
                .allocation
                .comm
                .iter()
                .map(|&c| sensed[c])
                .fold(0.0, f64::max);
            println!("# deception_margin={}", decoy_core::csvfmt::g9(sensed[res.allocation.victim] - loudest_comm));
            if verify {
                let bf = brute_force(&ch, &cfg, step)?;
                let max_gain = (0..ch.n_users())
                    .flat_map(|i| (0..ch.n_channels()).map(move |c| (i, c)))
                    .map(|(i, c)| ch.hc2(i, c))
                    .fold(0.0, f64::max);
                let bound = ch.n_users() as f64 * step * max_gain;
                let gap = bf.trp() - res.trp();
                println!(
                    "# brute_force_trp={} gap={} bound={} within_bound={}",
                    decoy_core::csvfmt::g9(bf.trp()),
                    decoy_core::csvfmt::g9(gap),
                    decoy_core::csvfmt::g9(bound),
                    gap <= bound
                );
            }
            if !res.feasible {
                return Err(CliError::Infeasible(
                    "no allocation within the cap deceives the jammer".into(),
                ));
            }
            Ok(())
        }
        Command::Simulate {
            experiment,
            seeds,
            common,
        } => {
            let spec = experiments::find(&experiment)
                .ok_or_else(|| CliError::Usage(format!("unknown experiment {experiment}; see `decoy list`")))?;
            if spec.scenario == experiments::Kind::BoundsOnly {
                return Err(CliError::Usage(format!("{experiment} is produced by `decoy bounds`")));
            }
            let cfg = resolve(&common, &spec.overrides())?;
            cfg.validate()?;
            let seeds = seeds.unwrap_or(spec.n_seeds);
            let out = Output::new(&common.out, &cfg, &[("experiment", experiment.clone()), ("seeds", seeds.to_string())])?;
            pool(common.jobs)?.install(|| experiments::simulate(spec, &cfg, seeds, &out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Infeasible(m)) => {
            eprintln!("infeasible: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(1)
        }
    }
}
