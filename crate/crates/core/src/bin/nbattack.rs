//! `nbattack`: command-line front end of the attack pipeline.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 training divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neighborhood_attack::config::{List, RunConfig};
use neighborhood_attack::pipeline::{self, resolve_out_dir};
use neighborhood_attack::Error;

#[derive(Parser, Debug)]
#[command(name = "nbattack", version, about = "Neighborhood-distortion edge attacks on GNNs")]
struct Cli {
    /// `key = value` configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable), e.g. `--set seed=3`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory; takes precedence over NBATTACK_OUT_DIR and `out_dir`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the configured SBM and write it as plain-text files.
    GenSbm,
    /// Train the unsupervised embedder.
    TrainEmbed,
    /// Train the Q-network attacker against the stored embedder.
    TrainAttack,
    /// Attack the given targets with the stored attacker.
    Attack {
        /// Comma-separated target node ids.
        #[arg(long, value_parser = parse_list)]
        targets: List<usize>,
        #[arg(long)]
        budget: usize,
    },
    /// Benchmark attackers against freshly trained victims.
    Evaluate,
    /// Correlate node and community properties with distortion.
    Analyze,
    /// Compare the greedy oracle with the stored attacker.
    Oracle,
}

fn parse_list(s: &str) -> Result<List<usize>, String> {
    s.parse()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Training(_) => 4,
        _ => 3,
    }
}

fn run(cli: Cli) -> neighborhood_attack::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    let out = cli.out.clone().unwrap_or_else(|| resolve_out_dir(&cfg));
    if cli.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    match cli.command {
        Command::GenSbm => {
            let g = pipeline::cmd_gen_sbm(&cfg, &out)?;
            println!("wrote {} nodes, {} edges to {}", g.node_count(), g.edge_count(), out.join("graph").display());
        }
        Command::TrainEmbed => {
            let t = pipeline::cmd_train_embed(&cfg, &out)?;
            println!("embedder trained for {} epochs; final loss {:?}", t.losses.len(), t.losses.last());
        }
        Command::TrainAttack => {
            let t = pipeline::cmd_train_attack(&cfg, &out)?;
            println!("attacker trained for {} episodes ({} updates)", t.episode_rewards.len(), t.losses.len());
        }
        Command::Attack { targets, budget } => {
            let a = pipeline::cmd_attack(&cfg, &out, &targets.0, budget)?;
            for t in &a.targets {
                let edits: Vec<String> = t.edits.iter().map(ToString::to_string).collect();
                println!("{}: {}", t.target, edits.join(" "));
            }
        }
        Command::Evaluate => {
            let o = pipeline::cmd_evaluate(&cfg, &out)?;
            for c in &o.report.cells {
                let da = c.drop_in_accuracy.map_or("undefined".to_string(), |d| format!("{d:.2}%"));
                println!("{:>8} {:>10} B={:<3} acc {:.3} -> {:.3}  DA {da}", c.attacker, c.victim, c.budget, c.original_accuracy, c.attacked_accuracy);
            }
        }
        Command::Analyze => {
            for r in pipeline::cmd_analyze(&cfg, &out)? {
                println!("{:<22} {:+.3} ± {:.3}  p={:.3e}  ({} targets)", r.property, r.mean_coefficient, r.std_coefficient, r.p_value, r.targets);
            }
        }
        Command::Oracle => {
            let (c, timings) = pipeline::cmd_oracle(&cfg, &out)?;
            let g: f64 = timings.iter().map(|t| t.greedy_seconds).sum();
            let d: f64 = timings.iter().map(|t| t.dqn_seconds).sum();
            println!(
                "greedy mean distortion {:.4}, dqn {:.4}; greedy >= dqn on {}/{} targets; time ratio {:.1}x",
                c.greedy_mean,
                c.dqn_mean,
                c.greedy_at_least_dqn,
                c.rows.len(),
                g / d.max(f64::MIN_POSITIVE)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nbattack: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
