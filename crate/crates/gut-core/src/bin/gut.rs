//! Command-line front end: run scenario batches, solve matrix games,
//! validate scenario files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gut_core::harness::{classify_scenario, load_scenario, run_batch, write_csv, ScenarioConfig};
use gut_core::matgame::{self, PayoffMatrix, SolutionKind};
use gut_core::world::policy::{GutSelection, InfoMode, MonsterPolicy, PolicyMode};

#[derive(Parser)]
#[command(name = "gut", about = "Game-theoretic utility tree decision engine and simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch of trials and write a CSV report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's team policy.
        #[arg(long, value_parser = parse_policy)]
        policy: Option<PolicyMode>,
        /// Override the scenario's tree selection rule.
        #[arg(long = "gut-mode", value_parser = parse_gut_mode)]
        gut_mode: Option<GutSelection>,
        /// Override the scenario's information mode.
        #[arg(long, value_parser = parse_info)]
        info: Option<InfoMode>,
        /// Override the scenario's monster policy.
        #[arg(long = "monster-policy", value_parser = parse_monster_policy)]
        monster_policy: Option<MonsterPolicy>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a zero-sum matrix game given as a JSON array of rows.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = matgame::DEFAULT_TOL)]
        tol: f64,
    },
    /// Check a scenario file and report its adversary classification.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn parse_policy(s: &str) -> Result<PolicyMode, String> {
    match s {
        "gut" => Ok(PolicyMode::Gut),
        "qmix" => Ok(PolicyMode::Qmix),
        "qmix-gut" => Ok(PolicyMode::QmixGut),
        _ => Err(format!("unknown policy `{s}` (expected gut|qmix|qmix-gut)")),
    }
}

fn parse_gut_mode(s: &str) -> Result<GutSelection, String> {
    match s {
        "greedy" => Ok(GutSelection::Greedy),
        "map" => Ok(GutSelection::Map),
        _ => Err(format!("unknown gut mode `{s}` (expected greedy|map)")),
    }
}

fn parse_info(s: &str) -> Result<InfoMode, String> {
    match s {
        "complete" => Ok(InfoMode::Complete),
        "linear" => Ok(InfoMode::Linear),
        "poly" => Ok(InfoMode::Poly),
        _ => Err(format!("unknown info mode `{s}` (expected complete|linear|poly)")),
    }
}

fn parse_monster_policy(s: &str) -> Result<MonsterPolicy, String> {
    match s {
        "nearest" => Ok(MonsterPolicy::Nearest),
        "qmix" => Ok(MonsterPolicy::Qmix),
        _ => Err(format!("unknown monster policy `{s}` (expected nearest|qmix)")),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { scenario, policy, gut_mode, info, monster_policy, trials, seed, out } => {
            let mut config: ScenarioConfig = load_scenario(&scenario).map_err(|e| e.to_string())?;
            if let Some(p) = policy {
                config.policy = p;
            }
            if let Some(g) = gut_mode {
                config.gut_mode = g;
            }
            if let Some(i) = info {
                config.info = i;
            }
            if let Some(m) = monster_policy {
                config.monster_policy = m;
            }
            let batch = run_batch(&config, trials, seed).map_err(|e| e.to_string())?;
            write_csv(&batch, &out).map_err(|e| e.to_string())?;
            println!(
                "{} trials, win rate {:.3}, mean system energy cost per win {:.3}, mean system hp cost per win {:.3}",
                batch.trials.len(),
                batch.win_rate,
                batch.mean_system_energy_cost_win,
                batch.mean_system_hp_cost_win,
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Solve { matrix, tol } => {
            let text = std::fs::read_to_string(&matrix).map_err(|e| e.to_string())?;
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(&text).map_err(|e| format!("matrix parse error: {e}"))?;
            let payoff = PayoffMatrix::from_rows(rows).map_err(|e| e.to_string())?;
            let solution = matgame::solve(&payoff, tol).map_err(|e| e.to_string())?;
            let kind = match solution.kind {
                SolutionKind::Pure => "pure",
                SolutionKind::Mixed => "mixed",
            };
            println!("kind: {kind}");
            println!("value: {:.6}", solution.value);
            let fmt =
                |v: &[f64]| v.iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>().join(" ");
            println!("row strategy: {}", fmt(&solution.row_strategy));
            println!("col strategy: {}", fmt(&solution.col_strategy));
            let e = matgame::exploitability(&payoff, &solution.row_strategy, &solution.col_strategy)
                .map_err(|e| e.to_string())?;
            println!("exploitability: {e:.3e}");
            Ok(())
        }
        Command::Validate { scenario } => {
            let config = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let (monsters, obstacles) = classify_scenario(&config).map_err(|e| e.to_string())?;
            println!(
                "ok: {} explorers vs {} monsters, policy {:?}",
                config.explorers, config.monsters, config.policy
            );
            if let Some(class) = monsters {
                println!("monster group: {class:?}");
            }
            if let Some(class) = obstacles {
                println!("obstacles: {class:?}");
            }
            Ok(())
        }
    }
}
