use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use stapu::baseline::{build_mamdp_from, solve_mamdp_with};
use stapu::logic::{compile, parse, Mission, MissionJson};
use stapu::mdp::{Mdp, ModelJson, SolverOptions};
use stapu::product::{ProductState, RobotModel};
use stapu::realloc::{run_with, Budget, JointPolicy};
use stapu::team::{solve_stapu_with, StapuOptions, TeamMdp};
use stapu::workbench::{bench_sweep, gen_map, simulate, write_csv, BenchConfig, MapSpec};
use stapu::{Error, Result};

/// Multi-robot task allocation and planning under robot failures.
#[derive(Parser)]
#[command(name = "stapu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a co-safe or safe LTL formula into a minimal DFA.
    Compile {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and solve the team model for the initial allocation.
    Solve {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        mission: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Break probability ties by expected cost.
        #[arg(long)]
        min_cost: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve, then reallocate at failure states; writes the joint policy.
    Realloc {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        mission: PathBuf,
        #[arg(long)]
        max_realloc: Option<usize>,
        /// Wall-clock budget for the reallocation loop.
        #[arg(long)]
        time_ms: Option<u64>,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the joint multi-agent model directly.
    Baseline {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        mission: PathBuf,
        #[arg(long, default_value_t = stapu::baseline::DEFAULT_CEILING)]
        ceiling: u128,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Monte Carlo rollouts of a joint policy.
    Simulate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a grid map with failure points and task atoms.
    Genmap {
        #[arg(long, default_value_t = 30)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        failpoints: usize,
        #[arg(long, default_value_t = 0.1)]
        pfail: f64,
        #[arg(long, default_value_t = 3)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark sweep and write one CSV row per cell.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load(models: &[PathBuf], mission: &Path) -> Result<Vec<RobotModel>> {
    let mission = Mission::from_json(&read_json::<MissionJson>(mission)?)?;
    let automata = Arc::new(mission.compile()?);
    models
        .iter()
        .map(|p| {
            let m = Mdp::from_json(&read_json::<ModelJson>(p)?)?;
            RobotModel::new(Arc::new(m), automata.clone())
        })
        .collect()
}

fn solver(epsilon: f64) -> Result<SolverOptions> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Mission(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(SolverOptions { epsilon, ..SolverOptions::default() })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Compile { formula, out } => {
            let f = parse(&formula)?;
            let dfa = compile(&f)?.minimize();
            write_json(&out, &dfa.to_json())?;
            println!("{} states", dfa.num_states());
        }
        Command::Solve { models, mission, epsilon, min_cost, out } => {
            let robots = load(&models, &mission)?;
            let entries: Vec<ProductState> = robots.iter().map(RobotModel::initial_state).collect();
            let g = TeamMdp::build(&robots, &entries, 0)?;
            let sol = solve_stapu_with(&g, &StapuOptions { solver: solver(epsilon)?, minimise_cost: min_cost })?;
            write_json(&out, &sol)?;
            println!("value {:.9}  team states {}  transitions {}", sol.value, sol.team_states, sol.team_transitions);
        }
        Command::Realloc { models, mission, max_realloc, time_ms, epsilon, out } => {
            let robots = load(&models, &mission)?;
            let budget = Budget { max_reallocations: max_realloc, time: time_ms.map(std::time::Duration::from_millis) };
            let opts = StapuOptions { solver: solver(epsilon)?, ..StapuOptions::default() };
            let (jp, report) = run_with(&robots, &budget, &opts)?;
            for line in &report.log {
                eprintln!("{line}");
            }
            write_json(&out, &jp)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Baseline { models, mission, ceiling, epsilon } => {
            let robots = load(&models, &mission)?;
            let start = std::time::Instant::now();
            let mm = build_mamdp_from(&robots, ceiling)?;
            let (value, _) = solve_mamdp_with(&mm, &solver(epsilon)?)?;
            let out = json!({
                "value": value,
                "states": mm.num_states(),
                "transitions": mm.num_transitions(),
                "full_size": mm.full_size().to_string(),
                "ms": start.elapsed().as_secs_f64() * 1e3,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Simulate { policy, runs, seed } => {
            let jp: JointPolicy = read_json(&policy)?;
            if jp.nodes.iter().any(|n| n.next.iter().any(|e| e.to >= jp.nodes.len())) {
                return Err(Error::Model("policy refers to a missing node".into()));
            }
            println!("{}", serde_json::to_string_pretty(&simulate(&jp, runs, seed))?);
        }
        Command::Genmap { nodes, failpoints, pfail, tasks, seed, out } => {
            let m = gen_map(&MapSpec::random(nodes, failpoints, pfail, tasks, seed)?)?;
            write_json(&out, &m.to_json())?;
        }
        Command::Bench { config, csv } => {
            let cfg = BenchConfig::load(&config)?;
            let (rows, errors) = bench_sweep(&cfg);
            for e in &errors {
                eprintln!("skipped {e}");
            }
            write_csv(&rows, fs::File::create(&csv)?)?;
            println!("{} rows, {} skipped", rows.len(), errors.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
