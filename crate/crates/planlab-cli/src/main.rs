use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use planlab::bwgen::{dataset, write_dataset, BwDatasetSpec, InclusiveRange};
use planlab::crt::{
    builtin_scenarios, crt_dataset, load_scenarios, write_crt_dataset, CrtDatasetSpec, CrtTask,
};
use planlab::harness::{
    compute_metrics, load_any_dataset, read_transcript, render_markdown, resolve_strategy_ref,
    resume_experiment, run_from_config, AnyDataset, ExperimentConfig, ResolvedConfig, RunOptions,
    RunOutcome,
};
use planlab::planner::{optimal_plan, PlanMode, PlanSearchLimits};
use planlab::prompting::{
    build_bw_task_prompt, build_crt_task_prompt, build_strategy_gen_prompt, render_error_message,
    DomainKind,
};
use planlab::strips::{parse_plan, parse_task, render_plan, validate_plan, State, Task};

#[derive(Parser)]
#[command(name = "planlab", version, about = "Generate, solve, prompt and score planning and growth-puzzle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a block-stacking dataset with certified optimal lengths.
    GenBw {
        /// Directory to write manifest.json and tasks/ into.
        #[arg(long)]
        out: PathBuf,
        /// Block count window, e.g. 5-6.
        #[arg(long, default_value = "5-6", value_parser = parse_range)]
        blocks: InclusiveRange,
        /// Optimal plan length window, e.g. 16-18.
        #[arg(long, default_value = "16-18", value_parser = parse_range)]
        steps: InclusiveRange,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Candidate indices scanned before giving up.
        #[arg(long)]
        max_candidates: Option<u64>,
        /// Node-expansion budget per candidate.
        #[arg(long)]
        max_expansions: Option<u64>,
        /// Admit tasks whose optimum was bounded but not certified.
        #[arg(long)]
        allow_uncertified: bool,
    },
    /// Generate a growth-puzzle dataset from the shipped (or a custom) scenario file.
    GenCrt {
        /// Directory to write manifest.json and tasks/ into.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        per_scenario: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario TOML file; defaults to the built-in scenarios.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Execute a plan against a task; prints VALID or the judge's error message.
    Validate { task: PathBuf, plan: PathBuf },
    /// Search for an optimal plan and print bounds plus the plan found.
    Plan {
        task: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Astar)]
        mode: Mode,
        #[arg(long)]
        max_expansions: Option<u64>,
        #[arg(long)]
        max_seconds: Option<f64>,
    },
    /// Print the exact prompt a task would be sent with.
    Prompt {
        /// A .task file (block stacking) or a .json task file (growth puzzle).
        task: PathBuf,
        /// none, a built-in strategy name, or a strategy text file.
        #[arg(long, default_value = "none")]
        strategy: String,
    },
    /// Print the prompt that asks a model to write a domain strategy.
    GenStrategy {
        #[arg(long, value_enum)]
        domain: Domain,
    },
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Print every initial prompt instead of calling any backend.
        #[arg(long)]
        dry_run: bool,
        /// Stop after this many exchanges; the run can be resumed.
        #[arg(long)]
        max_exchanges: Option<u64>,
    },
    /// Continue an interrupted run from its output directory.
    Resume {
        dir: PathBuf,
        #[arg(long)]
        max_exchanges: Option<u64>,
    },
    /// Recompute metrics from a run's transcript and print the report.
    Report { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Astar,
    Bfs,
    Bounds,
}

impl From<Mode> for PlanMode {
    fn from(mode: Mode) -> PlanMode {
        match mode {
            Mode::Astar => PlanMode::AStar,
            Mode::Bfs => PlanMode::ExactBfs,
            Mode::Bounds => PlanMode::BoundsOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    Bw,
    Crt,
}

fn parse_range(text: &str) -> Result<InclusiveRange, String> {
    let (lo, hi) = match text.split_once('-') {
        Some((lo, hi)) => (lo, hi),
        None => (text, text),
    };
    let lo: u32 = lo.trim().parse().map_err(|_| format!("bad range {text:?}"))?;
    let hi: u32 = hi.trim().parse().map_err(|_| format!("bad range {text:?}"))?;
    if lo > hi {
        return Err(format!("empty range {text:?}"));
    }
    Ok(InclusiveRange::new(lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenBw {
            out,
            blocks,
            steps,
            count,
            seed,
            max_candidates,
            max_expansions,
            allow_uncertified,
        } => {
            let mut spec = BwDatasetSpec::new(blocks, steps, count, seed);
            if let Some(n) = max_candidates {
                spec.max_candidates = n;
            }
            if let Some(n) = max_expansions {
                spec.max_expansions = n;
            }
            spec.allow_uncertified = allow_uncertified;
            let ds = dataset(&spec)?;
            write_dataset(&out, &ds)?;
            println!("wrote {} tasks to {}", ds.tasks.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GenCrt {
            out,
            per_scenario,
            seed,
            scenarios,
        } => {
            let scenarios = match scenarios {
                Some(path) => load_scenarios(&path)?,
                None => builtin_scenarios().to_vec(),
            };
            let spec = CrtDatasetSpec { per_scenario, seed };
            let ds = crt_dataset(&scenarios, &spec)?;
            write_crt_dataset(&out, &ds)?;
            println!("wrote {} tasks to {}", ds.tasks.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { task, plan } => {
            let task = load_bw_task(&task)?;
            let text = fs::read_to_string(&plan)
                .with_context(|| format!("reading {}", plan.display()))?;
            let plan = parse_plan(&text)?;
            let report = validate_plan(&task, &plan);
            if report.valid() {
                println!("VALID");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{}", render_error_message(&render_plan(&plan), &report)?);
                Ok(ExitCode::from(1))
            }
        }
        Command::Plan {
            task,
            mode,
            max_expansions,
            max_seconds,
        } => {
            let task = load_bw_task(&task)?;
            let mut limits = PlanSearchLimits::new(mode.into());
            if let Some(n) = max_expansions {
                limits.max_expansions = n;
            }
            if let Some(s) = max_seconds {
                limits.max_seconds = Duration::from_secs_f64(s);
            }
            let result = optimal_plan(&task, &limits)?;
            println!("lower_bound: {}", result.lower_bound);
            match result.upper_bound {
                Some(n) => println!("upper_bound: {n}"),
                None => println!("upper_bound: none"),
            }
            println!("certified_optimal: {}", result.certified_optimal);
            if let Some(plan) = &result.plan {
                print!("{}", render_plan(plan));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Prompt { task, strategy } => {
            let strategy = resolve_strategy_ref(&strategy, Path::new("."))?;
            let bundle = if task.extension().is_some_and(|e| e == "json") {
                let text = fs::read_to_string(&task)
                    .with_context(|| format!("reading {}", task.display()))?;
                let task: CrtTask = serde_json::from_str(&text)?;
                build_crt_task_prompt(&task, strategy.as_ref())
            } else {
                build_bw_task_prompt(&load_bw_task(&task)?, strategy.as_ref())
            };
            print!("{}", bundle.user);
            Ok(ExitCode::SUCCESS)
        }
        Command::GenStrategy { domain } => {
            let kind = match domain {
                Domain::Bw => DomainKind::Blocksworld,
                Domain::Crt => DomainKind::Crt,
            };
            print!("{}", build_strategy_gen_prompt(kind).user);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            dry_run,
            max_exchanges,
        } => {
            let parsed = ExperimentConfig::from_toml_file(&config)?;
            let config_dir = match config.parent() {
                Some(dir) if dir != Path::new("") => dir.to_path_buf(),
                _ => PathBuf::from("."),
            };
            if dry_run {
                print_prompts(&parsed, &config_dir)?;
                return Ok(ExitCode::SUCCESS);
            }
            let options = RunOptions { max_exchanges };
            let outcome = run_from_config(&parsed, &config_dir, options)?;
            print_outcome(&outcome, &config_dir.join(&parsed.output_dir));
            Ok(ExitCode::SUCCESS)
        }
        Command::Resume { dir, max_exchanges } => {
            let options = RunOptions { max_exchanges };
            let outcome = resume_experiment(&dir, options)?;
            print_outcome(&outcome, &dir);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let run_json: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(dir.join("run.json"))?)?;
            let config: ResolvedConfig = serde_json::from_value(run_json["config"].clone())?;
            let config_dir = run_json["config_dir"]
                .as_str()
                .map_or_else(|| PathBuf::from("."), PathBuf::from);
            let pricing = config.build_pricing(&config_dir)?;
            let spec = pricing.get(&config.model)?;
            let (records, torn) = read_transcript(&dir.join("transcript.jsonl"))?;
            if torn {
                eprintln!("note: transcript has a torn final line; it was ignored");
            }
            let metrics = compute_metrics(&records, config.dataset_size, spec);
            print!("{}", render_markdown(&metrics));
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Reads a task file of init/goal atom lines and names it after the file.
fn load_bw_task(path: &Path) -> Result<Task> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (init, goal) = parse_task(&text)?;
    let init = State::new(init)?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("task")
        .to_string();
    Ok(Task::bw(&id, init, goal))
}

/// The `--dry-run` path: every round-0 prompt, nothing sent anywhere.
fn print_prompts(config: &ExperimentConfig, config_dir: &Path) -> Result<()> {
    let dataset = load_any_dataset(&config_dir.join(&config.dataset))?;
    let resolved = config.resolve(dataset.kind(), dataset.len())?;
    let strategy = resolved.resolve_strategy(config_dir)?;
    match &dataset {
        AnyDataset::Bw(ds) => {
            for task in &ds.tasks {
                let bundle = build_bw_task_prompt(task, strategy.as_ref());
                println!("=== {} ===", bundle.task_ref);
                println!("{}", bundle.user);
            }
        }
        AnyDataset::Crt(ds) => {
            for task in &ds.tasks {
                let bundle = build_crt_task_prompt(task, strategy.as_ref());
                println!("=== {} ===", bundle.task_ref);
                println!("{}", bundle.user);
            }
        }
    }
    Ok(())
}

fn print_outcome(outcome: &RunOutcome, output_dir: &Path) {
    let total = outcome.rounds.first().map_or(0, |r| r.attempted.len());
    let mut cumulative = std::collections::BTreeSet::new();
    for round in &outcome.rounds {
        cumulative.extend(round.solved.iter().cloned());
        println!(
            "round {}: attempted {}  solved {}  errored {}  cumulative {}/{}",
            round.round,
            round.attempted.len(),
            round.solved.len(),
            round.errored.len(),
            cumulative.len(),
            total
        );
    }
    if outcome.completed {
        println!(
            "run {} complete; outputs in {}",
            outcome.run_id,
            output_dir.display()
        );
    } else {
        println!(
            "run {} stopped at the exchange budget; continue with: planlab resume {}",
            outcome.run_id,
            output_dir.display()
        );
    }
}
