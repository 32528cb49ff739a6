use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kplex::bench::{bench, BenchSpec};
use kplex::graph::load_edge_list;
use kplex::learn::{
    encode_milp, export_lp, load_model, save_model, LpObjective, DEFAULT_BIG_M, DEFAULT_EPSILON,
};
use kplex::pipeline::{train, TrainingPlan};
use kplex::preprocess::{preprocess, PreprocessParams};
use kplex::search::{search, Bound, SearchConfig, SolutionReport};
use kplex::trace::{read_trace, write_trace};

/// Maximum k-plex search with handcrafted or learned bounds.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Basic,
    Learned,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Feasibility,
    Coverage,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply coreness and cliqueness pruning and print a report.
    Preprocess {
        graph: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        lb: u32,
        /// Write the reduced graph as an edge list.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for the largest k-plex of size at least lb.
    Solve {
        graph: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        lb: u32,
        /// Seconds; omit to run to exhaustion.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, value_enum, default_value = "basic")]
        strategy: StrategyArg,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Append the bound-decision trace to this JSONL file.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Search the input graph as is.
        #[arg(long)]
        no_preprocess: bool,
    },
    /// Collect traces on random graphs and learn a bound.
    Train {
        /// Training plan JSON; defaults apply to missing keys.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Write the learning problem for a trace in LP format.
    ExportLp {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        constraints: usize,
        #[arg(long, value_enum, default_value = "feasibility")]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = DEFAULT_BIG_M)]
        big_m: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Replay a trace through a model.
    EvalModel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run a benchmark spec and append rows to its CSV.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { graph, k, lb, out } => {
            let g = load_edge_list(&graph)?;
            let report = preprocess(&g, PreprocessParams::new(k, lb)?);
            if let Some(out) = out {
                report.graph.save_edge_list(&out)?;
            }
            print_json(&report.summary())?;
        }
        Command::Solve {
            graph,
            k,
            lb,
            time_limit,
            strategy,
            model,
            trace_out,
            no_preprocess,
        } => {
            let bound = match (strategy, model) {
                (StrategyArg::Learned, Some(path)) => Bound::Learned(Arc::new(
                    load_model(&path).with_context(|| format!("loading model {}", path.display()))?,
                )),
                (StrategyArg::Learned, None) => bail!("--strategy learned requires --model"),
                (StrategyArg::Basic, _) => Bound::Familiarity,
                (StrategyArg::None, _) => Bound::None,
            };
            if let Some(t) = time_limit {
                if !(t > 0.0) {
                    bail!("--time-limit must be positive");
                }
            }
            let g = load_edge_list(&graph)?;
            let g = if no_preprocess {
                g
            } else {
                let report = preprocess(&g, PreprocessParams::new(k, lb)?);
                log::info!("preprocess: {:?}", report.summary());
                report.graph
            };
            let cfg = SearchConfig::new(k, lb)
                .with_bound(bound)
                .with_time_limit(time_limit.map(Duration::from_secs_f64))
                .with_trace(trace_out.is_some());
            let out = search(&g, &cfg)?;
            log::info!("search: {:?}", out.stats);
            if let (Some(path), Some(trace)) = (trace_out, out.trace.as_ref()) {
                write_trace(trace, &path)?;
            }
            print_json(&SolutionReport::new(&g, out.best.as_ref(), out.stats.elapsed))?;
        }
        Command::Train {
            plan,
            model_out,
            trace_out,
        } => {
            let plan = match plan {
                Some(p) => TrainingPlan::load(&p)?,
                None => TrainingPlan::default(),
            };
            let result = train(&plan)?;
            save_model(&result.model, &model_out)?;
            if let Some(path) = trace_out {
                write_trace(&result.data.examples, &path)?;
            }
            print_json(&serde_json::json!({
                "model": model_out,
                "examples": result.data.examples.len(),
                "coverage": result.coverage,
                "elapsed_s": result.elapsed.as_secs_f64(),
            }))?;
        }
        Command::ExportLp {
            trace,
            out,
            constraints,
            objective,
            big_m,
            epsilon,
        } => {
            let examples = read_trace(&trace)?;
            let problem = encode_milp(&examples, constraints, big_m, epsilon)?;
            let objective = match objective {
                ObjectiveArg::Feasibility => LpObjective::Feasibility,
                ObjectiveArg::Coverage => LpObjective::MaxCoverage,
            };
            export_lp(&problem, objective, &out)?;
            print_json(&serde_json::json!({
                "rows": problem.num_rows(),
                "continuous": problem.continuous_vars(),
                "binaries": problem.binary_vars(),
            }))?;
        }
        Command::EvalModel { model, trace } => {
            let model = load_model(&model)?;
            let examples = read_trace(&trace)?;
            let ev = model.evaluate(&examples)?;
            print_json(&serde_json::json!({
                "positives": ev.positives,
                "positive_violations": ev.positive_violations,
                "negatives": ev.negatives,
                "negatives_covered": ev.negatives_covered,
                "coverage": ev.coverage(),
            }))?;
        }
        Command::Bench { spec, jobs } => {
            let mut spec = BenchSpec::load(&spec)?;
            if let Some(j) = jobs {
                spec.jobs = j;
            }
            let rows = bench(&spec)?;
            eprintln!("{} rows in {}", rows.len(), spec.output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
