use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use trsp_core::bounds::{approximation_ratio_bound, BoundReport};
use trsp_core::optimal::solve_optimal_with_budget;
use trsp_core::workload::{
    ingest_trace, read_trace, synthesize_trace, write_requests_csv, write_trace, SampleTraceConfig, TraceConfig,
};
use trsp_harness::output::{read_results, write_heatmap, write_summary};
use trsp_harness::{
    parse_seeds, placement_heatmap, run_loaded, solve, summarize, Algorithm, ExperimentPlan, HarnessError,
    LoadedScenario, SweepPoint,
};

#[derive(Parser)]
#[command(name = "trsp", version, about = "Edge service placement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Seeds such as `1,2,3`, `1..11` or `1..=10`; defaults to the scenario's.
    #[arg(long)]
    seeds: Option<String>,
    /// Temporal factor for DVA.
    #[arg(long)]
    theta: Option<f64>,
    /// Scalar spatial factor for DVA.
    #[arg(long)]
    delta: Option<f64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<(LoadedScenario, Vec<u64>)> {
        let loaded = LoadedScenario::load(&self.scenario)?.with_overrides(self.theta, self.delta)?;
        let seeds = match &self.seeds {
            Some(text) => parse_seeds(text)?,
            None => loaded.scenario.seeds.clone(),
        };
        Ok((loaded, seeds))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed, sweep value) cell and write CSV results.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated algorithms; defaults to the scenario's.
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<Algorithm>>,
        /// Output directory; defaults to `out/<scenario name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the exact dynamic program and write its schedule and costs.
    Optimal {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the DVA cost bounds as JSON.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// JSON file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate or ingest request matrices.
    #[command(subcommand)]
    Workload(WorkloadCommand),
    /// Aggregate a results.csv by algorithm and sweep value.
    Summarize {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the placement-frequency matrix of one run.
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dva")]
        algo: Algorithm,
        /// Sweep value to run at, when the scenario has a sweep.
        #[arg(long)]
        sweep_value: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum WorkloadCommand {
    /// Write the scenario's request matrix for the first seed.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a taxi trace into a request matrix.
    Ingest {
        /// Trace CSV: taxi_id,longitude,latitude,velocity,heading,timestamp.
        #[arg(long)]
        trace: PathBuf,
        /// Scenario supplying servers, catalogue size and workload settings.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        services: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic road trace in the ingest format.
    Sample {
        #[arg(long, default_value_t = 240)]
        taxis: usize,
        #[arg(long, default_value_t = 60)]
        minutes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn default_out(loaded: &LoadedScenario) -> PathBuf {
    PathBuf::from("out").join(&loaded.scenario.name)
}

fn cmd_run(common: Common, algo: Option<Vec<Algorithm>>, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let (loaded, seeds) = common.load()?;
    let mut plan = ExperimentPlan::for_scenario(&common.scenario, &loaded, out.unwrap_or_else(|| default_out(&loaded)));
    plan.seeds = seeds;
    plan.theta = common.theta;
    plan.delta = common.delta;
    if let Some(algorithms) = algo {
        plan.algorithms = algorithms;
    }
    let outcome = run_loaded(&plan, &loaded)?;
    for row in summarize(&outcome.records) {
        let value = row.sweep_value.map(|v| format!(" @ {v}")).unwrap_or_default();
        let reduction = row.dva_reduction_pct.map(|p| format!("  dva saves {p:.1}%")).unwrap_or_default();
        println!("{:<8}{value}  mean {:.3} GB over {} runs{reduction}", row.algorithm, row.mean_total_gb, row.runs);
    }
    println!("results written to {}", plan.output_dir.display());
    if outcome.is_partial() {
        eprintln!("{} of {} cells failed", outcome.failed_cells, outcome.records.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_optimal(common: Common, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let (loaded, seeds) = common.load()?;
    let dir = out.unwrap_or_else(|| default_out(&loaded).join("optimal"));
    let mut failed = 0;
    for seed in &seeds {
        let instance = loaded.instance(*seed, None)?;
        let solution = match solve_optimal_with_budget(&instance, loaded.scenario.optimal.node_budget) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                failed += 1;
                continue;
            }
        };
        let mut states = create(&dir.join(format!("states_seed{seed}.json")))?;
        serde_json::to_writer_pretty(&mut states, &solution.states)?;
        writeln!(states)?;
        let mut w = csv::Writer::from_writer(create(&dir.join(format!("costs_seed{seed}.csv")))?);
        w.write_record(["slot", "server", "placement_gb", "refresh_gb", "offload_gb"])?;
        let c = &solution.costs;
        for t in 0..c.horizon {
            for j in 0..c.servers {
                let k = t * c.servers + j;
                w.write_record([
                    t.to_string(),
                    j.to_string(),
                    trsp_harness::output::fixed(c.placement[k].as_gb()),
                    trsp_harness::output::fixed(c.refresh[k].as_gb()),
                    trsp_harness::output::fixed(c.offload[k].as_gb()),
                ])?;
            }
        }
        w.flush()?;
        println!(
            "seed {seed}: total {:.6} GB on actual requests, predicted optimum {:.6} GB",
            solution.total_cost.as_gb(),
            solution.objective.as_gb()
        );
    }
    println!("schedules written to {}", dir.display());
    Ok(if failed > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

#[derive(Serialize)]
struct SeedBounds {
    seed: u64,
    report: BoundReport,
}

fn cmd_bounds(common: Common, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let (loaded, seeds) = common.load()?;
    let reports = seeds
        .iter()
        .map(|&seed| {
            Ok(SeedBounds {
                seed,
                report: approximation_ratio_bound(&loaded.instance(seed, None)?),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    match out {
        Some(path) => {
            let mut file = create(&path)?;
            serde_json::to_writer_pretty(&mut file, &reports)?;
            writeln!(file)?;
            file.flush()?;
        }
        None => println!("{}", serde_json::to_string_pretty(&reports)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_workload(cmd: WorkloadCommand) -> anyhow::Result<ExitCode> {
    match cmd {
        WorkloadCommand::Gen { common, out } => {
            let (loaded, seeds) = common.load()?;
            let instance = loaded.instance(seeds[0], None)?;
            write_requests_csv(&instance.requests, create(&out)?)?;
            println!(
                "{} services x {} servers x {} slots written to {}",
                instance.n_services(),
                instance.n_servers(),
                instance.horizon(),
                out.display()
            );
        }
        WorkloadCommand::Ingest {
            trace,
            scenario,
            services,
            seed,
            out,
        } => {
            let file = File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let (records, rejected) = read_trace(file)?;
            for (line, reason) in rejected.iter().take(5) {
                eprintln!("line {line}: {reason}");
            }
            let (n_services, cfg) = match scenario {
                Some(path) => {
                    let loaded = LoadedScenario::load(&path)?;
                    let w = &loaded.scenario.workload;
                    let cfg = TraceConfig {
                        servers: loaded.server_positions(),
                        coverage_radius_m: w.trace.coverage_radius_m,
                        requests_per_taxi_per_slot: w.trace.requests_per_taxi_per_slot,
                        zipf_shape: w.zipf_shape,
                        rerank_prob: w.rerank_prob,
                        noise_low: w.noise_low,
                        noise_high: w.noise_high,
                        seed,
                        slot_minutes: w.trace.slot_minutes,
                        start_minute: w.trace.start_minute,
                        horizon: Some(w.horizon),
                        bounding_box: None,
                    };
                    (loaded.scenario.services.count, cfg)
                }
                None => (services, TraceConfig { seed, ..TraceConfig::default() }),
            };
            let ingest = ingest_trace(&records, n_services, &cfg)?;
            write_requests_csv(&ingest.requests, create(&out)?)?;
            println!(
                "{} records, {} rejected lines; dropped {} outside coverage, {} outside the window, {} duplicates, {} out of order",
                records.len(),
                rejected.len(),
                ingest.outside_coverage,
                ingest.outside_window,
                ingest.duplicates,
                ingest.non_monotone
            );
            println!("{} slots written to {}", ingest.requests.horizon(), out.display());
        }
        WorkloadCommand::Sample {
            taxis,
            minutes,
            seed,
            out,
        } => {
            let records = synthesize_trace(&SampleTraceConfig {
                taxis,
                minutes,
                seed,
                ..SampleTraceConfig::default()
            });
            write_trace(&records, create(&out)?)?;
            println!("{} records written to {}", records.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_summarize(results: PathBuf, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let records = read_results(&results)?;
    if records.is_empty() {
        anyhow::bail!(HarnessError::Config(format!("{} has no rows", results.display())));
    }
    let rows = summarize(&records);
    let path = out.unwrap_or_else(|| results.with_file_name("summary.csv"));
    write_summary(&path, &rows)?;
    println!("{} groups written to {}", rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_heatmap(common: Common, algo: Algorithm, sweep_value: Option<f64>, out: PathBuf) -> anyhow::Result<ExitCode> {
    let (loaded, seeds) = common.load()?;
    let point = match (sweep_value, &loaded.scenario.sweep) {
        (Some(value), Some(sweep)) => {
            sweep.parameter.check(value)?;
            Some(SweepPoint {
                parameter: sweep.parameter,
                value,
            })
        }
        (Some(_), None) => anyhow::bail!(HarnessError::Config("scenario has no sweep".into())),
        (None, _) => None,
    };
    let instance = loaded.instance(seeds[0], point)?;
    let run = solve(algo, &instance, &loaded, point)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_heatmap(&out, &placement_heatmap(&run.states))?;
    println!("{algo} placement frequencies for seed {} written to {}", seeds[0], out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, algo, out } => cmd_run(common, algo, out),
        Command::Optimal { common, out } => cmd_optimal(common, out),
        Command::Bounds { common, out } => cmd_bounds(common, out),
        Command::Workload(cmd) => cmd_workload(cmd),
        Command::Summarize { results, out } => cmd_summarize(results, out),
        Command::Heatmap {
            common,
            algo,
            sweep_value,
            out,
        } => cmd_heatmap(common, algo, sweep_value, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
