//! Experiment plans and their execution: every (sweep value, seed) instance is
//! built once and solved by each algorithm, cells running in a thread pool.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trsp_core::baselines::{rr_solve, Greedy, Popular};
use trsp_core::dva::dva_run;
use trsp_core::optimal::solve_optimal_with_budget;
use trsp_core::{run_policy, Instance, SolverRun};

use crate::error::{config, Result};
use crate::scenario::{Algorithm, LoadedScenario, SweepPoint, SweepSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenario: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub sweep: Option<SweepSpec>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
}

impl ExperimentPlan {
    /// A plan taking algorithms, seeds and sweep from the scenario itself.
    pub fn for_scenario(scenario: impl Into<PathBuf>, loaded: &LoadedScenario, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            scenario: scenario.into(),
            algorithms: loaded.scenario.algorithms.clone(),
            sweep: loaded.scenario.sweep.clone(),
            seeds: loaded.scenario.seeds.clone(),
            output_dir: output_dir.into(),
            theta: None,
            delta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return config("plan has no algorithms");
        }
        if self.seeds.is_empty() {
            return config("plan has no seeds");
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Option<SweepPoint>> {
        match &self.sweep {
            None => vec![None],
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&value| {
                    Some(SweepPoint {
                        parameter: sweep.parameter,
                        value,
                    })
                })
                .collect(),
        }
    }
}

/// Per-slot cost components in GB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSeries {
    pub placement: Vec<f64>,
    pub refresh: Vec<f64>,
    pub offload: Vec<f64>,
    pub total: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub total_gb: f64,
    pub placement_gb: f64,
    pub refresh_gb: f64,
    pub offload_gb: f64,
    pub series: SlotSeries,
    pub wall_time_ms: Vec<f64>,
}

impl CellMetrics {
    pub fn from_run(run: &SolverRun) -> Self {
        let c = &run.costs;
        let per_slot = |parts: &[trsp_core::Cost]| -> Vec<f64> {
            parts
                .chunks(c.servers.max(1))
                .map(|slot| slot.iter().map(|v| v.0).sum::<u64>() as f64 / trsp_core::units::COST_UNITS_PER_GB as f64)
                .collect()
        };
        CellMetrics {
            total_gb: c.total.as_gb(),
            placement_gb: c.placement_total().as_gb(),
            refresh_gb: c.refresh_total().as_gb(),
            offload_gb: c.offload_total().as_gb(),
            series: SlotSeries {
                placement: per_slot(&c.placement),
                refresh: per_slot(&c.refresh),
                offload: per_slot(&c.offload),
                total: c.slot_totals().iter().map(|v| v.as_gb()).collect(),
            },
            wall_time_ms: run.slot_times.iter().map(|d| d.as_secs_f64() * 1e3).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub outcome: Result<CellMetrics, String>,
}

impl RunRecord {
    pub fn metrics(&self) -> Option<&CellMetrics> {
        self.outcome.as_ref().ok()
    }
}

/// Runs one algorithm on a built instance.
pub fn solve(algorithm: Algorithm, instance: &Instance, loaded: &LoadedScenario, point: Option<SweepPoint>) -> Result<SolverRun> {
    let run = match algorithm {
        Algorithm::Dva => dva_run(instance, &loaded.dva_config(point)?)?,
        Algorithm::Greedy => run_policy(&mut Greedy, instance)?,
        Algorithm::Popular => run_policy(&mut Popular, instance)?,
        Algorithm::Rr => rr_solve(instance)?.run,
        Algorithm::Optimal => {
            let start = Instant::now();
            let solution = solve_optimal_with_budget(instance, loaded.scenario.optimal.node_budget)?;
            SolverRun::from_states(solution.states, instance, start.elapsed())?
        }
    };
    Ok(run)
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "solver panicked".to_string())
}

fn isolated<T>(f: impl FnOnce() -> Result<T>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(payload) => Err(format!("panic: {}", panic_message(payload))),
    }
}

/// Executes every cell of `plan` against an already loaded scenario. Records
/// come back ordered by sweep value, then seed, then the plan's algorithm order.
pub fn execute(plan: &ExperimentPlan, loaded: &LoadedScenario) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let loaded = loaded.with_overrides(plan.theta, plan.delta)?;
    let cells: Vec<(Option<SweepPoint>, u64)> = plan
        .points()
        .into_iter()
        .flat_map(|p| plan.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let records = cells
        .par_iter()
        .flat_map_iter(|&(point, seed)| {
            let instance = isolated(|| loaded.instance(seed, point));
            plan.algorithms
                .iter()
                .map(|&algorithm| {
                    let outcome = match &instance {
                        Ok(inst) => isolated(|| solve(algorithm, inst, &loaded, point)).map(|run| CellMetrics::from_run(&run)),
                        Err(e) => Err(format!("instance generation failed: {e}")),
                    };
                    if let Err(e) = &outcome {
                        log::error!("{algorithm} seed {seed}: {e}");
                    }
                    RunRecord {
                        algorithm,
                        seed,
                        sweep_value: point.map(|p| p.value),
                        outcome,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub records: Vec<RunRecord>,
    pub failed_cells: usize,
}

impl PlanOutcome {
    pub fn is_partial(&self) -> bool {
        self.failed_cells > 0
    }
}

/// Loads the plan's scenario, executes it and writes all artifacts to the
/// output directory.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    let loaded = LoadedScenario::load(&plan.scenario)?;
    run_loaded(plan, &loaded)
}

pub fn run_loaded(plan: &ExperimentPlan, loaded: &LoadedScenario) -> Result<PlanOutcome> {
    let records = execute(plan, loaded)?;
    crate::output::write_all(plan, loaded, &records)?;
    let failed_cells = records.iter().filter(|r| r.outcome.is_err()).count();
    Ok(PlanOutcome { records, failed_cells })
}
