//! Experiment harness: scenario files, seeded sweeps over the solvers, and
//! CSV/JSON artifacts for plotting.

pub mod error;
pub mod output;
pub mod plan;
pub mod scenario;
pub mod summary;

pub use error::{HarnessError, Result};
pub use plan::{execute, run_loaded, run_plan, solve, CellMetrics, ExperimentPlan, PlanOutcome, RunRecord};
pub use scenario::{Algorithm, LoadedScenario, Scenario, SweepParameter, SweepPoint, SweepSpec};
pub use summary::{placement_heatmap, summarize, SummaryRow};

/// Parses `1,2,3`, `1..4` (end exclusive) or `1..=3`, and mixtures of them.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || HarnessError::Config(format!("cannot parse seeds `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let (b, inclusive) = match b.strip_prefix('=') {
                Some(b) => (b, true),
                None => (b, false),
            };
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if inclusive {
                seeds.extend(a..=b);
            } else {
                seeds.extend(a..b);
            }
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(HarnessError::Config("no seeds given".into()));
    }
    Ok(seeds)
}
