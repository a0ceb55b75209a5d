//! Files written by a plan run. Every CSV uses a fixed column order and six
//! decimals so reruns with the same seeds are byte-identical; wall times go
//! to their own file because they are not reproducible.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::plan::{CellMetrics, ExperimentPlan, RunRecord, SlotSeries};
use crate::scenario::{Algorithm, LoadedScenario, Scenario, SweepSpec};
use crate::summary::{summarize, SummaryRow};

pub const RESULTS_FILE: &str = "results.csv";
pub const SLOT_COSTS_FILE: &str = "slot_costs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const RESULTS_HEADER: [&str; 10] = [
    "scenario",
    "algorithm",
    "sweep_parameter",
    "sweep_value",
    "seed",
    "status",
    "total_gb",
    "placement_gb",
    "refresh_gb",
    "offload_gb",
];

pub fn fixed(v: f64) -> String {
    // avoid "-0.000000"
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt_fixed(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn out_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Output(format!("{}: {e}", path.display()))
}

fn sweep_name(plan: &ExperimentPlan) -> &'static str {
    plan.sweep.as_ref().map_or("", |s| s.parameter.name())
}

pub fn write_results(path: &Path, scenario: &str, sweep_parameter: &str, records: &[RunRecord]) -> Result<()> {
    let err = out_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(RESULTS_HEADER).map_err(&err)?;
    for r in records {
        let mut row = vec![
            scenario.to_string(),
            r.algorithm.to_string(),
            sweep_parameter.to_string(),
            opt_fixed(r.sweep_value),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok(m) => {
                row.push("ok".into());
                row.extend([m.total_gb, m.placement_gb, m.refresh_gb, m.offload_gb].map(fixed));
            }
            Err(e) => {
                row.push(format!("error: {e}"));
                row.extend(std::iter::repeat_n(String::new(), 4));
            }
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_slot_costs(path: &Path, records: &[RunRecord]) -> Result<()> {
    let err = out_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["algorithm", "sweep_value", "seed", "slot", "placement_gb", "refresh_gb", "offload_gb", "total_gb"])
        .map_err(&err)?;
    for r in records {
        let Some(m) = r.metrics() else { continue };
        for t in 0..m.series.total.len() {
            let s = &m.series;
            w.write_record([
                r.algorithm.to_string(),
                opt_fixed(r.sweep_value),
                r.seed.to_string(),
                t.to_string(),
                fixed(s.placement[t]),
                fixed(s.refresh[t]),
                fixed(s.offload[t]),
                fixed(s.total[t]),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_timings(path: &Path, records: &[RunRecord]) -> Result<()> {
    let err = out_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["algorithm", "sweep_value", "seed", "slot", "wall_time_ms"]).map_err(&err)?;
    for r in records {
        let Some(m) = r.metrics() else { continue };
        for (t, ms) in m.wall_time_ms.iter().enumerate() {
            w.write_record([
                r.algorithm.to_string(),
                opt_fixed(r.sweep_value),
                r.seed.to_string(),
                t.to_string(),
                format!("{ms:.3}"),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let err = out_err(path);
    let mut w = csv_writer(path)?;
    w.write_record([
        "algorithm",
        "sweep_value",
        "runs",
        "failures",
        "mean_total_gb",
        "min_total_gb",
        "max_total_gb",
        "mean_placement_gb",
        "mean_refresh_gb",
        "mean_offload_gb",
        "dva_reduction_pct",
    ])
    .map_err(&err)?;
    for r in rows {
        let empty_if_none = |v: f64| if r.runs == 0 { String::new() } else { fixed(v) };
        w.write_record([
            r.algorithm.to_string(),
            opt_fixed(r.sweep_value),
            r.runs.to_string(),
            r.failures.to_string(),
            empty_if_none(r.mean_total_gb),
            empty_if_none(r.min_total_gb),
            empty_if_none(r.max_total_gb),
            empty_if_none(r.mean_placement_gb),
            empty_if_none(r.mean_refresh_gb),
            empty_if_none(r.mean_offload_gb),
            opt_fixed(r.dva_reduction_pct),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_heatmap(path: &Path, heatmap: &[Vec<f64>]) -> Result<()> {
    let err = out_err(path);
    let mut w = csv_writer(path)?;
    let s = heatmap.first().map_or(0, Vec::len);
    let mut header = vec!["server".to_string()];
    header.extend((0..s).map(|i| format!("service_{i}")));
    w.write_record(&header).map_err(&err)?;
    for (j, row) in heatmap.iter().enumerate() {
        let mut fields = vec![j.to_string()];
        fields.extend(row.iter().map(|&v| fixed(v)));
        w.write_record(&fields).map_err(&err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads back the cost columns of a results file; per-slot series and wall
/// times are left empty.
pub fn read_results(path: &Path) -> Result<Vec<RunRecord>> {
    let bad = |msg: String| HarnessError::Output(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let at = |msg: &str| bad(format!("row {}: {msg}", line + 2));
        let num = |k: usize| row[k].parse::<f64>().map_err(|_| at(&format!("bad number `{}`", &row[k])));
        let algorithm: Algorithm = row[1].parse().map_err(|_| at("unknown algorithm"))?;
        let sweep_value = if row[3].is_empty() { None } else { Some(num(3)?) };
        let seed = row[4].parse().map_err(|_| at("bad seed"))?;
        let outcome = if &row[5] == "ok" {
            Ok(CellMetrics {
                total_gb: num(6)?,
                placement_gb: num(7)?,
                refresh_gb: num(8)?,
                offload_gb: num(9)?,
                series: SlotSeries {
                    placement: vec![],
                    refresh: vec![],
                    offload: vec![],
                    total: vec![],
                },
                wall_time_ms: vec![],
            })
        } else {
            Err(row[5].trim_start_matches("error: ").to_string())
        };
        records.push(RunRecord {
            algorithm,
            seed,
            sweep_value,
            outcome,
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    scenario: &'a Scenario,
    algorithms: &'a [Algorithm],
    seeds: &'a [u64],
    sweep: &'a Option<SweepSpec>,
    theta: Option<f64>,
    delta: Option<f64>,
}

/// SHA-256 of the scenario as parsed together with the plan's overrides.
pub fn config_hash(plan: &ExperimentPlan, scenario: &Scenario) -> String {
    let cfg = HashedConfig {
        scenario,
        algorithms: &plan.algorithms,
        seeds: &plan.seeds,
        sweep: &plan.sweep,
        theta: plan.theta,
        delta: plan.delta,
    };
    let json = serde_json::to_vec(&cfg).expect("config serializes");
    Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    scenario_file: String,
    config_hash: String,
    library_version: &'static str,
    algorithms: &'a [Algorithm],
    seeds: &'a [u64],
    sweep: &'a Option<SweepSpec>,
    cells: usize,
    failed_cells: usize,
    files: [&'static str; 4],
}

pub fn write_manifest(path: &Path, plan: &ExperimentPlan, scenario: &Scenario, records: &[RunRecord]) -> Result<()> {
    let manifest = Manifest {
        scenario: &scenario.name,
        scenario_file: plan.scenario.display().to_string(),
        config_hash: config_hash(plan, scenario),
        library_version: env!("CARGO_PKG_VERSION"),
        algorithms: &plan.algorithms,
        seeds: &plan.seeds,
        sweep: &plan.sweep,
        cells: records.len(),
        failed_cells: records.iter().filter(|r| r.outcome.is_err()).count(),
        files: [RESULTS_FILE, SLOT_COSTS_FILE, SUMMARY_FILE, TIMINGS_FILE],
    };
    let mut file = BufWriter::new(File::create(path).map_err(|e| HarnessError::io(path, e))?);
    serde_json::to_writer_pretty(&mut file, &manifest).map_err(|e| HarnessError::Output(e.to_string()))?;
    writeln!(file).and_then(|_| file.flush()).map_err(|e| HarnessError::io(path, e))
}

pub fn write_all(plan: &ExperimentPlan, loaded: &LoadedScenario, records: &[RunRecord]) -> Result<()> {
    let dir = &plan.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let scenario = &loaded.scenario;
    write_results(&dir.join(RESULTS_FILE), &scenario.name, sweep_name(plan), records)?;
    write_slot_costs(&dir.join(SLOT_COSTS_FILE), records)?;
    write_summary(&dir.join(SUMMARY_FILE), &summarize(records))?;
    write_timings(&dir.join(TIMINGS_FILE), records)?;
    write_manifest(&dir.join(MANIFEST_FILE), plan, scenario, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_formatting() {
        assert_eq!(fixed(1.0), "1.000000");
        assert_eq!(fixed(-0.0), "0.000000");
        assert_eq!(fixed(-1e-9), "0.000000");
        assert_eq!(fixed(-2.5), "-2.500000");
        assert_eq!(fixed(1.0 / 3.0), "0.333333");
    }
}
