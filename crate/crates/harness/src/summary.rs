use serde::{Deserialize, Serialize};
use trsp_core::SystemState;

use crate::plan::RunRecord;
use crate::scenario::Algorithm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub sweep_value: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub mean_total_gb: f64,
    pub min_total_gb: f64,
    pub max_total_gb: f64,
    pub mean_placement_gb: f64,
    pub mean_refresh_gb: f64,
    pub mean_offload_gb: f64,
    /// `(mean(this) - mean(dva)) / mean(this)` in percent at the same sweep
    /// value; absent without a DVA group.
    pub dva_reduction_pct: Option<f64>,
}

fn same_point(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

/// Groups by (sweep value, algorithm) in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Option<f64>, Algorithm)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(v, a)| a == r.algorithm && same_point(v, r.sweep_value)) {
            keys.push((r.sweep_value, r.algorithm));
        }
    }
    let mut rows: Vec<SummaryRow> = keys
        .iter()
        .map(|&(value, algorithm)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.algorithm == algorithm && same_point(r.sweep_value, value))
                .collect();
            let ok: Vec<_> = group.iter().filter_map(|r| r.metrics()).collect();
            let mean = |f: &dyn Fn(&crate::plan::CellMetrics) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64
                }
            };
            let totals = ok.iter().map(|m| m.total_gb);
            SummaryRow {
                algorithm,
                sweep_value: value,
                runs: ok.len(),
                failures: group.len() - ok.len(),
                mean_total_gb: mean(&|m| m.total_gb),
                min_total_gb: totals.clone().fold(f64::INFINITY, f64::min),
                max_total_gb: totals.fold(f64::NEG_INFINITY, f64::max),
                mean_placement_gb: mean(&|m| m.placement_gb),
                mean_refresh_gb: mean(&|m| m.refresh_gb),
                mean_offload_gb: mean(&|m| m.offload_gb),
                dva_reduction_pct: None,
            }
        })
        .collect();
    let dva_means: Vec<(Option<f64>, f64)> = rows
        .iter()
        .filter(|r| r.algorithm == Algorithm::Dva && r.runs > 0)
        .map(|r| (r.sweep_value, r.mean_total_gb))
        .collect();
    for row in &mut rows {
        if let Some(&(_, dva)) = dva_means.iter().find(|(v, _)| same_point(*v, row.sweep_value)) {
            if row.runs > 0 && row.mean_total_gb > 0.0 {
                row.dva_reduction_pct = Some((row.mean_total_gb - dva) / row.mean_total_gb * 100.0);
            }
        }
    }
    rows
}

/// Fraction of slots each service is placed at each server; one row per
/// server, one column per service.
pub fn placement_heatmap(states: &[SystemState]) -> Vec<Vec<f64>> {
    let Some(first) = states.first() else {
        return Vec::new();
    };
    let (s, n) = (first.n_services(), first.n_servers());
    let horizon = states.len() as f64;
    (0..n)
        .map(|j| {
            (0..s)
                .map(|i| states.iter().filter(|q| q.placement.is_placed(i, j)).count() as f64 / horizon)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{CellMetrics, SlotSeries};
    use trsp_core::Placement;

    fn record(algorithm: Algorithm, seed: u64, total: f64) -> RunRecord {
        RunRecord {
            algorithm,
            seed,
            sweep_value: None,
            outcome: Ok(CellMetrics {
                total_gb: total,
                placement_gb: total / 2.0,
                refresh_gb: 0.0,
                offload_gb: total / 2.0,
                series: SlotSeries {
                    placement: vec![],
                    refresh: vec![],
                    offload: vec![],
                    total: vec![total],
                },
                wall_time_ms: vec![0.0],
            }),
        }
    }

    #[test]
    fn single_seed_collapses() {
        let rows = summarize(&[record(Algorithm::Greedy, 1, 4.0)]);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.mean_total_gb, r.min_total_gb, r.max_total_gb), (4.0, 4.0, 4.0));
        assert_eq!(r.dva_reduction_pct, None);
    }

    #[test]
    fn reductions_against_dva() {
        let rows = summarize(&[
            record(Algorithm::Dva, 1, 6.0),
            record(Algorithm::Greedy, 1, 10.0),
            record(Algorithm::Dva, 2, 8.0),
            record(Algorithm::Greedy, 2, 10.0),
        ]);
        assert_eq!(rows[0].algorithm, Algorithm::Dva);
        assert_eq!(rows[0].dva_reduction_pct, Some(0.0));
        assert_eq!((rows[0].min_total_gb, rows[0].max_total_gb), (6.0, 8.0));
        assert!((rows[1].dva_reduction_pct.unwrap() - 30.0).abs() < 1e-12);
        assert_eq!(rows[1].mean_placement_gb, 5.0);
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let mut bad = record(Algorithm::Rr, 2, 0.0);
        bad.outcome = Err("boom".into());
        let rows = summarize(&[record(Algorithm::Rr, 1, 3.0), bad]);
        assert_eq!((rows[0].runs, rows[0].failures, rows[0].mean_total_gb), (1, 1, 3.0));
    }

    #[test]
    fn heatmap_frequencies() {
        let mut states = Vec::new();
        for t in 0..20 {
            let mut p = Placement::empty(3, 1);
            p.set(0, 0, true);
            p.set(2, 0, t % 2 == 0);
            let mut q = SystemState::initial(3, 1);
            q.placement = p;
            states.push(q);
        }
        assert_eq!(placement_heatmap(&states), vec![vec![1.0, 0.0, 0.5]]);
    }
}
