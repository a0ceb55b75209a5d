//! Analytic quantities for judging DVA: an upper bound on its cost from keeping
//! each server's heaviest services forever, a lower bound on any schedule that
//! ignores placement and refresh costs, their ratio, and a sampled check of
//! whether the placement-set cost function is submodular.

mod submodular;

pub use submodular::{check_submodularity, placement_set_cost, Counterexample, Element, SubmodularityVerdict};

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Topology};

/// Cheapest coefficient from `server` to another edge server, capped at the
/// cloud's 1.0; 1.0 for a lone server.
pub fn gamma_min(topo: &Topology, server: usize) -> f64 {
    topo.nearest_neighbor_coefficient(server)
        .map_or(1.0, |c| c.as_f64().min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopSets {
    /// Per server, the services with the largest offload volume over the horizon.
    pub u: Vec<Vec<usize>>,
    /// Per server and slot, the services with the largest offload volume that slot.
    pub v: Vec<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d_s: f64,
    pub d_ignore: f64,
    /// `d_s / d_ignore`.
    pub exact_ratio: f64,
    /// Time-averaged form, `(A + mean residual outside u) / (mean residual outside v at gamma_min)`.
    pub ratio_bound: f64,
    pub amortized_term: f64,
    pub top_sets: TopSets,
    /// Violated analysis assumptions; the bounds are still reported.
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn assumptions_hold(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Number of services that fit at `server` when every image has the size of
/// the first service.
fn slots_for(instance: &Instance, server: usize) -> usize {
    let r = instance.services[0].image_size.0;
    (instance.topology.storage(server).0 / r) as usize
}

/// The `k` largest by `weight`, lower ids first on ties, returned in id order.
fn top_k(weights: &[f64], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..weights.len()).collect();
    ids.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids.sort_unstable();
    ids
}

fn volume(instance: &Instance, i: usize, j: usize, t: usize) -> f64 {
    instance.requests.actual(i, j, t) as f64 * instance.services[i].offload_volume.as_gb()
}

struct Parts {
    placed: f64,
    residual: f64,
    amortized: f64,
    u: Vec<Vec<usize>>,
}

fn upper_parts(instance: &Instance) -> Parts {
    let s = instance.n_services();
    let horizon = instance.horizon();
    let mut parts = Parts {
        placed: 0.0,
        residual: 0.0,
        amortized: 0.0,
        u: Vec::new(),
    };
    for j in 0..instance.n_servers() {
        let totals: Vec<f64> = (0..s).map(|i| (0..horizon).map(|t| volume(instance, i, j, t)).sum()).collect();
        let u = top_k(&totals, slots_for(instance, j));
        for (i, svc) in instance.services.iter().enumerate() {
            if u.contains(&i) {
                let lf = svc.refresh_interval as usize;
                parts.placed += svc.place_volume.as_gb() + (horizon / lf) as f64 * svc.refresh_volume.as_gb();
                parts.amortized += svc.place_volume.as_gb() / horizon as f64 + svc.refresh_volume.as_gb() / lf as f64;
            } else {
                parts.residual += totals[i];
            }
        }
        parts.u.push(u);
    }
    parts
}

/// Cost of keeping each server's heaviest services placed for the whole
/// horizon and sending everything else to the cloud, on actual requests.
pub fn static_schedule_cost(instance: &Instance) -> f64 {
    let p = upper_parts(instance);
    p.placed + p.residual
}

fn lower_parts(instance: &Instance) -> (f64, Vec<Vec<Vec<usize>>>) {
    let s = instance.n_services();
    let mut total = 0.0;
    let mut sets = Vec::new();
    for j in 0..instance.n_servers() {
        let g = gamma_min(&instance.topology, j);
        let k = slots_for(instance, j);
        let mut per_slot = Vec::new();
        for t in 0..instance.horizon() {
            let vols: Vec<f64> = (0..s).map(|i| volume(instance, i, j, t)).collect();
            let v = top_k(&vols, k);
            total += g * (0..s).filter(|i| !v.contains(i)).map(|i| vols[i]).sum::<f64>();
            per_slot.push(v);
        }
        sets.push(per_slot);
    }
    (total, sets)
}

/// Offload volume left after each server keeps its heaviest services of every
/// slot for free, priced at the server's cheapest coefficient.
pub fn ignore_placement_cost(instance: &Instance) -> f64 {
    lower_parts(instance).0
}

fn assumption_warnings(instance: &Instance) -> Vec<String> {
    let mut warnings = Vec::new();
    let r = instance.services[0].image_size;
    if instance.services.iter().any(|svc| svc.image_size != r) {
        warnings.push("image sizes are not uniform".to_string());
    }
    let mut unworthy = 0;
    for j in 0..instance.n_servers() {
        let g = gamma_min(&instance.topology, j);
        for t in 0..instance.horizon() {
            for (i, svc) in instance.services.iter().enumerate() {
                if volume(instance, i, j, t) * g <= svc.place_volume.as_gb() {
                    unworthy += 1;
                }
            }
        }
    }
    if unworthy > 0 {
        warnings.push(format!(
            "{unworthy} (service, server, slot) entries have offload volume at most the placement volume"
        ));
    }
    warnings
}

pub fn approximation_ratio_bound(instance: &Instance) -> BoundReport {
    let upper = upper_parts(instance);
    let (d_ignore, v) = lower_parts(instance);
    let horizon = instance.horizon() as f64;
    let d_s = upper.placed + upper.residual;
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    BoundReport {
        d_s,
        d_ignore,
        exact_ratio: ratio(d_s, d_ignore),
        ratio_bound: ratio(upper.amortized + upper.residual / horizon, d_ignore / horizon),
        amortized_term: upper.amortized,
        top_sets: TopSets { u: upper.u, v },
        warnings: assumption_warnings(instance),
    }
}
