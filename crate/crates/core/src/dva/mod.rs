//! Discounted value approximation: each slot, every server solves a 0-1
//! knapsack whose item values discount future demand by `theta` and predict the
//! offload coefficient from last slot's neighbouring holders scaled by `delta`.

mod knapsack;

pub use knapsack::{solve_knapsack, KnapsackItem};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{advance_lifetime, Instance, Placement, SystemState, Target, Topology};
use crate::schedule::{run_policy, SlotPolicy, SolverRun};
use crate::units::{Cost, Volume, VOLUME_UNITS_PER_GB};

/// Spatial approximation factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialFactor {
    /// One factor shared by every (service, server).
    Scalar(f64),
    /// Server-major table, entry `j * s + i`.
    Table(Vec<f64>),
    /// `1 / gamma_min` of each server, which predicts every offload at cloud cost.
    Reciprocal,
}

impl Default for SpatialFactor {
    fn default() -> Self {
        SpatialFactor::Scalar(2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvaConfig {
    pub theta: f64,
    pub delta: SpatialFactor,
    pub horizon_epsilon: f64,
    pub capacity_quantum_gb: f64,
}

impl Default for DvaConfig {
    fn default() -> Self {
        DvaConfig {
            theta: 0.6,
            delta: SpatialFactor::default(),
            horizon_epsilon: 1e-3,
            capacity_quantum_gb: 0.01,
        }
    }
}

impl DvaConfig {
    pub fn new(theta: f64, delta: f64) -> Result<Self> {
        let cfg = DvaConfig {
            theta,
            delta: SpatialFactor::Scalar(delta),
            ..DvaConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        match &self.delta {
            SpatialFactor::Scalar(d) if !(*d >= 1.0) => return bad(format!("delta {d} below 1")),
            SpatialFactor::Table(t) => {
                if let Some(d) = t.iter().find(|d| !(**d >= 1.0)) {
                    return bad(format!("delta table entry {d} below 1"));
                }
            }
            _ => {}
        }
        if !(self.horizon_epsilon > 0.0 && self.horizon_epsilon < 1.0) {
            return bad(format!("horizon_epsilon {} outside (0, 1)", self.horizon_epsilon));
        }
        if !(self.capacity_quantum_gb > 0.0) || self.quantum().0 == 0 {
            return bad(format!(
                "capacity quantum {} GB is below the 0.01 GB volume resolution",
                self.capacity_quantum_gb
            ));
        }
        Ok(())
    }

    fn quantum(&self) -> Volume {
        Volume((self.capacity_quantum_gb * VOLUME_UNITS_PER_GB as f64).round() as u64)
    }

    fn delta_for(&self, service: usize, server: usize, s: usize, topo: &Topology) -> f64 {
        match &self.delta {
            SpatialFactor::Scalar(d) => *d,
            SpatialFactor::Table(t) => t[server * s + service],
            SpatialFactor::Reciprocal => {
                let g = topo
                    .nearest_neighbor_coefficient(server)
                    .map_or(1.0, |c| c.as_f64().min(1.0));
                if g > 0.0 {
                    1.0 / g
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Discounted number of refreshes from now on if the service stays placed.
///
/// Sums `theta^a` over the refresh offsets `a = l_now + k * lf` up to
/// `remaining`, stopping once a term falls below `epsilon`.
pub fn discounted_refresh_cost(l_now: u32, lf: u32, theta: f64, remaining: usize, epsilon: f64) -> f64 {
    let step = lf.max(1) as usize;
    let mut total = 0.0;
    let mut a = l_now as usize;
    while a <= remaining {
        let w = theta.powi(a as i32);
        if w < epsilon {
            break;
        }
        total += w;
        a += step;
    }
    total
}

/// Predicted offload coefficient for `service` at `home` if it is not placed:
/// `delta` times the cheapest coefficient to a server that held it last slot,
/// capped at the cloud's 1.0.
pub fn predicted_offload_coefficient(
    service: usize,
    home: usize,
    placement_prev: &Placement,
    topo: &Topology,
    delta: f64,
) -> f64 {
    let nearest = (0..topo.n_servers())
        .filter(|&k| k != home && placement_prev.is_placed(service, k))
        .map(|k| topo.coefficient(home, Target::Edge(k)))
        .min();
    match nearest {
        Some(g) => {
            let pre = delta * g.as_f64();
            if pre.is_nan() {
                1.0
            } else {
                pre.min(1.0)
            }
        }
        None => 1.0,
    }
}

fn weight_of(size: Volume, quantum: Volume) -> u64 {
    size.0.div_ceil(quantum.0).max(1)
}

/// Knapsack candidates for one server at `slot`, with non-positive values dropped.
pub fn build_items(
    server: usize,
    slot: usize,
    prev: &SystemState,
    instance: &Instance,
    cfg: &DvaConfig,
) -> Result<Vec<KnapsackItem>> {
    let s = instance.n_services();
    let topo = &instance.topology;
    let requests = &instance.requests;
    let remaining = instance.horizon() - 1 - slot;
    let quantum = cfg.quantum();
    let mut items = Vec::new();
    for (i, svc) in instance.services.iter().enumerate() {
        let incumbent = prev.placement.is_placed(i, server);
        let lf = svc.refresh_interval;
        let l_now = if incumbent {
            advance_lifetime(prev.lifetime(i, server), true, true, lf)?
        } else {
            lf
        };
        let mut demand = 0.0;
        for a in 0..=remaining {
            let w = cfg.theta.powi(a as i32);
            if w < cfg.horizon_epsilon {
                break;
            }
            demand += w * requests.predicted(i, server, slot + a) as f64;
        }
        let gamma = predicted_offload_coefficient(
            i,
            server,
            &prev.placement,
            topo,
            cfg.delta_for(i, server, s, topo),
        );
        let placing = if incumbent { 0.0 } else { svc.place_volume.as_gb() };
        let refresh = svc.refresh_volume.as_gb()
            * discounted_refresh_cost(l_now, lf, cfg.theta, remaining, cfg.horizon_epsilon);
        let net_value = gamma * svc.offload_volume.as_gb() * demand - placing - refresh;
        if net_value > 0.0 {
            items.push(KnapsackItem {
                service: i,
                weight: weight_of(svc.image_size, quantum),
                net_value,
                incumbent,
            });
        }
    }
    Ok(items)
}

/// One DVA decision: knapsacks are solved per server, then offloads and
/// lifetimes follow from the combined placement.
pub fn dva_step(prev: &SystemState, slot: usize, instance: &Instance, cfg: &DvaConfig) -> Result<SystemState> {
    let s = instance.n_services();
    let n = instance.n_servers();
    let quantum = cfg.quantum();
    let chosen: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let items = build_items(j, slot, prev, instance, cfg)?;
            let capacity = instance.topology.storage(j).0 / quantum.0;
            Ok(solve_knapsack(&items, capacity))
        })
        .collect::<Result<_>>()?;
    let mut placement = Placement::empty(s, n);
    for (j, services) in chosen.iter().enumerate() {
        for &i in services {
            placement.set(i, j, true);
        }
    }
    SystemState::advance(prev, placement, &instance.services, &instance.topology)
}

/// DVA as a [`SlotPolicy`].
#[derive(Clone, Debug)]
pub struct Dva {
    pub config: DvaConfig,
}

impl Dva {
    pub fn new(config: DvaConfig) -> Result<Self> {
        config.validate()?;
        Ok(Dva { config })
    }
}

impl SlotPolicy for Dva {
    fn name(&self) -> &'static str {
        "dva"
    }

    fn step(&mut self, prev: &SystemState, slot: usize, instance: &Instance) -> Result<SystemState> {
        dva_step(prev, slot, instance, &self.config)
    }
}

pub fn dva_run(instance: &Instance, cfg: &DvaConfig) -> Result<SolverRun> {
    if let SpatialFactor::Table(t) = &cfg.delta {
        if t.len() != instance.n_services() * instance.n_servers() {
            return Err(Error::Config(format!(
                "delta table has {} entries for {} services x {} servers",
                t.len(),
                instance.n_services(),
                instance.n_servers()
            )));
        }
    }
    run_policy(&mut Dva::new(cfg.clone())?, instance)
}

/// Predicted cost of slots after `slot` if `state` is kept unchanged until the
/// end of the horizon, each slot weighted by `theta^(a - slot)`.
pub fn discounted_keep_unchanged(state: &SystemState, slot: usize, instance: &Instance, theta: f64) -> f64 {
    let mut total = 0.0;
    let mut w = 1.0;
    keep_unchanged_walk(state, slot, instance, |cost| {
        w *= theta;
        total += w * cost.as_gb();
    });
    total
}

/// Exact predicted cost of slots after `slot` when `state` is kept unchanged.
pub fn keep_unchanged_cost(state: &SystemState, slot: usize, instance: &Instance) -> Cost {
    let mut total = Cost::ZERO;
    keep_unchanged_walk(state, slot, instance, |cost| total += cost);
    total
}

fn keep_unchanged_walk(state: &SystemState, slot: usize, instance: &Instance, mut visit: impl FnMut(Cost)) {
    let services = &instance.services;
    let topo = &instance.topology;
    let mut prev = state.clone();
    for a in slot + 1..instance.horizon() {
        let next = SystemState::advance(&prev, prev.placement.clone(), services, topo)
            .expect("a valid state stays valid when kept");
        let cost = crate::model::slot_cost_unchecked(&prev, &next, services, topo, instance.requests.predicted_slot(a));
        visit(cost.total());
        prev = next;
    }
}
