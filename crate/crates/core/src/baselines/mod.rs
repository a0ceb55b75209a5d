//! Comparison algorithms: request-count ranking (Popular), request density
//! ranking (Greedy) and LP relaxation with rounding (RR).

mod rr;

pub use rr::{rr_solve, surrogate_cost, RelaxedLp, RrSolution, LP_VARIABLE_GUARD};

use std::cmp::Ordering;

use crate::error::Result;
use crate::model::{Instance, Placement, SystemState};
use crate::schedule::SlotPolicy;

/// Admits services in `order` while they fit in `server`'s storage.
fn admit_in_order(order: &[usize], server: usize, instance: &Instance, placement: &mut Placement) {
    let capacity = instance.topology.storage(server);
    let mut used = crate::units::Volume::ZERO;
    for &i in order {
        let size = instance.services[i].image_size;
        if used + size <= capacity {
            used += size;
            placement.set(i, server, true);
        }
    }
}

fn ranked_step(
    prev: &SystemState,
    slot: usize,
    instance: &Instance,
    rank: impl Fn(usize, usize, usize) -> Ordering,
) -> Result<SystemState> {
    let s = instance.n_services();
    let n = instance.n_servers();
    let mut placement = Placement::empty(s, n);
    for j in 0..n {
        let lambda = instance.requests.predicted_at(j, slot);
        let mut order: Vec<usize> = (0..s).filter(|&i| lambda[i] > 0).collect();
        order.sort_by(|&a, &b| rank(j, a, b).then(a.cmp(&b)));
        admit_in_order(&order, j, instance, &mut placement);
    }
    SystemState::advance(prev, placement, &instance.services, &instance.topology)
}

/// Places the services with the most predicted requests at each server.
pub fn popular_step(prev: &SystemState, slot: usize, instance: &Instance) -> Result<SystemState> {
    let req = &instance.requests;
    ranked_step(prev, slot, instance, |j, a, b| {
        req.predicted(b, j, slot).cmp(&req.predicted(a, j, slot))
    })
}

/// Places services by predicted offload volume per unit of storage.
pub fn greedy_step(prev: &SystemState, slot: usize, instance: &Instance) -> Result<SystemState> {
    let req = &instance.requests;
    let svc = &instance.services;
    let density = |i: usize, other: usize, j: usize| {
        req.predicted(i, j, slot) as u128 * svc[i].offload_volume.0 as u128 * svc[other].image_size.0 as u128
    };
    ranked_step(prev, slot, instance, |j, a, b| density(b, a, j).cmp(&density(a, b, j)))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Popular;

impl SlotPolicy for Popular {
    fn name(&self) -> &'static str {
        "popular"
    }

    fn step(&mut self, prev: &SystemState, slot: usize, instance: &Instance) -> Result<SystemState> {
        popular_step(prev, slot, instance)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Greedy;

impl SlotPolicy for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn step(&mut self, prev: &SystemState, slot: usize, instance: &Instance) -> Result<SystemState> {
        greedy_step(prev, slot, instance)
    }
}
