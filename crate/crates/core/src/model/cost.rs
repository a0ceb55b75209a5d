use serde::{Deserialize, Serialize};

use super::{advance_lifetime, needs_refresh, Instance, Placement, ServiceSpec, SystemState, Target, Topology};
use crate::error::{Error, Result};
use crate::units::{Coefficient, Cost};

/// Per-server cost components of one slot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCost {
    pub placement: Vec<Cost>,
    pub refresh: Vec<Cost>,
    pub offload: Vec<Cost>,
}

impl SlotCost {
    pub fn server_total(&self, server: usize) -> Cost {
        self.placement[server] + self.refresh[server] + self.offload[server]
    }

    /// Transition cost of the slot, summed over servers.
    pub fn total(&self) -> Cost {
        (0..self.placement.len()).map(|j| self.server_total(j)).sum()
    }
}

/// Cost components per (server, slot) and their sum over the whole horizon.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub servers: usize,
    pub horizon: usize,
    /// Slot-major: entry `t * servers + j`.
    pub placement: Vec<Cost>,
    pub refresh: Vec<Cost>,
    pub offload: Vec<Cost>,
    pub total: Cost,
}

impl CostBreakdown {
    pub fn from_slots(servers: usize, slots: Vec<SlotCost>) -> Self {
        let horizon = slots.len();
        let mut out = CostBreakdown {
            servers,
            horizon,
            placement: Vec::with_capacity(servers * horizon),
            refresh: Vec::with_capacity(servers * horizon),
            offload: Vec::with_capacity(servers * horizon),
            total: Cost::ZERO,
        };
        for row in slots {
            out.total += row.total();
            out.placement.extend(row.placement);
            out.refresh.extend(row.refresh);
            out.offload.extend(row.offload);
        }
        out
    }

    pub fn slot_total(&self, slot: usize) -> Cost {
        let range = slot * self.servers..(slot + 1) * self.servers;
        self.placement[range.clone()].iter().copied().sum::<Cost>()
            + self.refresh[range.clone()].iter().copied().sum::<Cost>()
            + self.offload[range].iter().copied().sum::<Cost>()
    }

    pub fn slot_totals(&self) -> Vec<Cost> {
        (0..self.horizon).map(|t| self.slot_total(t)).collect()
    }

    pub fn placement_total(&self) -> Cost {
        self.placement.iter().copied().sum()
    }

    pub fn refresh_total(&self) -> Cost {
        self.refresh.iter().copied().sum()
    }

    pub fn offload_total(&self) -> Cost {
        self.offload.iter().copied().sum()
    }

    /// Whether the stored total equals the sum of all components.
    pub fn reconciles(&self) -> bool {
        self.placement_total() + self.refresh_total() + self.offload_total() == self.total
    }
}

/// Cheapest place to send requests for `service` arriving at `home`.
///
/// Candidates are the cloud and every other edge server holding the service in
/// `placement`. Equal coefficients go to the lowest server id; the cloud only
/// wins when it is strictly cheaper than every edge holder.
pub fn best_offload(service: usize, home: usize, placement: &Placement, topo: &Topology) -> Target {
    let mut best: Option<(usize, Coefficient)> = None;
    for k in (0..topo.n_servers()).filter(|&k| k != home && placement.is_placed(service, k)) {
        let c = topo.coefficient(home, Target::Edge(k));
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((k, c));
        }
    }
    match best {
        Some((k, c)) if c <= topo.coefficient(home, Target::Cloud) => Target::Edge(k),
        _ => Target::Cloud,
    }
}

/// Offload targets for every (service, server): local when placed, otherwise
/// [`best_offload`].
pub fn resolve_offloads(placement: &Placement, topo: &Topology) -> Vec<Target> {
    let s = placement.n_services();
    let mut targets = Vec::with_capacity(s * topo.n_servers());
    for j in 0..topo.n_servers() {
        for i in 0..s {
            targets.push(if placement.is_placed(i, j) {
                Target::Edge(j)
            } else {
                best_offload(i, j, placement, topo)
            });
        }
    }
    targets
}

/// Cost of moving from `prev` to `now` given this slot's request counts
/// (server-major, as returned by [`super::RequestMatrix::actual_slot`]).
pub fn slot_cost(
    prev: &SystemState,
    now: &SystemState,
    services: &[ServiceSpec],
    topo: &Topology,
    requests: &[u32],
    slot: usize,
) -> Result<SlotCost> {
    prev.validate(services, topo, slot.saturating_sub(1))?;
    now.validate(services, topo, slot)?;
    if requests.len() != services.len() * topo.n_servers() {
        return Err(Error::Shape(format!(
            "slot {slot}: {} request counts for {} services x {} servers",
            requests.len(),
            services.len(),
            topo.n_servers()
        )));
    }
    Ok(slot_cost_unchecked(prev, now, services, topo, requests))
}

/// [`slot_cost`] without validating either state.
pub(crate) fn slot_cost_unchecked(
    prev: &SystemState,
    now: &SystemState,
    services: &[ServiceSpec],
    topo: &Topology,
    requests: &[u32],
) -> SlotCost {
    let s = services.len();
    let n = topo.n_servers();
    let mut out = SlotCost {
        placement: vec![Cost::ZERO; n],
        refresh: vec![Cost::ZERO; n],
        offload: vec![Cost::ZERO; n],
    };
    for j in 0..n {
        for (i, svc) in services.iter().enumerate() {
            if now.placement.is_placed(i, j) {
                if !prev.placement.is_placed(i, j) {
                    out.placement[j] += svc.place_volume.at_unit_cost();
                }
                if needs_refresh(now.lifetime(i, j)) {
                    out.refresh[j] += svc.refresh_volume.at_unit_cost();
                }
            } else {
                let count = requests[j * s + i] as u64;
                let coeff = topo.coefficient(j, now.target(i, j));
                out.offload[j] += (svc.offload_volume * count).weighted(coeff);
            }
        }
    }
    out
}

/// Total cost of a schedule (one state per slot) against the actual requests.
///
/// Every state is validated and its lifetimes must match a replay of the
/// placement sequence from the initial empty state.
pub fn evaluate_schedule(states: &[SystemState], instance: &Instance) -> Result<CostBreakdown> {
    if states.len() != instance.horizon() {
        return Err(Error::Shape(format!(
            "schedule has {} slots, instance horizon is {}",
            states.len(),
            instance.horizon()
        )));
    }
    let services = &instance.services;
    let topo = &instance.topology;
    let mut prev = instance.initial_state();
    let mut rows = Vec::with_capacity(states.len());
    for (t, now) in states.iter().enumerate() {
        now.validate(services, topo, t)?;
        for j in 0..topo.n_servers() {
            for (i, svc) in services.iter().enumerate() {
                let expected = advance_lifetime(
                    prev.lifetime(i, j),
                    prev.placement.is_placed(i, j),
                    now.placement.is_placed(i, j),
                    svc.refresh_interval,
                )?;
                if expected != now.lifetime(i, j) {
                    return Err(Error::InconsistentLifetime {
                        slot: t,
                        service: i,
                        server: j,
                        found: now.lifetime(i, j),
                        expected,
                    });
                }
            }
        }
        rows.push(slot_cost_unchecked(
            &prev,
            now,
            services,
            topo,
            instance.requests.actual_slot(t),
        ));
        prev = now.clone();
    }
    Ok(CostBreakdown::from_slots(topo.n_servers(), rows))
}
