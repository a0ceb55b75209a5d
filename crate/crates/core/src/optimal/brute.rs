use super::DpSolution;
use crate::error::{Error, Result};
use crate::model::{evaluate_schedule, slot_cost, Instance, Placement, SystemState};
use crate::units::Cost;

/// Maximum number of placement sequences the exhaustive search will visit.
pub const ORACLE_GUARD: u64 = 1 << 20;

/// Exhaustive search over every sequence of storage-feasible placements, with
/// offloads chosen per slot by the cheapest target. Shares nothing with the DP
/// besides the model's cost evaluation.
pub fn brute_force_oracle(instance: &Instance) -> Result<DpSolution> {
    let s = instance.n_services();
    let n = instance.n_servers();
    let horizon = instance.horizon();

    let mut per_server: Vec<Vec<Vec<bool>>> = Vec::with_capacity(n);
    for j in 0..n {
        let capacity = instance.topology.storage(j);
        let mut options = Vec::new();
        for mask in 0u64..1 << s {
            let flags: Vec<bool> = (0..s).map(|i| mask >> i & 1 == 1).collect();
            let used: crate::units::Volume = flags
                .iter()
                .zip(&instance.services)
                .filter(|(&f, _)| f)
                .map(|(_, svc)| svc.image_size)
                .sum();
            if used <= capacity {
                options.push(flags);
            }
        }
        per_server.push(options);
    }
    let mut placements = vec![Placement::empty(s, n)];
    for (j, options) in per_server.iter().enumerate() {
        placements = placements
            .iter()
            .flat_map(|base| {
                options.iter().map(move |flags| {
                    let mut p = base.clone();
                    p.set_server(j, flags);
                    p
                })
            })
            .collect();
    }

    let sequences = (placements.len() as u128).saturating_pow(horizon as u32);
    if sequences > ORACLE_GUARD as u128 {
        return Err(Error::SearchGuardExceeded {
            sequences,
            guard: ORACLE_GUARD,
        });
    }

    let mut search = Search {
        instance,
        placements: &placements,
        best: None,
        path: Vec::with_capacity(horizon),
        visited: 0,
    };
    search.descend(&instance.initial_state(), 0, Cost::ZERO)?;
    let (objective, states) = search.best.take().unwrap_or((Cost::ZERO, Vec::new()));
    let costs = evaluate_schedule(&states, instance)?;
    Ok(DpSolution {
        total_cost: costs.total,
        costs,
        objective,
        cost_to_go: Vec::new(),
        states,
        explored_nodes: search.visited,
    })
}

struct Search<'a> {
    instance: &'a Instance,
    placements: &'a [Placement],
    best: Option<(Cost, Vec<SystemState>)>,
    path: Vec<SystemState>,
    visited: u64,
}

impl Search<'_> {
    fn descend(&mut self, prev: &SystemState, slot: usize, so_far: Cost) -> Result<()> {
        if slot == self.instance.horizon() {
            self.visited += 1;
            if self.best.as_ref().is_none_or(|(b, _)| so_far < *b) {
                self.best = Some((so_far, self.path.clone()));
            }
            return Ok(());
        }
        let services = &self.instance.services;
        let topo = &self.instance.topology;
        for placement in self.placements {
            let now = SystemState::advance(prev, placement.clone(), services, topo)?;
            let step = slot_cost(prev, &now, services, topo, self.instance.requests.predicted_slot(slot), slot)?;
            self.path.push(now.clone());
            self.descend(&now, slot + 1, so_far + step.total())?;
            self.path.pop();
        }
        Ok(())
    }
}
