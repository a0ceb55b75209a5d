//! Exact solver: backward dynamic programming over (placement, lifetime) states.
//!
//! Offload decisions are not part of the state. Given a slot's placement they
//! only affect that slot's cost, so the cheapest targets ([`best_offload`]) are
//! always optimal and the DP ranges over placements and lifetimes alone.
//! Lifetimes of unplaced services collapse to their canonical value. The node
//! set is the same in every slot.
//!
//! Decisions minimise cost under the predicted requests; the reported
//! [`DpSolution::total_cost`] evaluates the resulting schedule on the actual
//! requests.

mod brute;

pub use brute::{brute_force_oracle, ORACLE_GUARD};

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    advance_lifetime, best_offload, evaluate_schedule, needs_refresh, CostBreakdown, Instance, Placement,
    ServiceSpec, SystemState, Topology,
};
use crate::units::Cost;

/// Default cap on the number of joint states per slot.
pub const DEFAULT_NODE_BUDGET: u64 = 2_000_000;

/// Transitions evaluated per slot may not exceed this multiple of the node budget.
const TRANSITION_FACTOR: u128 = 64;

/// One state of the shortest-path graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpNode {
    pub placement: Placement,
    pub lifetime: Vec<u32>,
    /// Minimum predicted cost of all later slots from this node.
    pub cost_to_go: Cost,
    /// Index of the optimal next-slot node; `None` in the final slot.
    pub successor: Option<usize>,
}

impl DpNode {
    /// The node as a full system state, offloads resolved from its placement.
    pub fn to_state(&self, topo: &Topology) -> SystemState {
        SystemState {
            offload: crate::model::resolve_offloads(&self.placement, topo),
            placement: self.placement.clone(),
            lifetime: self.lifetime.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub states: Vec<SystemState>,
    /// Cost of `states` on the actual requests.
    pub total_cost: Cost,
    pub costs: CostBreakdown,
    /// Optimal value of the predicted-cost objective.
    pub objective: Cost,
    /// Predicted cost-to-go of each state on the optimal path.
    pub cost_to_go: Vec<Cost>,
    pub explored_nodes: u64,
}

/// Feasible placements and lifetime combinations of one server.
struct LocalSpace {
    placements: Vec<u64>,
    nodes: Vec<(u64, Vec<u32>)>,
    empty_node: usize,
    /// `succ[node * placements.len() + p]`
    succ: Vec<u32>,
    /// Placement plus refresh cost of the same transition.
    cost: Vec<u64>,
}

impl LocalSpace {
    fn build(server: usize, services: &[ServiceSpec], topo: &Topology) -> Result<Self> {
        let s = services.len();
        let capacity = topo.storage(server).0;
        let placements: Vec<u64> = (0u64..1 << s)
            .filter(|&mask| {
                let used: u64 = (0..s)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| services[i].image_size.0)
                    .sum();
                used <= capacity
            })
            .collect();

        let mut nodes = Vec::new();
        for &mask in &placements {
            let mut lifetimes: Vec<u32> = services.iter().map(|svc| svc.refresh_interval).collect();
            let placed: Vec<usize> = (0..s).filter(|i| mask >> i & 1 == 1).collect();
            for &i in &placed {
                lifetimes[i] = 0;
            }
            // odometer over l in 0..=LF for each placed service
            loop {
                nodes.push((mask, lifetimes.clone()));
                let mut carry = true;
                for &i in &placed {
                    if lifetimes[i] < services[i].refresh_interval {
                        lifetimes[i] += 1;
                        carry = false;
                        break;
                    }
                    lifetimes[i] = 0;
                }
                if carry {
                    break;
                }
            }
        }
        let index: HashMap<(u64, Vec<u32>), usize> =
            nodes.iter().enumerate().map(|(k, node)| (node.clone(), k)).collect();
        let empty_node = index[&(0, services.iter().map(|svc| svc.refresh_interval).collect())];

        let np = placements.len();
        let mut succ = vec![0u32; nodes.len() * np];
        let mut cost = vec![0u64; nodes.len() * np];
        for (q, (mask, lifetimes)) in nodes.iter().enumerate() {
            for (p, &next) in placements.iter().enumerate() {
                let mut next_l = Vec::with_capacity(s);
                let mut c = 0u64;
                for (i, svc) in services.iter().enumerate() {
                    let was = mask >> i & 1 == 1;
                    let now = next >> i & 1 == 1;
                    let l = advance_lifetime(lifetimes[i], was, now, svc.refresh_interval)?;
                    if now {
                        if !was {
                            c += svc.place_volume.at_unit_cost().0;
                        }
                        if needs_refresh(l) {
                            c += svc.refresh_volume.at_unit_cost().0;
                        }
                    }
                    next_l.push(l);
                }
                succ[q * np + p] = index[&(next, next_l)] as u32;
                cost[q * np + p] = c;
            }
        }
        Ok(LocalSpace {
            placements,
            nodes,
            empty_node,
            succ,
            cost,
        })
    }
}

/// The joint state space: mixed-radix products of per-server spaces.
struct StateSpace {
    locals: Vec<LocalSpace>,
    node_stride: Vec<usize>,
    placement_stride: Vec<usize>,
    n_nodes: usize,
    n_placements: usize,
    services: usize,
}

fn joint_size(sizes: impl Iterator<Item = usize>) -> u128 {
    sizes.fold(1u128, |acc, k| acc.saturating_mul(k as u128))
}

impl StateSpace {
    fn build(services: &[ServiceSpec], topo: &Topology, budget: u64) -> Result<Self> {
        if services.len() > 63 {
            return Err(Error::Config("the exact solver supports at most 63 services".into()));
        }
        // size check before materialising anything
        let n = topo.n_servers();
        let mut per_server_nodes = Vec::with_capacity(n);
        let mut per_server_placements = Vec::with_capacity(n);
        for j in 0..n {
            let (nodes, placements) = count_local(j, services, topo);
            per_server_nodes.push(nodes);
            per_server_placements.push(placements);
        }
        let nodes = per_server_nodes.iter().fold(1u128, |a, &k| a.saturating_mul(k));
        let placements = per_server_placements.iter().fold(1u128, |a, &k| a.saturating_mul(k));
        if nodes > budget as u128 || nodes.saturating_mul(placements) > TRANSITION_FACTOR * budget as u128 {
            return Err(Error::NodeBudgetExceeded { nodes, budget });
        }

        let locals = (0..n)
            .map(|j| LocalSpace::build(j, services, topo))
            .collect::<Result<Vec<_>>>()?;
        let mut node_stride = Vec::with_capacity(n);
        let mut placement_stride = Vec::with_capacity(n);
        let (mut ns, mut ps) = (1usize, 1usize);
        for local in &locals {
            node_stride.push(ns);
            placement_stride.push(ps);
            ns *= local.nodes.len();
            ps *= local.placements.len();
        }
        Ok(StateSpace {
            n_nodes: joint_size(locals.iter().map(|l| l.nodes.len())) as usize,
            n_placements: joint_size(locals.iter().map(|l| l.placements.len())) as usize,
            locals,
            node_stride,
            placement_stride,
            services: services.len(),
        })
    }

    fn local_node(&self, node: usize, server: usize) -> usize {
        node / self.node_stride[server] % self.locals[server].nodes.len()
    }

    fn local_placement(&self, placement: usize, server: usize) -> usize {
        placement / self.placement_stride[server] % self.locals[server].placements.len()
    }

    fn empty_node(&self) -> usize {
        self.locals
            .iter()
            .zip(&self.node_stride)
            .map(|(l, stride)| l.empty_node * stride)
            .sum()
    }

    /// Successor node and placement-plus-refresh cost.
    fn transition(&self, node: usize, placement: usize) -> (usize, u64) {
        let mut next = 0;
        let mut cost = 0;
        for (j, local) in self.locals.iter().enumerate() {
            let q = self.local_node(node, j);
            let p = self.local_placement(placement, j);
            let k = q * local.placements.len() + p;
            next += local.succ[k] as usize * self.node_stride[j];
            cost += local.cost[k];
        }
        (next, cost)
    }

    fn placement(&self, placement: usize) -> Placement {
        let mut out = Placement::empty(self.services, self.locals.len());
        for (j, local) in self.locals.iter().enumerate() {
            let mask = local.placements[self.local_placement(placement, j)];
            for i in 0..self.services {
                out.set(i, j, mask >> i & 1 == 1);
            }
        }
        out
    }

    fn node(&self, node: usize) -> (Placement, Vec<u32>) {
        let mut placement = Placement::empty(self.services, self.locals.len());
        let mut lifetime = Vec::with_capacity(self.services * self.locals.len());
        for (j, local) in self.locals.iter().enumerate() {
            let (mask, l) = &local.nodes[self.local_node(node, j)];
            for i in 0..self.services {
                placement.set(i, j, mask >> i & 1 == 1);
            }
            lifetime.extend_from_slice(l);
        }
        (placement, lifetime)
    }

    /// Predicted offload cost of every joint placement in `slot`.
    fn offload_costs(&self, instance: &Instance, slot: usize) -> Vec<u64> {
        let s = self.services;
        let topo = &instance.topology;
        (0..self.n_placements)
            .into_par_iter()
            .map(|p| {
                let placement = self.placement(p);
                let demand = instance.requests.predicted_slot(slot);
                let mut c = 0u64;
                for j in 0..topo.n_servers() {
                    for (i, svc) in instance.services.iter().enumerate() {
                        if placement.is_placed(i, j) {
                            continue;
                        }
                        let target = best_offload(i, j, &placement, topo);
                        c += (svc.offload_volume * demand[j * s + i] as u64)
                            .weighted(topo.coefficient(j, target))
                            .0;
                    }
                }
                c
            })
            .collect()
    }
}

fn count_local(server: usize, services: &[ServiceSpec], topo: &Topology) -> (u128, u128) {
    // Enumerates subsets; fine while s <= ~24, beyond which the budget fails anyway.
    let s = services.len();
    if s > 24 {
        return (u128::MAX, u128::MAX);
    }
    let capacity = topo.storage(server).0;
    let (mut nodes, mut placements) = (0u128, 0u128);
    for mask in 0u64..1 << s {
        let mut used = 0;
        let mut combos = 1u128;
        for (i, svc) in services.iter().enumerate() {
            if mask >> i & 1 == 1 {
                used += svc.image_size.0;
                combos = combos.saturating_mul(svc.refresh_interval as u128 + 1);
            }
        }
        if used <= capacity {
            placements += 1;
            nodes = nodes.saturating_add(combos);
        }
    }
    (nodes, placements)
}

/// Every feasible (placement, lifetime) node; identical for every slot.
pub fn enumerate_states(services: &[ServiceSpec], topo: &Topology, budget: u64) -> Result<Vec<DpNode>> {
    let space = StateSpace::build(services, topo, budget)?;
    Ok((0..space.n_nodes)
        .map(|k| {
            let (placement, lifetime) = space.node(k);
            DpNode {
                placement,
                lifetime,
                cost_to_go: Cost::ZERO,
                successor: None,
            }
        })
        .collect())
}

/// The full backward-induction table.
pub struct DpTable {
    space: StateSpace,
    /// `values[t][node]`: predicted cost of slots after `t` from `node` in slot `t`.
    values: Vec<Vec<u64>>,
    /// `choice[t][node]`: joint placement chosen for slot `t + 1`.
    choice: Vec<Vec<u32>>,
    root_value: u64,
    root_choice: u32,
}

impl DpTable {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn node_count(&self) -> usize {
        self.space.n_nodes
    }

    /// Nodes of `slot` with their cost-to-go and optimal successor.
    pub fn nodes(&self, slot: usize) -> Vec<DpNode> {
        let last = slot + 1 == self.values.len();
        (0..self.space.n_nodes)
            .map(|k| {
                let (placement, lifetime) = self.space.node(k);
                DpNode {
                    placement,
                    lifetime,
                    cost_to_go: Cost(self.values[slot][k]),
                    successor: (!last).then(|| self.space.transition(k, self.choice[slot][k] as usize).0),
                }
            })
            .collect()
    }

    /// Minimum predicted total cost from the initial state.
    pub fn objective(&self) -> Cost {
        Cost(self.root_value)
    }
}

/// Backward induction over the whole horizon.
pub fn solve_table(instance: &Instance, budget: u64) -> Result<DpTable> {
    let space = StateSpace::build(&instance.services, &instance.topology, budget)?;
    let horizon = instance.horizon();
    let mut values = vec![Vec::new(); horizon];
    let mut choice = vec![Vec::new(); horizon];
    if horizon == 0 {
        return Ok(DpTable {
            space,
            values,
            choice,
            root_value: 0,
            root_choice: 0,
        });
    }
    values[horizon - 1] = vec![0; space.n_nodes];
    choice[horizon - 1] = vec![0; space.n_nodes];

    let best_from = |node: usize, offload: &[u64], next_values: &[u64]| -> (u64, u32) {
        let mut best = (u64::MAX, 0u32);
        for p in 0..space.n_placements {
            let (next, local) = space.transition(node, p);
            let total = local + offload[p] + next_values[next];
            if total < best.0 {
                best = (total, p as u32);
            }
        }
        best
    };

    for t in (0..horizon - 1).rev() {
        let offload = space.offload_costs(instance, t + 1);
        let next_values = &values[t + 1];
        let (v, c): (Vec<u64>, Vec<u32>) = (0..space.n_nodes)
            .into_par_iter()
            .map(|node| best_from(node, &offload, next_values))
            .unzip();
        values[t] = v;
        choice[t] = c;
    }
    // the initial state behaves like the empty node: every service is unplaced
    let offload = space.offload_costs(instance, 0);
    let (root_value, root_choice) = best_from(space.empty_node(), &offload, &values[0]);
    assert!(root_value < u64::MAX, "cloud offload keeps every transition feasible");
    Ok(DpTable {
        space,
        values,
        choice,
        root_value,
        root_choice,
    })
}

/// Minimum-cost schedule from the initial state.
pub fn solve_optimal(instance: &Instance) -> Result<DpSolution> {
    solve_optimal_with_budget(instance, DEFAULT_NODE_BUDGET)
}

pub fn solve_optimal_with_budget(instance: &Instance, budget: u64) -> Result<DpSolution> {
    let table = solve_table(instance, budget)?;
    let space = &table.space;
    let mut states = Vec::with_capacity(instance.horizon());
    let mut cost_to_go = Vec::with_capacity(instance.horizon());
    let mut prev = instance.initial_state();
    let mut node = space.empty_node();
    let mut p = table.root_choice as usize;
    for t in 0..instance.horizon() {
        node = space.transition(node, p).0;
        let state = SystemState::advance(&prev, space.placement(p), &instance.services, &instance.topology)?;
        debug_assert_eq!(state.lifetime, space.node(node).1);
        cost_to_go.push(Cost(table.values[t][node]));
        states.push(state.clone());
        prev = state;
        if t + 1 < instance.horizon() {
            p = table.choice[t][node] as usize;
        }
    }
    let costs = evaluate_schedule(&states, instance)?;
    Ok(DpSolution {
        states,
        total_cost: costs.total,
        costs,
        objective: table.objective(),
        cost_to_go,
        explored_nodes: (space.n_nodes * instance.horizon()) as u64,
    })
}

/// Runs [`solve_optimal`] and reports it as a [`crate::schedule::SolverRun`].
pub fn optimal_run(instance: &Instance) -> Result<crate::schedule::SolverRun> {
    let start = Instant::now();
    let solution = solve_optimal(instance)?;
    crate::schedule::SolverRun::from_states(solution.states, instance, start.elapsed())
}
