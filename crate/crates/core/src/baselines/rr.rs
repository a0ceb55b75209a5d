use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::model::{Instance, Placement, SystemState};
use crate::schedule::SolverRun;

/// Largest relaxation (placement plus churn variables, all servers) RR will build.
pub const LP_VARIABLE_GUARD: usize = 100_000;

/// Fractional values below this are treated as zero when rounding.
const ROUNDING_FLOOR: f64 = 1e-9;

/// Relaxation for one server over the whole horizon.
///
/// Variables are `x[t * s + i]` in `[0, 1]` followed by churn `z[t * s + i]` in
/// `[0, 1]` with `z >= x(t) - x(t-1)`. Refresh is charged as `refresh / LF`
/// per placed slot and every unplaced request is assumed to reach the nearest
/// neighbour, at most at cloud cost.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedLp {
    pub server: usize,
    pub services: usize,
    pub horizon: usize,
    pub x_cost: Vec<f64>,
    pub z_cost: Vec<f64>,
    /// Offload cost of placing nothing, the objective's constant term.
    pub constant: f64,
    pub sizes: Vec<f64>,
    pub capacity: f64,
}

impl RelaxedLp {
    pub fn build(instance: &Instance, server: usize) -> Self {
        let s = instance.n_services();
        let horizon = instance.horizon();
        let c = offload_coefficient(instance, server);
        let mut x_cost = Vec::with_capacity(s * horizon);
        let mut z_cost = Vec::with_capacity(s * horizon);
        let mut constant = 0.0;
        for t in 0..horizon {
            let lambda = instance.requests.predicted_at(server, t);
            for (i, svc) in instance.services.iter().enumerate() {
                let offload = lambda[i] as f64 * svc.offload_volume.as_gb() * c;
                constant += offload;
                x_cost.push(svc.refresh_volume.as_gb() / svc.refresh_interval as f64 - offload);
                z_cost.push(svc.place_volume.as_gb());
            }
        }
        RelaxedLp {
            server,
            services: s,
            horizon,
            x_cost,
            z_cost,
            constant,
            sizes: instance.services.iter().map(|svc| svc.image_size.as_gb()).collect(),
            capacity: instance.topology.storage(server).as_gb(),
        }
    }

    /// Returns the fractional placement `x[t * s + i]` and the objective value.
    pub fn solve(&self) -> Result<(Vec<f64>, f64)> {
        let s = self.services;
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let x: Vec<_> = self.x_cost.iter().map(|&c| lp.add_var(c, (0.0, 1.0))).collect();
        let z: Vec<_> = self.z_cost.iter().map(|&c| lp.add_var(c, (0.0, 1.0))).collect();
        for t in 0..self.horizon {
            for i in 0..s {
                let k = t * s + i;
                if t == 0 {
                    lp.add_constraint([(z[k], 1.0), (x[k], -1.0)], ComparisonOp::Ge, 0.0);
                } else {
                    lp.add_constraint(
                        [(z[k], 1.0), (x[k], -1.0), (x[k - s], 1.0)],
                        ComparisonOp::Ge,
                        0.0,
                    );
                }
            }
            let row: Vec<_> = (0..s).map(|i| (x[t * s + i], self.sizes[i])).collect();
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, self.capacity);
        }
        let solution = lp
            .solve()
            .map_err(|e| Error::Lp(format!("server {}: {e}", self.server)))?
            .into_solution()
            .map_err(|_| Error::Lp(format!("server {}: solve interrupted", self.server)))?;
        let values = x.iter().map(|&v| solution.var_value(v).clamp(0.0, 1.0)).collect();
        Ok((values, solution.objective() + self.constant))
    }
}

fn offload_coefficient(instance: &Instance, server: usize) -> f64 {
    instance
        .topology
        .nearest_neighbor_coefficient(server)
        .map_or(1.0, |c| c.as_f64().min(1.0))
}

#[derive(Clone, Debug)]
pub struct RrSolution {
    pub run: SolverRun,
    /// Sum of the per-server relaxation optima, a lower bound on
    /// [`surrogate_cost`] of any feasible schedule.
    pub lp_objective: f64,
    /// Fractional placements per server, `x[t * s + i]`.
    pub fractional: Vec<Vec<f64>>,
}

/// Solves the relaxation for every server and rounds each (server, slot) by
/// admitting services in descending fractional value while they fit.
pub fn rr_solve(instance: &Instance) -> Result<RrSolution> {
    let s = instance.n_services();
    let n = instance.n_servers();
    let horizon = instance.horizon();
    let variables = 2 * s * n * horizon;
    if variables > LP_VARIABLE_GUARD {
        return Err(Error::LpTooLarge {
            variables,
            guard: LP_VARIABLE_GUARD,
        });
    }
    let start = Instant::now();
    let mut fractional = Vec::with_capacity(n);
    let mut lp_objective = 0.0;
    for j in 0..n {
        let (x, obj) = RelaxedLp::build(instance, j).solve()?;
        lp_objective += obj;
        fractional.push(x);
    }

    let mut states = Vec::with_capacity(horizon);
    let mut prev = instance.initial_state();
    for t in 0..horizon {
        let mut placement = Placement::empty(s, n);
        for (j, x) in fractional.iter().enumerate() {
            let slot = &x[t * s..(t + 1) * s];
            let mut order: Vec<usize> = (0..s).filter(|&i| slot[i] > ROUNDING_FLOOR).collect();
            order.sort_by_key(|&i| (std::cmp::Reverse((slot[i] * 1e9).round() as i64), i));
            super::admit_in_order(&order, j, instance, &mut placement);
        }
        let next = SystemState::advance(&prev, placement, &instance.services, &instance.topology)?;
        states.push(next.clone());
        prev = next;
    }
    let run = SolverRun::from_states(states, instance, start.elapsed())?;
    Ok(RrSolution {
        run,
        lp_objective,
        fractional,
    })
}

/// Cost of a schedule under the relaxation's own cost model, on predicted requests.
pub fn surrogate_cost(states: &[SystemState], instance: &Instance) -> f64 {
    let s = instance.n_services();
    let mut total = 0.0;
    for j in 0..instance.n_servers() {
        let c = offload_coefficient(instance, j);
        let mut prev = Placement::empty(s, instance.n_servers());
        for (t, state) in states.iter().enumerate() {
            let lambda = instance.requests.predicted_at(j, t);
            for (i, svc) in instance.services.iter().enumerate() {
                if state.placement.is_placed(i, j) {
                    if !prev.is_placed(i, j) {
                        total += svc.place_volume.as_gb();
                    }
                    total += svc.refresh_volume.as_gb() / svc.refresh_interval as f64;
                } else {
                    total += lambda[i] as f64 * svc.offload_volume.as_gb() * c;
                }
            }
            prev = state.placement.clone();
        }
    }
    total
}
