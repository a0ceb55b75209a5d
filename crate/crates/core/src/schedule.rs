use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{evaluate_schedule, CostBreakdown, Instance, SystemState};

/// A solver's schedule with its cost against the actual requests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRun {
    pub states: Vec<SystemState>,
    pub costs: CostBreakdown,
    /// Decision time per slot. Whole-horizon solvers report the total spread evenly.
    #[serde(skip)]
    pub slot_times: Vec<Duration>,
}

impl SolverRun {
    pub fn from_states(states: Vec<SystemState>, instance: &Instance, elapsed: Duration) -> Result<Self> {
        let costs = evaluate_schedule(&states, instance)?;
        let per_slot = if states.is_empty() {
            Duration::ZERO
        } else {
            elapsed / states.len() as u32
        };
        Ok(SolverRun {
            slot_times: vec![per_slot; states.len()],
            states,
            costs,
        })
    }
}

/// An online algorithm that decides one slot at a time.
pub trait SlotPolicy {
    fn name(&self) -> &'static str;

    /// Decides the state of `slot` from the previous slot's state. Only the
    /// predicted requests of `instance` may be consulted.
    fn step(&mut self, prev: &SystemState, slot: usize, instance: &Instance) -> Result<SystemState>;
}

/// Runs a policy from the initial empty state over the whole horizon.
pub fn run_policy<P: SlotPolicy + ?Sized>(policy: &mut P, instance: &Instance) -> Result<SolverRun> {
    let mut prev = instance.initial_state();
    let mut states = Vec::with_capacity(instance.horizon());
    let mut slot_times = Vec::with_capacity(instance.horizon());
    for t in 0..instance.horizon() {
        let start = Instant::now();
        let next = policy.step(&prev, t, instance)?;
        slot_times.push(start.elapsed());
        states.push(next.clone());
        prev = next;
    }
    let costs = evaluate_schedule(&states, instance)?;
    Ok(SolverRun {
        states,
        costs,
        slot_times,
    })
}
