use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{slot_cost_unchecked, Instance, Placement, SystemState};

/// Largest ground set the checker accepts.
pub const GROUND_SET_LIMIT: usize = 20;

/// A placement decision `(service, server, slot)`.
pub type Element = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub a: Vec<Element>,
    pub b: Vec<Element>,
    pub e: Element,
    /// `F(A + e) - F(A)` in GB.
    pub margin_a: f64,
    /// `F(B + e) - F(B)` in GB.
    pub margin_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmodularityVerdict {
    pub samples: usize,
    pub violation: Option<Counterexample>,
}

struct Ground {
    s: usize,
    n: usize,
    horizon: usize,
}

impl Ground {
    fn new(instance: &Instance) -> Result<Self> {
        let g = Ground {
            s: instance.n_services(),
            n: instance.n_servers(),
            horizon: instance.horizon(),
        };
        let size = g.s * g.n * g.horizon;
        if size > GROUND_SET_LIMIT {
            return Err(Error::GroundSetTooLarge {
                size,
                limit: GROUND_SET_LIMIT,
            });
        }
        Ok(g)
    }

    fn size(&self) -> usize {
        self.s * self.n * self.horizon
    }

    fn element(&self, bit: usize) -> Element {
        let per_slot = self.s * self.n;
        let t = bit / per_slot;
        let rest = bit % per_slot;
        (rest % self.s, rest / self.s, t)
    }

    fn elements(&self, mask: u32) -> Vec<Element> {
        (0..self.size()).filter(|b| mask >> b & 1 == 1).map(|b| self.element(b)).collect()
    }
}

/// Total cost on actual requests of placing exactly `set`, ignoring storage
/// limits, with offloads to the cheapest holder.
pub fn placement_set_cost(instance: &Instance, set: &[Element]) -> f64 {
    let mut mask = 0u32;
    let g = Ground {
        s: instance.n_services(),
        n: instance.n_servers(),
        horizon: instance.horizon(),
    };
    for &(i, j, t) in set {
        mask |= 1 << ((t * g.n + j) * g.s + i);
    }
    cost_of(instance, &g, mask) as f64 / crate::units::COST_UNITS_PER_GB as f64
}

fn cost_of(instance: &Instance, g: &Ground, mask: u32) -> i128 {
    let mut prev = instance.initial_state();
    let mut total = 0i128;
    for t in 0..g.horizon {
        let mut placement = Placement::empty(g.s, g.n);
        for j in 0..g.n {
            for i in 0..g.s {
                if mask >> ((t * g.n + j) * g.s + i) & 1 == 1 {
                    placement.set(i, j, true);
                }
            }
        }
        let now = SystemState::advance(&prev, placement, &instance.services, &instance.topology)
            .expect("placement matches the instance");
        let cost = slot_cost_unchecked(&prev, &now, &instance.services, &instance.topology, instance.requests.actual_slot(t));
        total += cost.total().0 as i128;
        prev = now;
    }
    total
}

/// Samples chains `A ⊆ B` with `e ∉ B` and checks
/// `F(A + e) - F(A) >= F(B + e) - F(B)`, stopping at the first violation.
pub fn check_submodularity(instance: &Instance, samples: usize, seed: u64) -> Result<SubmodularityVerdict> {
    let g = Ground::new(instance)?;
    let size = g.size();
    let full: u32 = if size == 32 { u32::MAX } else { (1u32 << size) - 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut memo: HashMap<u32, i128> = HashMap::new();
    let mut f = |mask: u32| *memo.entry(mask).or_insert_with(|| cost_of(instance, &g, mask));

    for k in 0..samples {
        let b: u32 = rng.random::<u32>() & full;
        if b == full {
            continue;
        }
        let a = b & rng.random::<u32>();
        let outside: Vec<usize> = (0..size).filter(|bit| b >> bit & 1 == 0).collect();
        let e = outside[rng.random_range(0..outside.len())];
        let bit = 1u32 << e;
        let margin_a = f(a | bit) - f(a);
        let margin_b = f(b | bit) - f(b);
        if margin_a < margin_b {
            let gb = |v: i128| v as f64 / crate::units::COST_UNITS_PER_GB as f64;
            return Ok(SubmodularityVerdict {
                samples: k + 1,
                violation: Some(Counterexample {
                    a: g.elements(a),
                    b: g.elements(b),
                    e: g.element(e),
                    margin_a: gb(margin_a),
                    margin_b: gb(margin_b),
                }),
            });
        }
    }
    Ok(SubmodularityVerdict {
        samples,
        violation: None,
    })
}
