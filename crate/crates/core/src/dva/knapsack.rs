use serde::{Deserialize, Serialize};

/// Candidate for one server's knapsack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnapsackItem {
    pub service: usize,
    /// Image size in capacity quanta, rounded up.
    pub weight: u64,
    /// Estimated discounted saving of placing the service, in GB.
    pub net_value: f64,
    /// Whether the service was already placed in the previous slot.
    pub incumbent: bool,
}

/// Values are compared on a 1e-6 GB grid so ties are exact.
const VALUE_SCALE: f64 = 1e6;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
struct Score {
    value: i64,
    incumbents: u32,
}

/// Exact 0-1 knapsack by dynamic programming over capacity.
///
/// Maximises total `net_value` subject to total weight within `capacity`. Among
/// equal-value selections the one keeping more incumbents wins; remaining ties
/// favour lower service ids. Returns the selected service ids in ascending order.
pub fn solve_knapsack(items: &[KnapsackItem], capacity: u64) -> Vec<usize> {
    let mut items: Vec<&KnapsackItem> = items
        .iter()
        .filter(|it| it.net_value > 0.0 && it.weight <= capacity)
        .collect();
    items.sort_by_key(|it| it.service);
    let total_weight: u64 = items.iter().map(|it| it.weight).sum();
    if total_weight <= capacity {
        return items.iter().map(|it| it.service).collect();
    }
    let cap = capacity as usize;
    let width = cap + 1;
    let mut best = vec![Score::default(); width];
    let words = width.div_ceil(64);
    let mut keep = vec![0u64; words * items.len()];

    for (k, item) in items.iter().enumerate() {
        let w = item.weight as usize;
        let gain = Score {
            value: (item.net_value * VALUE_SCALE).round() as i64,
            incumbents: item.incumbent as u32,
        };
        let row = &mut keep[k * words..(k + 1) * words];
        for c in (w..width).rev() {
            let prior = best[c - w];
            let candidate = Score {
                value: prior.value + gain.value,
                incumbents: prior.incumbents + gain.incumbents,
            };
            if candidate > best[c] {
                best[c] = candidate;
                row[c / 64] |= 1 << (c % 64);
            }
        }
    }

    let mut chosen = Vec::new();
    let mut c = cap;
    for k in (0..items.len()).rev() {
        if keep[k * words + c / 64] >> (c % 64) & 1 == 1 {
            chosen.push(items[k].service);
            c -= items[k].weight as usize;
        }
    }
    chosen.reverse();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(service: usize, weight: u64, net_value: f64) -> KnapsackItem {
        KnapsackItem {
            service,
            weight,
            net_value,
            incumbent: false,
        }
    }

    fn exhaustive(items: &[KnapsackItem], capacity: u64) -> i64 {
        let mut best = 0;
        for mask in 0u32..1 << items.len() {
            let (mut w, mut v) = (0, 0);
            for (k, it) in items.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    w += it.weight;
                    v += (it.net_value * VALUE_SCALE).round() as i64;
                }
            }
            if w <= capacity {
                best = best.max(v);
            }
        }
        best
    }

    fn value_of(items: &[KnapsackItem], chosen: &[usize]) -> (u64, i64) {
        chosen.iter().fold((0, 0), |(w, v), id| {
            let it = items.iter().find(|it| it.service == *id).unwrap();
            (w + it.weight, v + (it.net_value * VALUE_SCALE).round() as i64)
        })
    }

    #[test]
    fn small_example() {
        let items = [item(1, 1, 5.0), item(2, 2, 6.0), item(3, 2, 5.0)];
        assert_eq!(solve_knapsack(&items, 3), vec![1, 2]);
    }

    #[test]
    fn zero_capacity_selects_nothing() {
        assert!(solve_knapsack(&[item(0, 1, 3.0)], 0).is_empty());
    }

    #[test]
    fn everything_fits() {
        let items = [item(0, 2, 1.0), item(1, 3, 2.0), item(2, 1, 0.5)];
        assert_eq!(solve_knapsack(&items, 6), vec![0, 1, 2]);
    }

    #[test]
    fn non_positive_values_are_dropped() {
        let items = [item(0, 1, 0.0), item(1, 1, -2.0), item(2, 1, 1.0)];
        assert_eq!(solve_knapsack(&items, 5), vec![2]);
    }

    #[test]
    fn ties_keep_incumbents_then_lower_ids() {
        let mut items = vec![item(0, 1, 4.0), item(1, 1, 4.0)];
        assert_eq!(solve_knapsack(&items, 1), vec![0]);
        items[1].incumbent = true;
        assert_eq!(solve_knapsack(&items, 1), vec![1]);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(
            raw in prop::collection::vec((1u64..12, -5.0f64..20.0), 0..15),
            capacity in 0u64..40,
        ) {
            let items: Vec<_> = raw.iter().enumerate().map(|(k, &(w, v))| item(k, w, v)).collect();
            let chosen = solve_knapsack(&items, capacity);
            let (w, v) = value_of(&items, &chosen);
            prop_assert!(w <= capacity);
            prop_assert_eq!(v, exhaustive(&items, capacity));
        }
    }
}
