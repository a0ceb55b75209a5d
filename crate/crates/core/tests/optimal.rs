mod common;

use common::shape;
use proptest::prelude::*;
use trsp_core::dva::solve_knapsack;
use trsp_core::dva::KnapsackItem;
use trsp_core::model::slot_cost;
use trsp_core::optimal::{brute_force_oracle, solve_optimal};
use trsp_core::{Cost, Instance, RequestMatrix, ServiceSpec, Topology, Volume};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_matches_exhaustive_search_single_server(sh in shape(4, 1, 5)) {
        let inst = sh.build(false);
        let brute = match brute_force_oracle(&inst) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let dp = solve_optimal(&inst).unwrap();
        prop_assert_eq!(dp.objective, brute.objective);
        let exact = sh.build(true);
        let dp = solve_optimal(&exact).unwrap();
        prop_assert_eq!(dp.total_cost, brute_force_oracle(&exact).unwrap().total_cost);
        prop_assert_eq!(dp.total_cost, dp.objective);
    }

    #[test]
    fn dp_matches_exhaustive_search_two_servers(sh in shape(2, 2, 3)) {
        let inst = sh.build(false);
        let brute = match brute_force_oracle(&inst) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(solve_optimal(&inst).unwrap().objective, brute.objective);
    }

    #[test]
    fn cost_to_go_satisfies_bellman(sh in shape(3, 2, 4)) {
        let inst = sh.build(false);
        let dp = solve_optimal(&inst).unwrap();
        let horizon = inst.horizon();
        prop_assert_eq!(dp.cost_to_go[horizon - 1], Cost::ZERO);
        let mut first = slot_cost(&inst.initial_state(), &dp.states[0], &inst.services, &inst.topology,
            inst.requests.predicted_slot(0), 0).unwrap().total();
        first += dp.cost_to_go[0];
        prop_assert_eq!(first, dp.objective);
        for t in 0..horizon - 1 {
            let step = slot_cost(&dp.states[t], &dp.states[t + 1], &inst.services, &inst.topology,
                inst.requests.predicted_slot(t + 1), t + 1).unwrap().total();
            prop_assert_eq!(dp.cost_to_go[t], step + dp.cost_to_go[t + 1]);
        }
    }

    #[test]
    fn optimum_grows_with_horizon(sh in shape(3, 1, 5)) {
        let inst = sh.build(true);
        let mut last = Cost::ZERO;
        for h in 1..=inst.horizon() {
            let cost = solve_optimal(&inst.truncated(h)).unwrap().objective;
            prop_assert!(cost >= last);
            last = cost;
        }
    }

    #[test]
    fn single_slot_is_a_knapsack(
        raw in prop::collection::vec((1u64..=5, 1u64..=30, 0u32..=9), 1..=6),
        capacity in 1u64..=12,
    ) {
        // placement volume 0.1 GB, no refresh in one slot, offload value d * lambda
        let services: Vec<_> = raw.iter().enumerate()
            .map(|(i, &(r, d, _))| ServiceSpec::new(i, Volume(r * 10), Volume(10), Volume(0), Volume(d), 3).unwrap())
            .collect();
        let demand: Vec<u32> = raw.iter().map(|t| t.2).collect();
        let topo = Topology::single_server(Volume(capacity * 10)).unwrap();
        let inst = Instance::new(services, topo, RequestMatrix::exact(raw.len(), 1, 1, demand.clone()).unwrap()).unwrap();
        let items: Vec<_> = raw.iter().enumerate().map(|(i, &(r, d, l))| KnapsackItem {
            service: i,
            weight: r,
            net_value: (d as f64 * l as f64 - 10.0) / 100.0,
            incumbent: false,
        }).collect();
        let chosen = solve_knapsack(&items, capacity);
        let saved: f64 = chosen.iter().map(|&i| items[i].net_value).sum();
        let all: f64 = raw.iter().map(|&(_, d, l)| d as f64 * l as f64 / 100.0).sum();
        let dp = solve_optimal(&inst).unwrap();
        prop_assert!((dp.total_cost.as_gb() - (all - saved)).abs() < 1e-9);
    }
}
