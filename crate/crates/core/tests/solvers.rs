mod common;

use common::shape;
use proptest::prelude::*;
use trsp_core::baselines::{rr_solve, surrogate_cost, Greedy, Popular};
use trsp_core::bounds::approximation_ratio_bound;
use trsp_core::dva::{dva_run, keep_unchanged_cost, Dva, DvaConfig, SpatialFactor};
use trsp_core::optimal::solve_optimal;
use trsp_core::{run_policy, Instance, RequestMatrix, ServiceSpec, SlotPolicy, Topology, Volume};

fn bound_regime_config() -> DvaConfig {
    DvaConfig {
        theta: 1.0,
        delta: SpatialFactor::Reciprocal,
        ..DvaConfig::default()
    }
}

/// Uniform 1 GB images with heavy demand so every service is worth placing.
fn bound_regime_instance(
    services: &[(u8, u8, u32)],
    servers: usize,
    storage: usize,
    gamma: u8,
    horizon: usize,
    demand: &[u32],
) -> Instance {
    let specs: Vec<_> = services
        .iter()
        .enumerate()
        .map(|(i, &(a, b, lf))| ServiceSpec::from_gb(i, 1.0, a as f64 / 10.0, b as f64 / 10.0, 0.1, lf).unwrap())
        .collect();
    let topo = if servers == 1 {
        Topology::single_server(Volume::from_gb(storage as f64)).unwrap()
    } else {
        let g = gamma as f64 / 10.0;
        Topology::from_edge_matrix(&[storage as f64; 2], &[vec![0.0, g], vec![g, 0.0]]).unwrap()
    };
    let s = specs.len();
    let req = RequestMatrix::exact(s, servers, horizon, demand[..s * servers * horizon].to_vec()).unwrap();
    Instance::new(specs, topo, req).unwrap()
}

fn bound_regime_case() -> impl Strategy<Value = Instance> {
    (
        prop::collection::vec((1u8..=10, 1u8..=10, 1u32..=3), 2..=3),
        1usize..=2,
        1usize..=2,
        5u8..=10,
        2usize..=4,
        prop::collection::vec(12u32..=60, 24),
    )
        .prop_map(|(svc, n, r, g, h, d)| bound_regime_instance(&svc, n, r, g, h, &d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn keep_unchanged_bounds_cost_to_go(sh in shape(3, 2, 4)) {
        let inst = sh.build(false);
        let dp = solve_optimal(&inst).unwrap();
        for (t, state) in dp.states.iter().enumerate() {
            prop_assert!(keep_unchanged_cost(state, t, &inst) >= dp.cost_to_go[t]);
        }
    }

    #[test]
    fn every_solver_is_feasible_and_no_better_than_optimal(sh in shape(3, 2, 4)) {
        let inst = sh.build(true);
        let opt = solve_optimal(&inst).unwrap().total_cost;
        let mut policies: Vec<Box<dyn SlotPolicy>> = vec![
            Box::new(Dva::new(DvaConfig::default()).unwrap()),
            Box::new(Dva::new(bound_regime_config()).unwrap()),
            Box::new(Popular),
            Box::new(Greedy),
        ];
        for p in policies.iter_mut() {
            let run = run_policy(p.as_mut(), &inst).unwrap();
            for (t, state) in run.states.iter().enumerate() {
                state.validate(&inst.services, &inst.topology, t).unwrap();
            }
            prop_assert!(run.costs.reconciles());
            prop_assert!(run.costs.total >= opt, "{} beat the optimum", p.name());
        }
        let rr = rr_solve(&inst).unwrap();
        prop_assert!(rr.run.costs.total >= opt);
        prop_assert!(rr.lp_objective <= surrogate_cost(&rr.run.states, &inst) + 1e-6);
    }

    #[test]
    fn sandwich_in_the_analysis_regime(inst in bound_regime_case()) {
        let report = approximation_ratio_bound(&inst);
        prop_assume!(report.assumptions_hold());
        let opt = solve_optimal(&inst).unwrap().total_cost.as_gb();
        let dva = dva_run(&inst, &bound_regime_config()).unwrap().costs.total.as_gb();
        prop_assert!(report.d_ignore <= opt + 1e-9, "{} > {}", report.d_ignore, opt);
        prop_assert!(opt <= dva + 1e-9);
        prop_assert!(dva <= report.d_s + 1e-9, "dva {} above d_s {}", dva, report.d_s);
        prop_assert!(dva / opt <= report.ratio_bound + 1e-9);
    }

    #[test]
    fn dva_is_deterministic(sh in shape(4, 2, 4)) {
        let inst = sh.build(false);
        let a = dva_run(&inst, &DvaConfig::default()).unwrap();
        let b = dva_run(&inst, &DvaConfig::default()).unwrap();
        prop_assert_eq!(a.states, b.states);
    }
}
