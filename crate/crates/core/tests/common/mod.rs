#![allow(dead_code)]

use proptest::prelude::*;
use trsp_core::{Instance, RequestMatrix, ServiceSpec, Topology, Volume};

/// Raw parameters for a random instance; sizes and volumes in 0.1 GB steps.
#[derive(Clone, Debug)]
pub struct Shape {
    pub services: Vec<(u8, u8, u8, u8, u32)>,
    pub storage: Vec<u8>,
    pub gamma: Vec<u8>,
    pub horizon: usize,
    pub actual: Vec<u32>,
    pub predicted: Vec<u32>,
}

pub fn shape(max_services: usize, servers: usize, max_horizon: usize) -> impl Strategy<Value = Shape> {
    (1..=max_services, 1..=max_horizon).prop_flat_map(move |(s, horizon)| {
        let cells = s * servers * horizon;
        (
            prop::collection::vec((1u8..=10, 0u8..=20, 0u8..=15, 1u8..=10, 1u32..=3), s),
            prop::collection::vec(0u8..=25, servers),
            prop::collection::vec(1u8..=15, servers * servers),
            Just(horizon),
            prop::collection::vec(0u32..=12, cells),
            prop::collection::vec(0u32..=12, cells),
        )
            .prop_map(|(services, storage, gamma, horizon, actual, predicted)| Shape {
                services,
                storage,
                gamma,
                horizon,
                actual,
                predicted,
            })
    })
}

impl Shape {
    pub fn build(&self, exact: bool) -> Instance {
        let services: Vec<_> = self
            .services
            .iter()
            .enumerate()
            .map(|(i, &(r, a, b, d, lf))| {
                ServiceSpec::from_gb(i, r as f64 / 10.0, a as f64 / 10.0, b as f64 / 10.0, d as f64 / 100.0, lf)
                    .unwrap()
            })
            .collect();
        let n = self.storage.len();
        let storage: Vec<f64> = self.storage.iter().map(|&v| v as f64 / 10.0 + 0.01).collect();
        let edge: Vec<Vec<f64>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        if a == b {
                            0.0
                        } else {
                            self.gamma[a.min(b) * n + a.max(b)] as f64 / 10.0
                        }
                    })
                    .collect()
            })
            .collect();
        let topo = if n == 1 {
            Topology::single_server(Volume::from_gb(storage[0])).unwrap()
        } else {
            Topology::from_edge_matrix(&storage, &edge).unwrap()
        };
        let s = services.len();
        let requests = if exact {
            RequestMatrix::exact(s, n, self.horizon, self.actual.clone()).unwrap()
        } else {
            RequestMatrix::new(s, n, self.horizon, self.actual.clone(), self.predicted.clone()).unwrap()
        };
        Instance::new(services, topo, requests).unwrap()
    }
}
