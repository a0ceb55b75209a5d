//! Domain types shared by every solver.
//!
//! Indexing conventions: services `i` are `0..s`, edge servers `j` are `0..n`,
//! slots `t` are `0..T` (slot `t` is the `(t+1)`-th decision slot; the initial
//! all-empty state precedes slot 0). Offload targets distinguish the cloud from
//! edge servers through [`Target`], whose [`Target::index`] maps the cloud to 0
//! and edge server `j` to `j + 1`.

mod cost;
mod lifetime;

pub use cost::{
    best_offload, evaluate_schedule, resolve_offloads, slot_cost, CostBreakdown, SlotCost,
};
pub use lifetime::{advance_lifetime, needs_refresh};
pub(crate) use cost::slot_cost_unchecked;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Coefficient, Volume};

/// Per-service constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: usize,
    /// Storage footprint of the image.
    pub image_size: Volume,
    /// Backhaul volume for pulling the image onto a server.
    pub place_volume: Volume,
    /// Backhaul volume for one refresh.
    pub refresh_volume: Volume,
    /// Backhaul volume for offloading one request.
    pub offload_volume: Volume,
    /// Slots between refreshes.
    pub refresh_interval: u32,
}

impl ServiceSpec {
    pub fn new(
        id: usize,
        image_size: Volume,
        place_volume: Volume,
        refresh_volume: Volume,
        offload_volume: Volume,
        refresh_interval: u32,
    ) -> Result<Self> {
        let spec = ServiceSpec {
            id,
            image_size,
            place_volume,
            refresh_volume,
            offload_volume,
            refresh_interval,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a service from GB-valued parameters, rounding each to 0.01 GB.
    pub fn from_gb(
        id: usize,
        image_size_gb: f64,
        place_volume_gb: f64,
        refresh_volume_gb: f64,
        offload_volume_gb: f64,
        refresh_interval: u32,
    ) -> Result<Self> {
        for (name, v) in [
            ("image_size_gb", image_size_gb),
            ("place_volume_gb", place_volume_gb),
            ("refresh_volume_gb", refresh_volume_gb),
            ("offload_volume_gb", offload_volume_gb),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidService {
                    service: id,
                    reason: format!("{name} must be a non-negative number, got {v}"),
                });
            }
        }
        Self::new(
            id,
            Volume::from_gb(image_size_gb),
            Volume::from_gb(place_volume_gb),
            Volume::from_gb(refresh_volume_gb),
            Volume::from_gb(offload_volume_gb),
            refresh_interval,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidService {
                service: self.id,
                reason: reason.to_string(),
            })
        };
        if self.image_size == Volume::ZERO {
            return fail("image size must be positive");
        }
        if self.offload_volume == Volume::ZERO {
            return fail("offload volume must be positive");
        }
        if self.refresh_interval == 0 {
            return fail("refresh interval must be at least one slot");
        }
        Ok(())
    }
}

/// Where the requests for a service at some server are served.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Cloud,
    Edge(usize),
}

impl Target {
    /// Column in the traffic-coefficient matrix: cloud is 0, edge server `j` is `j + 1`.
    pub fn index(self) -> usize {
        match self {
            Target::Cloud => 0,
            Target::Edge(j) => j + 1,
        }
    }

    pub fn from_index(index: usize) -> Self {
        match index {
            0 => Target::Cloud,
            k => Target::Edge(k - 1),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Cloud => write!(f, "cloud"),
            Target::Edge(j) => write!(f, "server {j}"),
        }
    }
}

/// Edge storage capacities and the traffic-coefficient matrix.
///
/// `gamma` is `(n+1) x (n+1)` row-major with index 0 reserved for the cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    storage: Vec<Volume>,
    gamma: Vec<Coefficient>,
}

impl Topology {
    pub fn new(storage: Vec<Volume>, gamma: Vec<Vec<Coefficient>>) -> Result<Self> {
        let n = storage.len();
        if n == 0 {
            return Err(Error::InvalidTopology("at least one edge server is required".into()));
        }
        if gamma.len() != n + 1 || gamma.iter().any(|row| row.len() != n + 1) {
            return Err(Error::InvalidTopology(format!(
                "coefficient matrix must be {0}x{0} (cloud plus {n} servers)",
                n + 1
            )));
        }
        for (j, cap) in storage.iter().enumerate() {
            if *cap == Volume::ZERO {
                return Err(Error::InvalidTopology(format!("server {j} has zero storage")));
            }
        }
        for j in 1..=n {
            if gamma[j][0] != Coefficient::ONE {
                return Err(Error::InvalidTopology(format!(
                    "coefficient from server {} to the cloud must be 1, got {}",
                    j - 1,
                    gamma[j][0]
                )));
            }
            if gamma[j][j] != Coefficient::ZERO {
                return Err(Error::InvalidTopology(format!(
                    "self coefficient of server {} must be 0",
                    j - 1
                )));
            }
        }
        Ok(Topology {
            storage,
            gamma: gamma.into_iter().flatten().collect(),
        })
    }

    /// Builds a topology from GB capacities and an `n x n` matrix of edge-to-edge
    /// coefficients; cloud entries are filled in as 1.
    pub fn from_edge_matrix(storage_gb: &[f64], edge_gamma: &[Vec<f64>]) -> Result<Self> {
        let n = storage_gb.len();
        if edge_gamma.len() != n || edge_gamma.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidTopology(format!(
                "edge coefficient matrix must be {n}x{n}"
            )));
        }
        if let Some(bad) = edge_gamma.iter().flatten().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::InvalidTopology(format!("negative or non-finite coefficient {bad}")));
        }
        let mut gamma = vec![vec![Coefficient::ONE; n + 1]; n + 1];
        gamma[0][0] = Coefficient::ZERO;
        for j in 0..n {
            for k in 0..n {
                gamma[j + 1][k + 1] = Coefficient::from_f64(edge_gamma[j][k]);
            }
        }
        Topology::new(storage_gb.iter().map(|&g| Volume::from_gb(g)).collect(), gamma)
    }

    /// A single edge server that can only offload to the cloud.
    pub fn single_server(storage: Volume) -> Result<Self> {
        Topology::new(
            vec![storage],
            vec![
                vec![Coefficient::ZERO, Coefficient::ONE],
                vec![Coefficient::ONE, Coefficient::ZERO],
            ],
        )
    }

    pub fn n_servers(&self) -> usize {
        self.storage.len()
    }

    pub fn storage(&self, server: usize) -> Volume {
        self.storage[server]
    }

    pub fn storages(&self) -> &[Volume] {
        &self.storage
    }

    pub fn with_storage(&self, storage: Vec<Volume>) -> Result<Self> {
        if storage.len() != self.n_servers() {
            return Err(Error::InvalidTopology("storage vector length changed".into()));
        }
        if storage.contains(&Volume::ZERO) {
            return Err(Error::InvalidTopology("zero storage".into()));
        }
        Ok(Topology {
            storage,
            gamma: self.gamma.clone(),
        })
    }

    /// Coefficient for moving data from edge server `from` to `to`.
    pub fn coefficient(&self, from: usize, to: Target) -> Coefficient {
        self.gamma[(from + 1) * (self.n_servers() + 1) + to.index()]
    }

    /// Smallest coefficient from `server` to any other edge server, if any exist.
    pub fn nearest_neighbor_coefficient(&self, server: usize) -> Option<Coefficient> {
        (0..self.n_servers())
            .filter(|&k| k != server)
            .map(|k| self.coefficient(server, Target::Edge(k)))
            .min()
    }
}

/// Actual and predicted request counts per (service, server, slot).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMatrix {
    services: usize,
    servers: usize,
    horizon: usize,
    actual: Vec<u32>,
    predicted: Vec<u32>,
}

impl RequestMatrix {
    /// Both tensors are laid out slot-major, then server, then service.
    pub fn new(
        services: usize,
        servers: usize,
        horizon: usize,
        actual: Vec<u32>,
        predicted: Vec<u32>,
    ) -> Result<Self> {
        let len = services * servers * horizon;
        if actual.len() != len || predicted.len() != len {
            return Err(Error::InvalidRequests(format!(
                "expected {len} entries for {services} services x {servers} servers x {horizon} slots, \
                 got {} actual and {} predicted",
                actual.len(),
                predicted.len()
            )));
        }
        Ok(RequestMatrix {
            services,
            servers,
            horizon,
            actual,
            predicted,
        })
    }

    pub fn zeros(services: usize, servers: usize, horizon: usize) -> Self {
        let len = services * servers * horizon;
        RequestMatrix {
            services,
            servers,
            horizon,
            actual: vec![0; len],
            predicted: vec![0; len],
        }
    }

    /// Predictions equal to the actual counts.
    pub fn exact(services: usize, servers: usize, horizon: usize, actual: Vec<u32>) -> Result<Self> {
        let predicted = actual.clone();
        Self::new(services, servers, horizon, actual, predicted)
    }

    /// Builds an exact-forecast matrix from `f(i, j, t)`.
    pub fn from_fn(
        services: usize,
        servers: usize,
        horizon: usize,
        mut f: impl FnMut(usize, usize, usize) -> u32,
    ) -> Self {
        let mut actual = Vec::with_capacity(services * servers * horizon);
        for t in 0..horizon {
            for j in 0..servers {
                for i in 0..services {
                    actual.push(f(i, j, t));
                }
            }
        }
        let predicted = actual.clone();
        RequestMatrix {
            services,
            servers,
            horizon,
            actual,
            predicted,
        }
    }

    fn offset(&self, server: usize, slot: usize) -> usize {
        (slot * self.servers + server) * self.services
    }

    pub fn n_services(&self) -> usize {
        self.services
    }

    pub fn n_servers(&self) -> usize {
        self.servers
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn actual(&self, service: usize, server: usize, slot: usize) -> u32 {
        self.actual[self.offset(server, slot) + service]
    }

    pub fn predicted(&self, service: usize, server: usize, slot: usize) -> u32 {
        self.predicted[self.offset(server, slot) + service]
    }

    /// Actual counts of every service at one server in one slot.
    pub fn actual_at(&self, server: usize, slot: usize) -> &[u32] {
        let o = self.offset(server, slot);
        &self.actual[o..o + self.services]
    }

    pub fn predicted_at(&self, server: usize, slot: usize) -> &[u32] {
        let o = self.offset(server, slot);
        &self.predicted[o..o + self.services]
    }

    /// Actual counts of every (server, service) in one slot, server-major.
    pub fn actual_slot(&self, slot: usize) -> &[u32] {
        let o = self.offset(0, slot);
        &self.actual[o..o + self.services * self.servers]
    }

    pub fn predicted_slot(&self, slot: usize) -> &[u32] {
        let o = self.offset(0, slot);
        &self.predicted[o..o + self.services * self.servers]
    }

    pub fn actual_raw(&self) -> &[u32] {
        &self.actual
    }

    pub fn predicted_raw(&self) -> &[u32] {
        &self.predicted
    }

    /// The first `horizon` slots.
    pub fn truncated(&self, horizon: usize) -> Self {
        let horizon = horizon.min(self.horizon);
        let len = self.services * self.servers * horizon;
        RequestMatrix {
            services: self.services,
            servers: self.servers,
            horizon,
            actual: self.actual[..len].to_vec(),
            predicted: self.predicted[..len].to_vec(),
        }
    }

    /// Same actual counts, predictions replaced by the actual values.
    pub fn with_exact_forecast(&self) -> Self {
        RequestMatrix {
            predicted: self.actual.clone(),
            ..self.clone()
        }
    }
}

/// Binary placement matrix `x[i][j]`, stored server-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    services: usize,
    servers: usize,
    bits: Vec<bool>,
}

impl Placement {
    pub fn empty(services: usize, servers: usize) -> Self {
        Placement {
            services,
            servers,
            bits: vec![false; services * servers],
        }
    }

    pub fn n_services(&self) -> usize {
        self.services
    }

    pub fn n_servers(&self) -> usize {
        self.servers
    }

    pub fn is_placed(&self, service: usize, server: usize) -> bool {
        self.bits[server * self.services + service]
    }

    pub fn set(&mut self, service: usize, server: usize, placed: bool) {
        self.bits[server * self.services + service] = placed;
    }

    /// Flags of every service at `server`.
    pub fn at_server(&self, server: usize) -> &[bool] {
        &self.bits[server * self.services..(server + 1) * self.services]
    }

    pub fn set_server(&mut self, server: usize, flags: &[bool]) {
        self.bits[server * self.services..(server + 1) * self.services].copy_from_slice(flags);
    }

    pub fn placed_services(&self, server: usize) -> impl Iterator<Item = usize> + '_ {
        self.at_server(server)
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
    }

    pub fn used_storage(&self, server: usize, services: &[ServiceSpec]) -> Volume {
        self.placed_services(server).map(|i| services[i].image_size).sum()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Placement, offload targets and remaining lifetimes in one slot.
///
/// The offload tensor is stored as one target per (service, server), which makes
/// "exactly one target" hold by construction; [`SystemState::offloads_to`]
/// recovers the binary form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub placement: Placement,
    pub offload: Vec<Target>,
    pub lifetime: Vec<u32>,
}

impl SystemState {
    /// The all-zero state preceding the first slot.
    pub fn initial(services: usize, servers: usize) -> Self {
        SystemState {
            placement: Placement::empty(services, servers),
            offload: vec![Target::Cloud; services * servers],
            lifetime: vec![0; services * servers],
        }
    }

    /// Completes a placement decision into a state: offloads are chosen by
    /// [`best_offload`] and lifetimes advanced from `prev`.
    pub fn advance(
        prev: &SystemState,
        placement: Placement,
        services: &[ServiceSpec],
        topo: &Topology,
    ) -> Result<Self> {
        let s = services.len();
        let n = topo.n_servers();
        if placement.n_services() != s || placement.n_servers() != n {
            return Err(Error::Shape("placement does not match the instance".into()));
        }
        let mut lifetime = Vec::with_capacity(s * n);
        for j in 0..n {
            for (i, svc) in services.iter().enumerate() {
                lifetime.push(advance_lifetime(
                    prev.lifetime(i, j),
                    prev.placement.is_placed(i, j),
                    placement.is_placed(i, j),
                    svc.refresh_interval,
                )?);
            }
        }
        let offload = resolve_offloads(&placement, topo);
        Ok(SystemState {
            placement,
            offload,
            lifetime,
        })
    }

    pub fn n_services(&self) -> usize {
        self.placement.n_services()
    }

    pub fn n_servers(&self) -> usize {
        self.placement.n_servers()
    }

    pub fn lifetime(&self, service: usize, server: usize) -> u32 {
        self.lifetime[server * self.n_services() + service]
    }

    pub fn target(&self, service: usize, server: usize) -> Target {
        self.offload[server * self.n_services() + service]
    }

    /// Binary offload indicator `y[i][j][k]`, with `k = 0` the cloud.
    pub fn offloads_to(&self, service: usize, server: usize, k: usize) -> bool {
        self.target(service, server).index() == k
    }

    /// Checks storage, offload-target validity and lifetime ranges.
    pub fn validate(&self, services: &[ServiceSpec], topo: &Topology, slot: usize) -> Result<()> {
        let s = services.len();
        let n = topo.n_servers();
        if self.n_services() != s
            || self.n_servers() != n
            || self.offload.len() != s * n
            || self.lifetime.len() != s * n
        {
            return Err(Error::Shape(format!("state in slot {slot} does not match the instance")));
        }
        for j in 0..n {
            let used = self.placement.used_storage(j, services);
            if used > topo.storage(j) {
                return Err(Error::StorageExceeded {
                    slot,
                    server: j,
                    used: used.0,
                    capacity: topo.storage(j).0,
                });
            }
            for (i, svc) in services.iter().enumerate() {
                let target = self.target(i, j);
                let valid = match target {
                    Target::Cloud => true,
                    Target::Edge(k) => k < n && self.placement.is_placed(i, k),
                };
                if !valid {
                    return Err(Error::InvalidOffload {
                        slot,
                        service: i,
                        server: j,
                        target: target.to_string(),
                    });
                }
                if self.placement.is_placed(i, j) && self.lifetime(i, j) > svc.refresh_interval {
                    return Err(Error::InvalidLifetime(format!(
                        "slot {slot}: service {i} at server {j} has lifetime {} above its interval {}",
                        self.lifetime(i, j),
                        svc.refresh_interval
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Services, topology and demand for one problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub services: Vec<ServiceSpec>,
    pub topology: Topology,
    pub requests: RequestMatrix,
}

impl Instance {
    pub fn new(services: Vec<ServiceSpec>, topology: Topology, requests: RequestMatrix) -> Result<Self> {
        for (i, svc) in services.iter().enumerate() {
            svc.validate()?;
            if svc.id != i {
                return Err(Error::InvalidService {
                    service: i,
                    reason: format!("id {} does not match its position", svc.id),
                });
            }
        }
        if requests.n_services() != services.len() || requests.n_servers() != topology.n_servers() {
            return Err(Error::Shape(format!(
                "requests cover {} services x {} servers, instance has {} x {}",
                requests.n_services(),
                requests.n_servers(),
                services.len(),
                topology.n_servers()
            )));
        }
        Ok(Instance {
            services,
            topology,
            requests,
        })
    }

    pub fn n_services(&self) -> usize {
        self.services.len()
    }

    pub fn n_servers(&self) -> usize {
        self.topology.n_servers()
    }

    pub fn horizon(&self) -> usize {
        self.requests.horizon()
    }

    pub fn truncated(&self, horizon: usize) -> Self {
        Instance {
            services: self.services.clone(),
            topology: self.topology.clone(),
            requests: self.requests.truncated(horizon),
        }
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState::initial(self.n_services(), self.n_servers())
    }
}
