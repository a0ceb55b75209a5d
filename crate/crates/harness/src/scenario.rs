//! Scenario files: a TOML description of the topology, service catalogue,
//! workload and solver settings, from which one instance is built per seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use trsp_core::dva::{DvaConfig, SpatialFactor};
use trsp_core::workload::{
    generate_services, generate_synthetic, grid_topology, ingest_trace, read_trace, road_servers, synthesize_trace,
    SampleTraceConfig, ServiceGenConfig, SyntheticConfig, TraceConfig, TraceRecord,
};
use trsp_core::{Instance, Topology, Volume};

use crate::error::{config, HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dva,
    Greedy,
    Popular,
    Rr,
    Optimal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Dva,
        Algorithm::Greedy,
        Algorithm::Popular,
        Algorithm::Rr,
        Algorithm::Optimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dva => "dva",
            Algorithm::Greedy => "greedy",
            Algorithm::Popular => "popular",
            Algorithm::Rr => "rr",
            Algorithm::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm `{s}` (expected dva, greedy, popular, rr or optimal)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Theta,
    Delta,
    StorageRatio,
    ZipfShape,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Theta => "theta",
            SweepParameter::Delta => "delta",
            SweepParameter::StorageRatio => "storage_ratio",
            SweepParameter::ZipfShape => "zipf_shape",
        }
    }

    pub fn check(self, value: f64) -> Result<()> {
        let ok = match self {
            SweepParameter::Theta => (0.0..=1.0).contains(&value),
            SweepParameter::Delta => value >= 1.0 && value.is_finite(),
            SweepParameter::StorageRatio => value > 0.0 && value <= 1.0,
            SweepParameter::ZipfShape => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            config(format!("sweep value {value} is out of range for {}", self.name()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return config(format!("sweep over {} has no values", self.parameter.name()));
        }
        self.values.iter().try_for_each(|&v| self.parameter.check(v))
    }
}

/// One point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub parameter: SweepParameter,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    #[default]
    Single,
    Grid,
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub rows: usize,
    pub cols: usize,
    pub hop_coefficient: f64,
    /// Edge-to-edge coefficients for `kind = "matrix"`.
    pub gamma: Option<Vec<Vec<f64>>>,
    /// Storage per server in GB.
    pub storage_gb: Option<f64>,
    /// Storage per server as a fraction of the catalogue's total image size.
    pub storage_ratio: Option<f64>,
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            kind: TopologyKind::Single,
            rows: 1,
            cols: 1,
            hop_coefficient: 0.3,
            gamma: None,
            storage_gb: None,
            storage_ratio: None,
        }
    }
}

impl TopologySpec {
    pub fn n_servers(&self) -> usize {
        match self.kind {
            TopologyKind::Single => 1,
            TopologyKind::Grid => self.rows * self.cols,
            TopologyKind::Matrix => self.gamma.as_ref().map_or(0, Vec::len),
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.storage_gb, self.storage_ratio) {
            (Some(_), Some(_)) => return config("topology sets both storage_gb and storage_ratio"),
            (None, None) => return config("topology needs storage_gb or storage_ratio"),
            (Some(gb), None) if !(gb > 0.0 && gb.is_finite()) => {
                return config(format!("storage_gb {gb} must be positive"))
            }
            (None, Some(r)) => SweepParameter::StorageRatio.check(r)?,
            _ => {}
        }
        match self.kind {
            TopologyKind::Grid if self.rows == 0 || self.cols == 0 => config("grid needs positive rows and cols"),
            TopologyKind::Matrix if self.gamma.as_ref().is_none_or(Vec::is_empty) => {
                config("matrix topology needs a non-empty gamma table")
            }
            _ => Ok(()),
        }
    }

    fn build(&self, storage_gb: f64) -> Result<Topology> {
        let topo = match self.kind {
            TopologyKind::Single => Topology::single_server(Volume::from_gb(storage_gb))?,
            TopologyKind::Grid => grid_topology(self.rows, self.cols, self.hop_coefficient, storage_gb)?,
            TopologyKind::Matrix => {
                let gamma = self.gamma.as_deref().unwrap_or_default();
                Topology::from_edge_matrix(&vec![storage_gb; gamma.len()], gamma)?
            }
        };
        Ok(topo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServicesSpec {
    pub count: usize,
    pub size_gb: (f64, f64),
    pub offload_ratio: (f64, f64),
    pub refresh_ratio: (f64, f64),
    pub place_ratio: f64,
    pub mean_lifetime: f64,
    pub fixed_lifetime: Option<u32>,
}

impl Default for ServicesSpec {
    fn default() -> Self {
        let g = ServiceGenConfig::default();
        ServicesSpec {
            count: 100,
            size_gb: g.size_gb,
            offload_ratio: g.offload_ratio,
            refresh_ratio: g.refresh_ratio,
            place_ratio: g.place_ratio,
            mean_lifetime: g.mean_lifetime,
            fixed_lifetime: g.fixed_lifetime,
        }
    }
}

impl ServicesSpec {
    fn generator(&self, seed: u64) -> ServiceGenConfig {
        ServiceGenConfig {
            size_gb: self.size_gb,
            offload_ratio: self.offload_ratio,
            refresh_ratio: self.refresh_ratio,
            place_ratio: self.place_ratio,
            mean_lifetime: self.mean_lifetime,
            fixed_lifetime: self.fixed_lifetime,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadSource {
    #[default]
    Synthetic,
    Trace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSpec {
    /// Trace CSV, relative to the scenario file. A synthetic road trace is
    /// generated when absent.
    pub path: Option<PathBuf>,
    pub coverage_radius_m: f64,
    pub requests_per_taxi_per_slot: u32,
    pub slot_minutes: u32,
    pub start_minute: Option<i64>,
    /// Position (latitude, longitude) of server 0, the easternmost.
    pub east: (f64, f64),
    pub spacing_m: f64,
    pub sample: SampleSpec,
}

impl Default for TraceSpec {
    fn default() -> Self {
        let t = TraceConfig::default();
        TraceSpec {
            path: None,
            coverage_radius_m: t.coverage_radius_m,
            requests_per_taxi_per_slot: t.requests_per_taxi_per_slot,
            slot_minutes: t.slot_minutes,
            start_minute: None,
            east: (31.22, 121.45),
            spacing_m: 2000.0,
            sample: SampleSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub taxis: usize,
    pub minutes: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        let s = SampleTraceConfig::default();
        SampleSpec {
            taxis: s.taxis,
            minutes: s.minutes,
            seed: s.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub source: WorkloadSource,
    pub horizon: usize,
    pub zipf_shape: f64,
    pub rerank_prob: f64,
    pub users_per_server: u32,
    pub requests_per_user_per_slot: u32,
    pub noise_low: f64,
    pub noise_high: f64,
    pub trace: TraceSpec,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        let s = SyntheticConfig::default();
        WorkloadSpec {
            source: WorkloadSource::Synthetic,
            horizon: s.horizon,
            zipf_shape: s.zipf_shape,
            rerank_prob: s.rerank_prob,
            users_per_server: s.users_per_server,
            requests_per_user_per_slot: s.requests_per_user_per_slot,
            noise_low: s.noise_low,
            noise_high: s.noise_high,
            trace: TraceSpec::default(),
        }
    }
}

/// `delta = 2.0`, `delta = "reciprocal"`, or `delta = "table.csv"` holding one
/// row per server and one column per service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Factor(f64),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DvaSpec {
    pub theta: f64,
    pub delta: DeltaSpec,
    pub horizon_epsilon: f64,
    pub capacity_quantum_gb: f64,
}

impl Default for DvaSpec {
    fn default() -> Self {
        let d = DvaConfig::default();
        DvaSpec {
            theta: d.theta,
            delta: DeltaSpec::Factor(2.0),
            horizon_epsilon: d.horizon_epsilon,
            capacity_quantum_gb: d.capacity_quantum_gb,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimalSpec {
    pub node_budget: u64,
}

impl Default for OptimalSpec {
    fn default() -> Self {
        OptimalSpec {
            node_budget: trsp_core::optimal::DEFAULT_NODE_BUDGET,
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Dva, Algorithm::Greedy, Algorithm::Popular, Algorithm::Rr]
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub services: ServicesSpec,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub dva: DvaSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub optimal: OptimalSpec,
}

impl Scenario {
    /// Parses TOML; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
        scenario.validate().map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{origin}: {msg}")),
            other => other,
        })?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.services.count == 0 {
            return config("services.count must be positive");
        }
        if self.workload.horizon == 0 {
            return config("workload.horizon must be positive");
        }
        self.topology.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        SweepParameter::Theta.check(self.dva.theta)?;
        if let DeltaSpec::Factor(d) = self.dva.delta {
            SweepParameter::Delta.check(d)?;
        }
        Ok(())
    }
}

/// Derives independent per-purpose seeds from a run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SERVICE_STREAM: u64 = 1;
const WORKLOAD_STREAM: u64 = 2;

/// A parsed scenario with its resolved external inputs.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
    trace: Option<Arc<Vec<TraceRecord>>>,
    delta_table: Option<Arc<Vec<f64>>>,
}

impl LoadedScenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let scenario = Scenario::from_toml(&text, &path.display().to_string())?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        LoadedScenario::new(scenario, base_dir)
    }

    pub fn new(scenario: Scenario, base_dir: PathBuf) -> Result<Self> {
        scenario.validate()?;
        let mut loaded = LoadedScenario {
            scenario,
            base_dir,
            trace: None,
            delta_table: None,
        };
        loaded.resolve_inputs()?;
        Ok(loaded)
    }

    fn resolve_inputs(&mut self) -> Result<()> {
        let spec = &self.scenario;
        if spec.workload.source == WorkloadSource::Trace {
            let trace = &spec.workload.trace;
            let records = match &trace.path {
                Some(rel) => {
                    let path = self.base_dir.join(rel);
                    let file = std::fs::File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
                    let (records, rejected) = read_trace(file)?;
                    if !rejected.is_empty() {
                        log::warn!("{}: skipped {} malformed lines", path.display(), rejected.len());
                    }
                    records
                }
                None => synthesize_trace(&SampleTraceConfig {
                    taxis: trace.sample.taxis,
                    minutes: trace.sample.minutes,
                    servers: self.server_positions(),
                    seed: trace.sample.seed,
                    ..SampleTraceConfig::default()
                }),
            };
            self.trace = Some(Arc::new(records));
        }
        if let DeltaSpec::Named(name) = &spec.dva.delta {
            if name != "reciprocal" {
                let path = self.base_dir.join(name);
                self.delta_table = Some(Arc::new(read_delta_table(&path, spec)?));
            }
        }
        Ok(())
    }

    pub fn server_positions(&self) -> Vec<(f64, f64)> {
        let trace = &self.scenario.workload.trace;
        road_servers(self.scenario.topology.n_servers(), trace.east, trace.spacing_m)
    }

    pub fn with_overrides(&self, theta: Option<f64>, delta: Option<f64>) -> Result<Self> {
        let mut next = self.clone();
        if let Some(t) = theta {
            SweepParameter::Theta.check(t)?;
            next.scenario.dva.theta = t;
        }
        if let Some(d) = delta {
            SweepParameter::Delta.check(d)?;
            next.scenario.dva.delta = DeltaSpec::Factor(d);
            next.delta_table = None;
        }
        Ok(next)
    }

    pub fn dva_config(&self, point: Option<SweepPoint>) -> Result<DvaConfig> {
        let spec = &self.scenario.dva;
        let mut cfg = DvaConfig {
            theta: spec.theta,
            delta: match (&spec.delta, &self.delta_table) {
                (DeltaSpec::Factor(d), _) => SpatialFactor::Scalar(*d),
                (DeltaSpec::Named(_), Some(table)) => SpatialFactor::Table(table.to_vec()),
                (DeltaSpec::Named(_), None) => SpatialFactor::Reciprocal,
            },
            horizon_epsilon: spec.horizon_epsilon,
            capacity_quantum_gb: spec.capacity_quantum_gb,
        };
        match point {
            Some(SweepPoint {
                parameter: SweepParameter::Theta,
                value,
            }) => cfg.theta = value,
            Some(SweepPoint {
                parameter: SweepParameter::Delta,
                value,
            }) => cfg.delta = SpatialFactor::Scalar(value),
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds the instance for `seed` at an optional sweep point.
    pub fn instance(&self, seed: u64, point: Option<SweepPoint>) -> Result<Instance> {
        let spec = &self.scenario;
        let services = generate_services(
            spec.services.count,
            &spec.services.generator(derive_seed(seed, SERVICE_STREAM)),
        )?;
        let storage_ratio = match point {
            Some(SweepPoint {
                parameter: SweepParameter::StorageRatio,
                value,
            }) => Some(value),
            _ => spec.topology.storage_ratio,
        };
        let storage_gb = match (storage_ratio, spec.topology.storage_gb) {
            (Some(ratio), _) => ratio * services.iter().map(|s| s.image_size.as_gb()).sum::<f64>(),
            (None, Some(gb)) => gb,
            (None, None) => return config("topology needs storage_gb or storage_ratio"),
        };
        let topology = spec.topology.build(storage_gb)?;
        let zipf_shape = match point {
            Some(SweepPoint {
                parameter: SweepParameter::ZipfShape,
                value,
            }) => value,
            _ => spec.workload.zipf_shape,
        };
        let w = &spec.workload;
        let workload_seed = derive_seed(seed, WORKLOAD_STREAM);
        let requests = match w.source {
            WorkloadSource::Synthetic => generate_synthetic(&SyntheticConfig {
                n_services: services.len(),
                n_servers: topology.n_servers(),
                horizon: w.horizon,
                zipf_shape,
                rerank_prob: w.rerank_prob,
                users_per_server: w.users_per_server,
                requests_per_user_per_slot: w.requests_per_user_per_slot,
                noise_low: w.noise_low,
                noise_high: w.noise_high,
                seed: workload_seed,
            })?,
            WorkloadSource::Trace => {
                let records = self.trace.as_deref().map(Vec::as_slice).unwrap_or_default();
                let cfg = TraceConfig {
                    servers: self.server_positions(),
                    coverage_radius_m: w.trace.coverage_radius_m,
                    requests_per_taxi_per_slot: w.trace.requests_per_taxi_per_slot,
                    zipf_shape,
                    rerank_prob: w.rerank_prob,
                    noise_low: w.noise_low,
                    noise_high: w.noise_high,
                    seed: workload_seed,
                    slot_minutes: w.trace.slot_minutes,
                    start_minute: w.trace.start_minute,
                    horizon: Some(w.horizon),
                    bounding_box: None,
                };
                ingest_trace(records, services.len(), &cfg)?.requests
            }
        };
        Ok(Instance::new(services, topology, requests)?)
    }
}

fn read_delta_table(path: &Path, spec: &Scenario) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if record.len() != spec.services.count {
            return config(format!(
                "{}: row {} has {} columns, expected one per service ({})",
                path.display(),
                rows + 1,
                record.len(),
                spec.services.count
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("{}: `{field}` is not a number", path.display())))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != spec.topology.n_servers() {
        return config(format!(
            "{}: {rows} rows, expected one per server ({})",
            path.display(),
            spec.topology.n_servers()
        ));
    }
    Ok(values)
}
