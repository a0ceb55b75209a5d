//! Demand generation: Zipf-distributed requests under a re-ranking popularity
//! process, grid topologies, random service catalogues and taxi traces.

mod trace;

pub use trace::{
    haversine_m, ingest_trace, read_trace, road_servers, synthesize_trace, write_trace, SampleTraceConfig,
    TraceConfig, TraceIngest, TraceRecord, EARTH_RADIUS_M,
};

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RequestMatrix, ServiceSpec, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_services: usize,
    pub n_servers: usize,
    pub horizon: usize,
    pub zipf_shape: f64,
    pub rerank_prob: f64,
    pub users_per_server: u32,
    pub requests_per_user_per_slot: u32,
    pub noise_low: f64,
    pub noise_high: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_services: 100,
            n_servers: 16,
            horizon: 20,
            zipf_shape: 0.6,
            rerank_prob: 0.3,
            users_per_server: 1000,
            requests_per_user_per_slot: 1,
            noise_low: 0.7,
            noise_high: 1.3,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_services == 0 || self.n_servers == 0 || self.horizon == 0 {
            return Err(Error::Config("services, servers and horizon must be positive".into()));
        }
        if !(self.zipf_shape > 0.0 && self.zipf_shape.is_finite()) {
            return Err(Error::Config(format!("zipf_shape {} must be positive", self.zipf_shape)));
        }
        if !(0.0..=1.0).contains(&self.rerank_prob) {
            return Err(Error::Config(format!("rerank_prob {} outside [0, 1]", self.rerank_prob)));
        }
        validate_noise(self.noise_low, self.noise_high)
    }
}

pub(crate) fn validate_noise(low: f64, high: f64) -> Result<()> {
    if !(low >= 0.0 && low <= high && high.is_finite()) {
        return Err(Error::Config(format!("noise bounds [{low}, {high}] are invalid")));
    }
    Ok(())
}

/// Service ranks that are redrawn as a uniform permutation with probability
/// `rerank_prob` at the start of every slot. Rank 1 is the most popular; the
/// first slot starts from rank `i + 1` for service `i`.
#[derive(Clone, Debug)]
pub struct Popularity {
    ranks: Vec<usize>,
    shape: f64,
    rerank_prob: f64,
    rng: ChaCha8Rng,
}

impl Popularity {
    pub fn new(n_services: usize, shape: f64, rerank_prob: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        Popularity {
            ranks: (1..=n_services).collect(),
            shape,
            rerank_prob,
            rng,
        }
    }

    /// Advances to the next slot and returns each service's Zipf weight.
    pub fn next_weights(&mut self) -> Vec<f64> {
        if self.rng.random_bool(self.rerank_prob) {
            self.ranks.shuffle(&mut self.rng);
        }
        self.weights()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    fn weights(&self) -> Vec<f64> {
        self.ranks.iter().map(|&r| (r as f64).powf(-self.shape)).collect()
    }
}

/// Splits `total` requests across services by multinomial sampling with
/// probabilities proportional to `weights`.
pub fn split_requests(total: u64, weights: &[f64], rng: &mut impl Rng) -> Vec<u32> {
    let mut out = vec![0u32; weights.len()];
    let mut left = total;
    let mut mass: f64 = weights.iter().sum();
    for (k, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == weights.len() {
            out[k] = left as u32;
            break;
        }
        let p = if mass > 0.0 { (w / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, p).expect("probability is clamped").sample(rng);
        out[k] = draw as u32;
        left -= draw;
        mass -= w;
    }
    out
}

/// Noisy forecast of `actual`, multiplied elementwise by `U(low, high)` and rounded.
pub fn perturb(actual: &[u32], low: f64, high: f64, rng: &mut impl Rng) -> Vec<u32> {
    actual
        .iter()
        .map(|&a| {
            let m = if low == high { low } else { rng.random_range(low..high) };
            (a as f64 * m).round() as u32
        })
        .collect()
}

fn slot_rng(seed: u64, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot as u64 + 1);
    rng
}

/// Per-slot request totals at each server (slot-major) split across services by
/// the popularity process, with forecasts drawn from the noise model.
pub fn requests_from_totals(
    totals: &[u64],
    n_services: usize,
    n_servers: usize,
    popularity: &mut Popularity,
    noise: (f64, f64),
    seed: u64,
) -> Result<RequestMatrix> {
    let horizon = totals.len() / n_servers.max(1);
    let mut actual = Vec::with_capacity(n_services * n_servers * horizon);
    let mut predicted = Vec::with_capacity(actual.capacity());
    for t in 0..horizon {
        let weights = popularity.next_weights();
        let mut rng = slot_rng(seed, t);
        for j in 0..n_servers {
            let split = split_requests(totals[t * n_servers + j], &weights, &mut rng);
            predicted.extend(perturb(&split, noise.0, noise.1, &mut rng));
            actual.extend(split);
        }
    }
    RequestMatrix::new(n_services, n_servers, horizon, actual, predicted)
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<RequestMatrix> {
    cfg.validate()?;
    let per_server = cfg.users_per_server as u64 * cfg.requests_per_user_per_slot as u64;
    let totals = vec![per_server; cfg.n_servers * cfg.horizon];
    let mut popularity = Popularity::new(cfg.n_services, cfg.zipf_shape, cfg.rerank_prob, cfg.seed);
    requests_from_totals(
        &totals,
        cfg.n_services,
        cfg.n_servers,
        &mut popularity,
        (cfg.noise_low, cfg.noise_high),
        cfg.seed,
    )
}

/// Ranges for drawing a service catalogue. Ratios are relative to the image size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceGenConfig {
    pub size_gb: (f64, f64),
    pub offload_ratio: (f64, f64),
    pub refresh_ratio: (f64, f64),
    pub place_ratio: f64,
    pub mean_lifetime: f64,
    /// Overrides the drawn lifetime for every service.
    pub fixed_lifetime: Option<u32>,
    pub seed: u64,
}

impl Default for ServiceGenConfig {
    fn default() -> Self {
        ServiceGenConfig {
            size_gb: (1.0, 3.0),
            offload_ratio: (0.05, 0.1),
            refresh_ratio: (0.5, 0.8),
            place_ratio: 1.0,
            mean_lifetime: 4.0,
            fixed_lifetime: None,
            seed: 0,
        }
    }
}

fn draw(range: (f64, f64), rng: &mut impl Rng) -> f64 {
    if range.0 >= range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Draws a catalogue: sizes uniform in `size_gb`, offload and refresh volumes as
/// uniform fractions of the size, and lifetimes exponential rounded to at least 1.
pub fn generate_services(n: usize, cfg: &ServiceGenConfig) -> Result<Vec<ServiceSpec>> {
    if !(cfg.mean_lifetime > 0.0) {
        return Err(Error::Config("mean_lifetime must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lifetime = Exp::new(1.0 / cfg.mean_lifetime).map_err(|e| Error::Config(e.to_string()))?;
    (0..n)
        .map(|i| {
            let r = draw(cfg.size_gb, &mut rng);
            let d = draw(cfg.offload_ratio, &mut rng) * r;
            let beta = draw(cfg.refresh_ratio, &mut rng) * r;
            let lf = lifetime.sample(&mut rng).round().max(1.0) as u32;
            ServiceSpec::from_gb(i, r, cfg.place_ratio * r, beta, d, cfg.fixed_lifetime.unwrap_or(lf))
        })
        .collect()
}

/// `rows x cols` grid of servers numbered row by row; the coefficient between
/// two servers is `hop_coefficient` times their Manhattan distance.
pub fn grid_topology(rows: usize, cols: usize, hop_coefficient: f64, storage_gb: f64) -> Result<Topology> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidTopology("grid needs at least one row and column".into()));
    }
    let n = rows * cols;
    let gamma: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let hops = (a / cols).abs_diff(b / cols) + (a % cols).abs_diff(b % cols);
                    hop_coefficient * hops as f64
                })
                .collect()
        })
        .collect();
    Topology::from_edge_matrix(&vec![storage_gb; n], &gamma)
}

#[derive(Serialize, Deserialize)]
struct RequestRow {
    slot: usize,
    server: usize,
    service: usize,
    actual: u32,
    predicted: u32,
}

/// Writes one `slot,server,service,actual,predicted` row per entry.
pub fn write_requests_csv(requests: &RequestMatrix, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidRequests(e.to_string());
    for t in 0..requests.horizon() {
        for j in 0..requests.n_servers() {
            for i in 0..requests.n_services() {
                w.serialize(RequestRow {
                    slot: t,
                    server: j,
                    service: i,
                    actual: requests.actual(i, j, t),
                    predicted: requests.predicted(i, j, t),
                })
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Error::InvalidRequests(e.to_string()))
}

/// Reads the format of [`write_requests_csv`]. Missing entries are zero.
pub fn read_requests_csv(input: impl Read) -> Result<RequestMatrix> {
    let mut rows = Vec::new();
    for (k, row) in csv::Reader::from_reader(input).deserialize::<RequestRow>().enumerate() {
        rows.push(row.map_err(|e| Error::InvalidRequests(format!("row {}: {e}", k + 1)))?);
    }
    let dim = |f: fn(&RequestRow) -> usize| rows.iter().map(f).max().map_or(0, |m| m + 1);
    let (h, n, s) = (dim(|r| r.slot), dim(|r| r.server), dim(|r| r.service));
    let mut actual = vec![0; s * n * h];
    let mut predicted = vec![0; s * n * h];
    for r in &rows {
        let k = (r.slot * n + r.server) * s + r.service;
        actual[k] = r.actual;
        predicted[k] = r.predicted;
    }
    RequestMatrix::new(s, n, h, actual, predicted)
}
