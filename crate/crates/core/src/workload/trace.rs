use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{requests_from_totals, validate_noise, Popularity};
use crate::error::{Error, Result};
use crate::model::RequestMatrix;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Distances closer than this count as ties.
const TIE_TOLERANCE_M: f64 = 1e-6;

const COLUMNS: [&str; 6] = ["taxi_id", "longitude", "latitude", "velocity", "heading", "timestamp"];
const DATETIME_FORMATS: [&str; 2] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

/// One GPS fix. `timestamp` is in whole minutes, since the Unix epoch when read
/// from a date-time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub taxi_id: String,
    pub longitude: f64,
    pub latitude: f64,
    pub velocity: f64,
    pub heading: f64,
    pub timestamp: i64,
}

/// Great-circle distance in metres between two (latitude, longitude) points in degrees.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1) = (a.0.to_radians(), a.1.to_radians());
    let (la2, lo2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// `n` positions spaced `spacing_m` apart heading west from `east`, which is server 0.
pub fn road_servers(n: usize, east: (f64, f64), spacing_m: f64) -> Vec<(f64, f64)> {
    let step = metres_to_lon(spacing_m, east.0);
    (0..n).map(|k| (east.0, east.1 - step * k as f64)).collect()
}

fn metres_to_lon(m: f64, lat: f64) -> f64 {
    (m / (EARTH_RADIUS_M * lat.to_radians().cos())).to_degrees()
}

fn metres_to_lat(m: f64) -> f64 {
    (m / EARTH_RADIUS_M).to_degrees()
}

fn parse_timestamp(raw: &str) -> std::result::Result<i64, String> {
    let raw = raw.trim();
    if let Ok(m) = raw.parse::<i64>() {
        return Ok(m);
    }
    DATETIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|dt| dt.and_utc().timestamp().div_euclid(60))
        .ok_or_else(|| format!("unrecognised timestamp {raw:?}"))
}

fn format_timestamp(minutes: i64) -> String {
    DateTime::from_timestamp(minutes * 60, 0)
        .map(|dt| dt.format(DATETIME_FORMATS[0]).to_string())
        .unwrap_or_else(|| minutes.to_string())
}

/// Reads a headed trace CSV. Malformed lines are skipped and reported as
/// `(line, reason)`.
pub fn read_trace(input: impl Read) -> Result<(Vec<TraceRecord>, Vec<(u64, String)>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Trace(e.to_string()))?.clone();
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Trace(format!("missing column {name}")))?;
    }
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                skipped.push((line, e.to_string()));
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(index[k]).ok_or_else(|| format!("missing {}", COLUMNS[k]));
        let number = |k: usize| -> std::result::Result<f64, String> {
            let raw = field(k)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{} {raw:?} is not a number", COLUMNS[k]))
        };
        let parsed = (|| {
            Ok::<_, String>(TraceRecord {
                taxi_id: field(0)?.to_string(),
                longitude: number(1)?,
                latitude: number(2)?,
                velocity: number(3)?,
                heading: number(4)?,
                timestamp: parse_timestamp(field(5)?)?,
            })
        })();
        match parsed {
            Ok(r) if !(-90.0..=90.0).contains(&r.latitude) || !(-180.0..=180.0).contains(&r.longitude) => {
                skipped.push((line, "coordinates out of range".into()))
            }
            Ok(r) => records.push(r),
            Err(reason) => skipped.push((line, reason)),
        }
    }
    if !skipped.is_empty() {
        log::warn!("skipped {} malformed trace lines", skipped.len());
    }
    Ok((records, skipped))
}

pub fn write_trace(records: &[TraceRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(COLUMNS).map_err(err)?;
    for r in records {
        w.write_record([
            r.taxi_id.clone(),
            format!("{:.6}", r.longitude),
            format!("{:.6}", r.latitude),
            format!("{:.1}", r.velocity),
            format!("{:.1}", r.heading),
            format_timestamp(r.timestamp),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Trace(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Server positions as (latitude, longitude).
    pub servers: Vec<(f64, f64)>,
    pub coverage_radius_m: f64,
    pub requests_per_taxi_per_slot: u32,
    pub zipf_shape: f64,
    pub rerank_prob: f64,
    pub noise_low: f64,
    pub noise_high: f64,
    pub seed: u64,
    pub slot_minutes: u32,
    /// First minute of slot 0; defaults to the earliest record.
    pub start_minute: Option<i64>,
    /// Number of slots; defaults to the span of the records.
    pub horizon: Option<usize>,
    /// Records outside (min_lat, min_lon, max_lat, max_lon) are dropped.
    pub bounding_box: Option<(f64, f64, f64, f64)>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            servers: road_servers(4, (31.22, 121.45), 2000.0),
            coverage_radius_m: 1000.0,
            requests_per_taxi_per_slot: 12,
            zipf_shape: 0.6,
            rerank_prob: 0.3,
            noise_low: 0.7,
            noise_high: 1.3,
            seed: 0,
            slot_minutes: 1,
            start_minute: None,
            horizon: None,
            bounding_box: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceIngest {
    pub requests: RequestMatrix,
    /// Taxis counted per (slot, server), slot-major.
    pub taxi_counts: Vec<u32>,
    pub outside_coverage: usize,
    pub outside_box: usize,
    pub outside_window: usize,
    pub non_monotone: usize,
    pub duplicates: usize,
}

/// Counts taxis in coverage per slot and server, each taxi going to its nearest
/// covering server (lower id on ties) and counted once per slot, then splits
/// the resulting request totals across services.
pub fn ingest_trace(records: &[TraceRecord], n_services: usize, cfg: &TraceConfig) -> Result<TraceIngest> {
    let n = cfg.servers.len();
    if n == 0 || n_services == 0 {
        return Err(Error::Config("trace ingest needs servers and services".into()));
    }
    if cfg.slot_minutes == 0 || !(cfg.coverage_radius_m > 0.0) {
        return Err(Error::Config("slot length and coverage radius must be positive".into()));
    }
    if !(cfg.zipf_shape > 0.0) || !(0.0..=1.0).contains(&cfg.rerank_prob) {
        return Err(Error::Config("invalid popularity parameters".into()));
    }
    validate_noise(cfg.noise_low, cfg.noise_high)?;

    let start = cfg
        .start_minute
        .or_else(|| records.iter().map(|r| r.timestamp).min())
        .unwrap_or(0);
    let span = records
        .iter()
        .filter(|r| r.timestamp >= start)
        .map(|r| ((r.timestamp - start) / cfg.slot_minutes as i64) as usize + 1)
        .max()
        .unwrap_or(1);
    let horizon = cfg.horizon.unwrap_or(span).max(1);

    let mut counts = vec![0u32; horizon * n];
    let mut out = TraceIngest {
        requests: RequestMatrix::zeros(n_services, n, horizon),
        taxi_counts: Vec::new(),
        outside_coverage: 0,
        outside_box: 0,
        outside_window: 0,
        non_monotone: 0,
        duplicates: 0,
    };
    let mut last_seen: HashMap<&str, i64> = HashMap::new();
    let mut counted: HashSet<(usize, &str)> = HashSet::new();
    for r in records {
        if let Some(&prev) = last_seen.get(r.taxi_id.as_str()) {
            if r.timestamp < prev {
                out.non_monotone += 1;
                continue;
            }
        }
        last_seen.insert(&r.taxi_id, r.timestamp);
        if let Some((la0, lo0, la1, lo1)) = cfg.bounding_box {
            if !(la0..=la1).contains(&r.latitude) || !(lo0..=lo1).contains(&r.longitude) {
                out.outside_box += 1;
                continue;
            }
        }
        if r.timestamp < start {
            out.outside_window += 1;
            continue;
        }
        let slot = ((r.timestamp - start) / cfg.slot_minutes as i64) as usize;
        if slot >= horizon {
            out.outside_window += 1;
            continue;
        }
        let pos = (r.latitude, r.longitude);
        let mut nearest: Option<(usize, f64)> = None;
        for (j, &server) in cfg.servers.iter().enumerate() {
            let dist = haversine_m(pos, server);
            if dist <= cfg.coverage_radius_m && nearest.is_none_or(|(_, best)| dist < best - TIE_TOLERANCE_M) {
                nearest = Some((j, dist));
            }
        }
        let Some((j, _)) = nearest else {
            out.outside_coverage += 1;
            continue;
        };
        if !counted.insert((slot, r.taxi_id.as_str())) {
            out.duplicates += 1;
            continue;
        }
        counts[slot * n + j] += 1;
    }

    let totals: Vec<u64> = counts
        .iter()
        .map(|&c| c as u64 * cfg.requests_per_taxi_per_slot as u64)
        .collect();
    let mut popularity = Popularity::new(n_services, cfg.zipf_shape, cfg.rerank_prob, cfg.seed);
    out.requests = requests_from_totals(
        &totals,
        n_services,
        n,
        &mut popularity,
        (cfg.noise_low, cfg.noise_high),
        cfg.seed,
    )?;
    out.taxi_counts = counts;
    Ok(out)
}

/// Parameters for a synthetic taxi trace along a straight east-west road.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleTraceConfig {
    pub taxis: usize,
    pub minutes: usize,
    pub servers: Vec<(f64, f64)>,
    /// Road extension beyond the outermost servers, in metres.
    pub margin_m: f64,
    pub speed_kmh: (f64, f64),
    pub start_minute: i64,
    pub seed: u64,
}

impl Default for SampleTraceConfig {
    fn default() -> Self {
        SampleTraceConfig {
            taxis: 240,
            minutes: 60,
            servers: road_servers(4, (31.22, 121.45), 2000.0),
            margin_m: 1500.0,
            speed_kmh: (20.0, 60.0),
            // 2007-02-20 08:00 UTC
            start_minute: 1_171_958_400 / 60,
            seed: 7,
        }
    }
}

/// Taxis bouncing along the road through the servers at random speeds, with a
/// small lateral jitter; one record per taxi per minute.
pub fn synthesize_trace(cfg: &SampleTraceConfig) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let Some(&(lat, _)) = cfg.servers.first() else {
        return Vec::new();
    };
    let west = cfg.servers.iter().map(|s| s.1).fold(f64::INFINITY, f64::min) - metres_to_lon(cfg.margin_m, lat);
    let east = cfg.servers.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max) + metres_to_lon(cfg.margin_m, lat);
    let mut taxis: Vec<(f64, f64, f64)> = (0..cfg.taxis)
        .map(|_| {
            let lon = rng.random_range(west..east);
            let offset = metres_to_lat(rng.random_range(-150.0..150.0));
            let speed = rng.random_range(cfg.speed_kmh.0..cfg.speed_kmh.1);
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (lon, lat + offset, dir * speed)
        })
        .collect();
    let mut records = Vec::with_capacity(cfg.taxis * cfg.minutes);
    for minute in 0..cfg.minutes {
        for (k, taxi) in taxis.iter_mut().enumerate() {
            records.push(TraceRecord {
                taxi_id: format!("taxi{k:04}"),
                longitude: taxi.0,
                latitude: taxi.1,
                velocity: taxi.2.abs(),
                heading: if taxi.2 > 0.0 { 90.0 } else { 270.0 },
                timestamp: cfg.start_minute + minute as i64,
            });
            let step = metres_to_lon(taxi.2 * 1000.0 / 60.0, lat);
            taxi.0 += step;
            if taxi.0 > east || taxi.0 < west {
                taxi.0 = taxi.0.clamp(west, east);
                taxi.2 = -taxi.2;
            }
        }
    }
    records
}
