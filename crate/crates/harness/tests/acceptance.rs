//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p trsp-harness --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use trsp_core::bounds::{approximation_ratio_bound, check_submodularity};
use trsp_core::dva::{dva_run, keep_unchanged_cost, DvaConfig};
use trsp_core::optimal::{brute_force_oracle, solve_optimal};
use trsp_core::workload::{generate_services, generate_synthetic, grid_topology, ServiceGenConfig, SyntheticConfig};
use trsp_core::{Instance, RequestMatrix, ServiceSpec, Topology, Volume};
use trsp_harness::output::{MANIFEST_FILE, RESULTS_FILE, SLOT_COSTS_FILE, SUMMARY_FILE};
use trsp_harness::{execute, run_loaded, summarize, Algorithm, ExperimentPlan, LoadedScenario, RunRecord, SweepParameter, SweepSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Verdict;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> LoadedScenario {
    LoadedScenario::load(&scenario_path(name)).expect("shipped scenario loads")
}

fn plan_for(name: &str, loaded: &LoadedScenario) -> ExperimentPlan {
    ExperimentPlan::for_scenario(scenario_path(name), loaded, std::env::temp_dir())
}

fn totals(records: &[RunRecord], algorithm: Algorithm) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.algorithm == algorithm)
        .map(|r| r.metrics().expect("cell succeeded").total_gb)
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Single server, `s` services, horizon `horizon`, small demand and exact forecasts.
fn small_single(seed: u64, s: usize, horizon: usize) -> Instance {
    let services = generate_services(
        s,
        &ServiceGenConfig {
            mean_lifetime: 2.0,
            seed,
            ..ServiceGenConfig::default()
        },
    )
    .unwrap();
    let storage = 1.0 + (seed % 5) as f64;
    let requests = generate_synthetic(&SyntheticConfig {
        n_services: s,
        n_servers: 1,
        horizon,
        users_per_server: 40,
        noise_low: 1.0,
        noise_high: 1.0,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap();
    Instance::new(services, Topology::single_server(Volume::from_gb(storage)).unwrap(), requests).unwrap()
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut checked = 0;
    for k in 0..60u64 {
        let s = 1 + (k % 4) as usize;
        let horizon = 1 + ((k / 4) % 5) as usize;
        let inst = small_single(k, s, horizon);
        let dp = solve_optimal(&inst).unwrap();
        let brute = brute_force_oracle(&inst).unwrap();
        if dp.total_cost != brute.total_cost {
            return Verdict::new(
                false,
                format!("instance {k} (s={s}, T={horizon}): dp {} vs brute force {}", dp.total_cost.0, brute.total_cost.0),
            );
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    Verdict::new(
        elapsed < Duration::from_secs(60),
        format!("{checked} instances agree exactly in {:.1} s (limit 60 s)", elapsed.as_secs_f64()),
    )
}

fn approximation_ratio() -> Verdict {
    let start = Instant::now();
    let name = "single_server_oracle.toml";
    let loaded = load(name);
    let mut plan = plan_for(name, &loaded);
    plan.algorithms = vec![Algorithm::Optimal, Algorithm::Dva];
    let records = execute(&plan, &loaded).unwrap();
    let opt = totals(&records, Algorithm::Optimal);
    let dva = totals(&records, Algorithm::Dva);
    let mut ratios = Vec::new();
    let mut worst_bound: f64 = 0.0;
    let mut problems = Vec::new();
    for (k, &seed) in plan.seeds.iter().enumerate() {
        let bound = approximation_ratio_bound(&loaded.instance(seed, None).unwrap()).ratio_bound;
        let ratio = dva[k] / opt[k];
        worst_bound = worst_bound.max(bound);
        if ratio < 1.0 || ratio > bound {
            problems.push(format!("seed {seed}: ratio {ratio:.4} outside [1, {bound:.4}]"));
        }
        ratios.push(ratio);
    }
    let m = mean(&ratios);
    let elapsed = start.elapsed();
    let pass = plan.seeds.len() >= 20
        && problems.is_empty()
        && worst_bound <= 1.39
        && (1.0..=1.25).contains(&m)
        && elapsed < Duration::from_secs(120);
    let range = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    Verdict::new(
        pass,
        format!(
            "{} seeds, ratio {:.4}..{:.4} mean {m:.4} (need [1, 1.25]), largest bound {worst_bound:.4} (need <= 1.39), {:.1} s{}",
            ratios.len(),
            range.0,
            range.1,
            elapsed.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn lower_bound_sandwich() -> Verdict {
    let name = "grid_lower_bound.toml";
    let loaded = load(name);
    let settings = [
        ("theta=1 reciprocal", loaded.dva_config(None).unwrap()),
        ("theta=0.6 delta=2", DvaConfig::new(0.6, 2.0).unwrap()),
    ];
    let mut worst = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    let mut tested = 0;
    for &seed in &loaded.scenario.seeds {
        let inst = loaded.instance(seed, None).unwrap();
        let report = approximation_ratio_bound(&inst);
        for (label, cfg) in &settings {
            let cost = dva_run(&inst, cfg).unwrap().costs.total.as_gb();
            let ratio = cost / report.d_ignore;
            tested += 1;
            if ratio > worst.0 {
                worst = (ratio, report.ratio_bound);
            }
            if ratio > report.ratio_bound {
                failures.push(format!("seed {seed} {label}: {ratio:.3} > {:.3}", report.ratio_bound));
            }
        }
    }
    Verdict::new(
        failures.is_empty(),
        format!(
            "{tested} runs on {} seeds, largest dva/d_ignore {:.3} against its bound {:.3}{}",
            loaded.scenario.seeds.len(),
            worst.0,
            worst.1,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn baseline_dominance() -> Verdict {
    let start = Instant::now();
    let algorithms = vec![Algorithm::Dva, Algorithm::Greedy, Algorithm::Popular];

    let fixed = load("grid_4x4.toml");
    let mut plan = plan_for("grid_4x4.toml", &fixed);
    plan.algorithms = algorithms.clone();
    let records = execute(&plan, &fixed).unwrap();
    let (dva, greedy, popular) = (
        mean(&totals(&records, Algorithm::Dva)),
        mean(&totals(&records, Algorithm::Greedy)),
        mean(&totals(&records, Algorithm::Popular)),
    );
    let dominates = dva <= greedy && dva <= popular;

    let swept = load("grid_storage_sweep.toml");
    let mut plan = plan_for("grid_storage_sweep.toml", &swept);
    plan.algorithms = algorithms;
    plan.sweep = Some(SweepSpec {
        parameter: SweepParameter::StorageRatio,
        values: vec![0.5],
    });
    let rows = summarize(&execute(&plan, &swept).unwrap());
    let reduction = |a: Algorithm| rows.iter().find(|r| r.algorithm == a).and_then(|r| r.dva_reduction_pct).unwrap();
    let (vs_greedy, vs_popular) = (reduction(Algorithm::Greedy), reduction(Algorithm::Popular));
    let elapsed = start.elapsed();
    Verdict::new(
        dominates && vs_greedy >= 15.0 && vs_popular >= 15.0 && plan.seeds.len() >= 10 && elapsed < Duration::from_secs(300),
        format!(
            "100 GB: dva {dva:.1} greedy {greedy:.1} popular {popular:.1} GB; at 50% storage dva saves {vs_greedy:.1}% vs greedy, {vs_popular:.1}% vs popular (need >= 15%); {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn static_theta_monotone() -> Verdict {
    let name = "grid_theta_static.toml";
    let loaded = load(name);
    assert_eq!(loaded.scenario.workload.rerank_prob, 0.0);
    let mut plan = plan_for(name, &loaded);
    plan.algorithms = vec![Algorithm::Dva];
    plan.sweep = Some(SweepSpec {
        parameter: SweepParameter::Theta,
        values: vec![0.2, 0.4, 0.6, 0.8, 1.0],
    });
    let rows = summarize(&execute(&plan, &loaded).unwrap());
    let means: Vec<f64> = rows.iter().map(|r| r.mean_total_gb).collect();
    let breaks: Vec<String> = means
        .windows(2)
        .zip(rows.iter().skip(1))
        .filter(|(w, _)| w[1] > w[0] * 1.01)
        .map(|(w, r)| format!("theta {}: {:.1} > {:.1} + 1%", r.sweep_value.unwrap(), w[1], w[0]))
        .collect();
    Verdict::new(
        breaks.is_empty(),
        format!(
            "means {}{}",
            means.iter().map(|m| format!("{m:.1}")).collect::<Vec<_>>().join(" "),
            if breaks.is_empty() { String::new() } else { format!("; {}", breaks.join("; ")) }
        ),
    )
}

fn small_mixed(seed: u64) -> Instance {
    let servers = 1 + (seed % 2) as usize;
    let s = 1 + ((seed / 2) % 3) as usize;
    let horizon = 1 + ((seed / 6) % 4) as usize;
    let services = generate_services(
        s,
        &ServiceGenConfig {
            mean_lifetime: 2.0,
            seed,
            ..ServiceGenConfig::default()
        },
    )
    .unwrap();
    let storage = 1.0 + (seed % 4) as f64;
    let topology = if servers == 1 {
        Topology::single_server(Volume::from_gb(storage)).unwrap()
    } else {
        grid_topology(1, 2, 0.2 + 0.2 * (seed % 4) as f64, storage).unwrap()
    };
    let requests = generate_synthetic(&SyntheticConfig {
        n_services: s,
        n_servers: servers,
        horizon,
        users_per_server: 30,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap();
    Instance::new(services, topology, requests).unwrap()
}

fn keep_unchanged_upper_bound() -> Verdict {
    let mut states = 0;
    for seed in 0..60u64 {
        let inst = small_mixed(seed);
        let dp = solve_optimal(&inst).unwrap();
        for (t, state) in dp.states.iter().enumerate() {
            let estimate = keep_unchanged_cost(state, t, &inst);
            if estimate < dp.cost_to_go[t] {
                return Verdict::new(
                    false,
                    format!("instance {seed} slot {t}: estimate {} below optimum {}", estimate.0, dp.cost_to_go[t].0),
                );
            }
            states += 1;
        }
    }
    Verdict::new(true, format!("60 instances, {states} states on optimal paths, estimate never below the optimum"))
}

fn submodular_instance(lf_first: u32, gamma: f64, beta_first: f64) -> Instance {
    let services = vec![
        ServiceSpec::from_gb(0, 1.0, 0.6, beta_first, 0.2, lf_first).unwrap(),
        ServiceSpec::from_gb(1, 1.0, 0.4, 0.4, 0.1, 1).unwrap(),
    ];
    let topo = Topology::from_edge_matrix(&[2.0, 2.0], &[vec![0.0, gamma], vec![gamma, 0.0]]).unwrap();
    let requests = RequestMatrix::exact(2, 2, 3, vec![5, 1, 2, 7, 3, 4, 0, 6, 2, 2, 9, 1]).unwrap();
    Instance::new(services, topo, requests).unwrap()
}

fn submodularity() -> Verdict {
    let compliant = check_submodularity(&submodular_instance(1, 1.0, 0.6), 10_000, 11).unwrap();
    let lifetime = check_submodularity(&submodular_instance(2, 1.0, 0.6), 100_000, 11).unwrap();
    let others = [
        ("gamma=0.5", submodular_instance(1, 0.5, 0.6)),
        ("beta>alpha", submodular_instance(1, 1.0, 0.9)),
    ]
    .map(|(label, inst)| {
        let v = check_submodularity(&inst, 100_000, 11).unwrap();
        match v.violation {
            Some(_) => format!("{label} violated after {} samples", v.samples),
            None => format!("{label} no violation"),
        }
    });
    let pass = compliant.violation.is_none() && lifetime.violation.is_some();
    Verdict::new(
        pass,
        format!(
            "compliant: {} in 10^4 samples; lf=2: {}; {}",
            if compliant.violation.is_none() { "no violation" } else { "VIOLATION" },
            match &lifetime.violation {
                Some(c) => format!(
                    "counterexample after {} samples (margins {:.3} < {:.3})",
                    lifetime.samples, c.margin_a, c.margin_b
                ),
                None => "none in 10^5 samples".to_string(),
            },
            others.join(", ")
        ),
    )
}

fn per_slot_time(services: usize) -> Duration {
    let specs = generate_services(
        services,
        &ServiceGenConfig {
            seed: 5,
            ..ServiceGenConfig::default()
        },
    )
    .unwrap();
    let requests = generate_synthetic(&SyntheticConfig {
        n_services: services,
        n_servers: 1,
        horizon: 20,
        users_per_server: 10 * services as u32,
        seed: 5,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let inst = Instance::new(specs, Topology::single_server(Volume::from_gb(100.0)).unwrap(), requests).unwrap();
    let cfg = DvaConfig::new(0.6, 2.0).unwrap();
    let mut samples: Vec<Duration> = (0..5)
        .map(|_| {
            let run = dva_run(&inst, &cfg).unwrap();
            run.slot_times.iter().sum::<Duration>() / run.slot_times.len() as u32
        })
        .collect();
    samples.sort();
    samples[samples.len() / 2]
}

fn throughput() -> Verdict {
    let large = per_slot_time(1000);
    let small = per_slot_time(100);
    Verdict::new(
        large <= Duration::from_millis(500) && small <= Duration::from_millis(60),
        format!(
            "median per-slot decision: 1000 services {:.2} ms (limit 500), 100 services {:.2} ms (limit 60)",
            large.as_secs_f64() * 1e3,
            small.as_secs_f64() * 1e3
        ),
    )
}

fn determinism() -> Verdict {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for (name, seeds) in [("single_server_oracle.toml", vec![1, 2, 3]), ("grid_4x4.toml", vec![4, 9])] {
        let loaded = load(name);
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for dir in &dirs {
            let mut plan = plan_for(name, &loaded);
            plan.seeds = seeds.clone();
            plan.output_dir = dir.path().to_path_buf();
            run_loaded(&plan, &loaded).unwrap();
        }
        for file in [RESULTS_FILE, SLOT_COSTS_FILE, SUMMARY_FILE, MANIFEST_FILE] {
            let a = std::fs::read(dirs[0].path().join(file)).unwrap();
            let b = std::fs::read(dirs[1].path().join(file)).unwrap();
            compared += 1;
            if a != b {
                mismatches.push(format!("{name}/{file}"));
            }
        }
    }
    Verdict::new(
        mismatches.is_empty(),
        format!(
            "{compared} artifacts compared across reruns{}",
            if mismatches.is_empty() { ", all byte-identical".to_string() } else { format!("; differ: {}", mismatches.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("approximation ratio on the single-server scenario", approximation_ratio),
        ("lower-bound sandwich on the grid", lower_bound_sandwich),
        ("baseline dominance on the grid", baseline_dominance),
        ("static popularity theta monotonicity", static_theta_monotone),
        ("keep-unchanged estimate bounds the optimum", keep_unchanged_upper_bound),
        ("submodularity conditions", submodularity),
        ("per-slot throughput", throughput),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({}) [{:.1} s]",
            k + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
