//! Acceptance suite: nine criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown.
//! Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aoi_core::analysis::{self, RandomizedPolicySpec, DEFAULT_DELTA};
use aoi_core::cli::config::{ExperimentSpec, PolicyKind};
use aoi_core::cli::sweep::{self, Source, SweepRow};
use aoi_core::cli::verify::{check_gradient, four_stream_config, random_config};
use aoi_core::model::{NetworkConfig, QueueDiscipline};
use aoi_core::policies::Policy;
use aoi_core::reference;
use aoi_core::sim::{self, RunOptions};

const FULL_HORIZON: u64 = 2_000_000;
const FULL_REPLICATIONS: usize = 10;

struct Verdict {
    failures: Vec<String>,
    summary: String,
}

impl Verdict {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            summary: String::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }
}

fn two_stream_config(lambda: f64, horizon: u64, seed: u64) -> NetworkConfig {
    NetworkConfig::new(
        vec![1.0 / 3.0, 1.0],
        vec![lambda, lambda / 3.0],
        vec![1.0, 1.0],
        horizon,
        seed,
    )
    .unwrap()
}

fn c1_identity() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = rng.gen_range(1..=6);
        let c = random_config(&mut rng, n, 10_000);
        let d = QueueDiscipline::ALL[k % 3];
        let pol = match rng.gen_range(0..4) {
            0 => Policy::Naive,
            1 => Policy::StationaryRandomized(analysis::mu_single(&c)),
            2 => Policy::StationaryRandomized(analysis::mu_noqueue(&c)),
            _ => {
                let beta = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
                Policy::max_weight(beta, &c).unwrap()
            }
        };
        let r = sim::run(&c, d, &pol, &RunOptions::default());
        match sim::prop1_identity_check(&r.stats, r.slots_run()) {
            Ok(res) => {
                for (i, x) in res.iter().enumerate() {
                    worst = worst.max(x.abs());
                    if !(x.abs() < 1e-9) {
                        v.fail(format!("run {k} stream {i}: residual {x:e}"));
                    }
                }
            }
            Err(e) => v.fail(format!("run {k}: {e}")),
        }
    }
    v.summary = format!("100 runs at T=1e4, worst relative residual {worst:e}");
    v
}

fn simulated_vs_closed(discipline: QueueDiscipline) -> (Vec<String>, f64) {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &lambda in &[0.05, 0.15, 0.3] {
        let c = four_stream_config(lambda, FULL_HORIZON, 31);
        let (spec, closed) = match discipline {
            QueueDiscipline::SinglePacket => {
                let s = analysis::mu_single(&c);
                let v = analysis::ewsaoi_single(&c, &s).unwrap();
                (s, v)
            }
            _ => {
                let s = analysis::mu_noqueue(&c);
                let v = analysis::ewsaoi_noqueue(&c, &s).unwrap();
                (s, v)
            }
        };
        let r = sim::run(&c, discipline, &Policy::StationaryRandomized(spec), &RunOptions::without_log());
        let rel = (r.ewsaoi - closed).abs() / closed;
        worst = worst.max(rel);
        if !(rel < 0.02) {
            failures.push(format!("lambda={lambda}: simulated {:.4} vs {closed:.4}", r.ewsaoi));
        }
    }
    (failures, worst)
}

fn c2_single_packet() -> Verdict {
    let mut v = Verdict::new();
    let (failures, worst) = simulated_vs_closed(QueueDiscipline::SinglePacket);
    v.failures = failures;
    let grid = [0.1, 0.3, 0.5, 0.7, 1.0];
    let mut worst_mc: f64 = 0.0;
    for &p in &grid {
        for &lam in &grid {
            for &mu in &grid {
                let m = analysis::mc_expected_aoi(p, lam, mu, 1e-7).unwrap();
                let closed = 1.0 / (p * mu) + 1.0 / lam - 1.0;
                let gap = (m.mean - closed).abs();
                worst_mc = worst_mc.max(gap);
                if !(gap < 1e-6) {
                    v.fail(format!("chain p={p} lambda={lam} mu={mu}: {} vs {closed}", m.mean));
                }
                let mass = m.p_h.iter().sum::<f64>() + m.truncation_mass;
                if !((mass - 1.0).abs() < 1e-12) {
                    v.fail(format!("chain p={p} lambda={lam} mu={mu}: mass {mass}"));
                }
            }
        }
    }
    v.summary = format!(
        "T=2e6 worst relative error {:.3}%, chain worst gap {worst_mc:e}",
        100.0 * worst
    );
    v
}

fn c3_no_queue() -> Verdict {
    let mut v = Verdict::new();
    let (failures, worst) = simulated_vs_closed(QueueDiscipline::NoQueue);
    v.failures = failures;
    v.summary = format!("T=2e6 worst relative error {:.3}%", 100.0 * worst);
    v
}

fn c4_lower_bound(sweep: &[SweepRow]) -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2004);
    let mut worst: f64 = 0.0;
    for k in 0..16 {
        let n = if k < 10 { 2 } else { 3 };
        let c = random_config(&mut rng, n, 1);
        let lb = analysis::lower_bound(&c).value;
        let (mesh, _) = reference::lower_bound_mesh(&c, 1e-4);
        worst = worst.max((mesh - lb).abs());
        if !((mesh - lb).abs() < 1e-3) {
            v.fail(format!("config {k} (N={n}): algorithm {lb} vs mesh {mesh}"));
        }
    }
    // the three least reliable streams of the sweep network
    for &lambda in &[0.05, 0.2, 0.35] {
        let full = four_stream_config(lambda, 1, 0);
        let c = NetworkConfig::new(
            full.channel_reliability()[..3].to_vec(),
            full.arrival_rate()[..3].to_vec(),
            full.weight()[..3].to_vec(),
            1,
            0,
        )
        .unwrap();
        let lb = analysis::lower_bound(&c).value;
        let (mesh, _) = reference::lower_bound_mesh(&c, 1e-4);
        worst = worst.max((mesh - lb).abs());
        if !((mesh - lb).abs() < 1e-3) {
            v.fail(format!("three-stream network at lambda={lambda}: {lb} vs mesh {mesh}"));
        }
    }

    let mut checked = 0;
    for r in sweep.iter().filter(|r| r.source == Source::Simulated && r.diverged_fraction == 0.0) {
        checked += 1;
        if !(r.lower_bound <= r.ewsaoi_mean - 3.0 * r.ewsaoi_stderr) {
            v.fail(format!(
                "lambda={} {} {}: bound {} above {} - 3*{}",
                r.lambda, r.discipline, r.policy, r.lower_bound, r.ewsaoi_mean, r.ewsaoi_stderr
            ));
        }
    }
    let one = NetworkConfig::new(vec![1.0], vec![1.0], vec![1.0], 1, 0).unwrap();
    let lb1 = analysis::lower_bound(&one).value;
    if lb1 != 1.0 {
        v.fail(format!("N=1 bound is {lb1}, expected exactly 1"));
    }
    v.summary = format!("mesh worst gap {worst:.2e}, {checked} simulated sweep points above the bound, N=1 bound = {lb1}");
    v
}

fn c5_four_approximation() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2005);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.gen_range(1..=8);
        let c = random_config(&mut rng, n, 1);
        let value = analysis::ewsaoi_single(&c, &analysis::mu_single(&c)).unwrap();
        let ratio = value / analysis::lower_bound(&c).value;
        worst = worst.max(ratio);
        if !(ratio < 4.0) {
            v.fail(format!("config {k}: ratio {ratio}"));
        }
    }
    v.summary = format!("1000 configs, worst ratio to bound {worst:.4}");
    v
}

fn c6_fifo_optimum() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2006);
    let mut instances = vec![two_stream_config(0.2, 1, 0), two_stream_config(0.1, 1, 0)];
    while instances.len() < 10 {
        let n = if instances.len() % 2 == 0 { 2 } else { 3 };
        let c = random_config(&mut rng, n, 1);
        let load = 1.0 - analysis::stability_margin(&c);
        let target = rng.gen_range(0.2..0.9);
        let rates = c.arrival_rate().iter().map(|l| l * target / load).collect();
        if let Ok(c) = c.with_arrival_rate(rates) {
            instances.push(c);
        }
    }
    let mut worst: f64 = 0.0;
    for (k, c) in instances.iter().enumerate() {
        let r = analysis::mu_fifo(c, DEFAULT_DELTA).unwrap();
        let (mesh, _) = reference::fifo_mesh(c, 1e-5);
        for (a, b) in r.spec.mu().iter().zip(&mesh) {
            worst = worst.max((a - b).abs());
            if !((a - b).abs() < 1e-3) {
                v.fail(format!("instance {k}: {:?} vs mesh {mesh:?}", r.spec.mu()));
                break;
            }
        }
    }
    let g = check_gradient(analysis::fifo_gradient);
    if !g.passed {
        v.fail(g.detail.clone());
    }
    v.summary = format!("{} instances, worst deviation {worst:.2e}; {}", instances.len(), g.detail);
    v
}

fn c7_instability() -> Verdict {
    let mut v = Verdict::new();
    let mut notes = Vec::new();
    for (lambda, expect) in [(0.10, false), (0.20, true)] {
        let c = four_stream_config(lambda, FULL_HORIZON, 37);
        for kind in [PolicyKind::MaxWeight, PolicyKind::OptimalRandomized] {
            let (pol, _) = sweep::build_policy(&c, QueueDiscipline::Fifo, kind, DEFAULT_DELTA).unwrap();
            let r = sim::run(&c, QueueDiscipline::Fifo, &pol, &RunOptions::without_log());
            notes.push(format!("{kind}@{lambda}: slope {:.4}", r.backlog_slope));
            if r.diverged != expect {
                v.fail(format!(
                    "FIFO {kind} at lambda={lambda}: diverged={} slope={}",
                    r.diverged, r.backlog_slope
                ));
            }
            if !expect {
                let backlog: f64 = (0..4).map(|i| r.stats.backlog_mean(i)).sum();
                if !(backlog.is_finite() && backlog < 1e3) {
                    v.fail(format!("FIFO {kind} at lambda={lambda}: mean backlog {backlog}"));
                }
            }
        }
    }
    let c = two_stream_config(0.25, FULL_HORIZON, 41);
    let r = sim::run(&c, QueueDiscipline::Fifo, &Policy::Naive, &RunOptions::without_log());
    notes.push(format!("naive@0.25: slope {:.4}", r.backlog_slope));
    if !r.diverged {
        v.fail(format!("naive on two streams at lambda=0.25 stayed stable (slope {})", r.backlog_slope));
    }
    v.summary = notes.join(", ");
    v
}

fn c8_max_weight(sweep: &[SweepRow]) -> Verdict {
    let mut v = Verdict::new();
    let mut points = 0;
    let mut worst_ratio: f64 = 0.0;
    for r in sweep.iter().filter(|r| r.policy == PolicyKind::MaxWeight) {
        let c = four_stream_config(r.lambda, 1, 0);
        let closed = match r.discipline {
            QueueDiscipline::SinglePacket => analysis::ewsaoi_single_optimal(&c),
            QueueDiscipline::NoQueue => analysis::ewsaoi_noqueue_optimal(&c),
            QueueDiscipline::Fifo => continue,
        };
        points += 1;
        worst_ratio = worst_ratio.max(r.ewsaoi_mean / closed);
        if !(r.ewsaoi_mean <= closed + 3.0 * r.ewsaoi_stderr) {
            v.fail(format!(
                "lambda={} {}: max-weight {} +- {} above randomized {closed}",
                r.lambda, r.discipline, r.ewsaoi_mean, r.ewsaoi_stderr
            ));
        }
    }
    if points != 70 {
        v.fail(format!("expected 70 sweep points, found {points}"));
    }
    v.summary = format!("{points} points at T=2e6 x 10, worst max-weight/randomized ratio {worst_ratio:.3}");
    v
}

fn c9_lambda_independence() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2009);
    let base = random_config(&mut rng, 6, 1);
    let reference = analysis::mu_single(&base);
    for k in 0..100 {
        let rates = (0..6).map(|_| rng.gen_range(1e-3..=1.0)).collect();
        let c = base.clone().with_arrival_rate(rates).unwrap();
        let mu = analysis::mu_single(&c);
        if mu != reference {
            v.fail(format!("perturbation {k}: {:?} != {:?}", mu.mu(), reference.mu()));
        }
    }
    let sum: f64 = reference.mu().iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        v.fail(format!("allocation sums to {sum}"));
    }
    let _ = RandomizedPolicySpec::new(reference.mu().to_vec()).unwrap();
    v.summary = "100 arrival-rate perturbations, bitwise identical allocations".into();
    v
}

fn full_sweep() -> Vec<SweepRow> {
    let spec = ExperimentSpec {
        channel_reliability: vec![0.25, 0.5, 0.75, 1.0],
        weight: vec![4.0, 4.0, 1.0, 1.0],
        arrival_multiplier: vec![1.0, 0.75, 0.5, 0.25],
        lambdas: (1..=35).map(|k| k as f64 / 100.0).collect(),
        disciplines: QueueDiscipline::ALL.to_vec(),
        policies: vec![PolicyKind::MaxWeight],
        horizon: FULL_HORIZON,
        replications: FULL_REPLICATIONS,
        seed: 2008,
        delta: DEFAULT_DELTA,
        output: None,
    };
    sweep::run_sweep(&spec).expect("sweep spec is valid")
}

fn main() -> ExitCode {
    let start = Instant::now();
    let sweep_rows = full_sweep();
    eprintln!("full sweep: {} rows in {:.1}s", sweep_rows.len(), start.elapsed().as_secs_f64());

    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("exact finite-horizon identity", Box::new(c1_identity)),
        ("single-packet closed form", Box::new(c2_single_packet)),
        ("no-queue closed form", Box::new(c3_no_queue)),
        ("lower bound", Box::new(|| c4_lower_bound(&sweep_rows))),
        ("4-approximation", Box::new(c5_four_approximation)),
        ("FIFO optimum", Box::new(c6_fifo_optimum)),
        ("instability thresholds", Box::new(c7_instability)),
        ("max-weight dominance", Box::new(|| c8_max_weight(&sweep_rows))),
        ("lambda-independence of single-packet allocation", Box::new(c9_lambda_independence)),
    ];

    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        let ok = v.failures.is_empty();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name} ({:.1}s): {}",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.summary
        );
        for f in v.failures.iter().take(10) {
            println!("    {f}");
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
