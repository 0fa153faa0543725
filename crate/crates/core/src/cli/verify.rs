//! Self-checks run by `aoi verify`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::format::num;
use crate::analysis::{self, RandomizedPolicySpec, DEFAULT_DELTA};
use crate::model::{NetworkConfig, QueueDiscipline};
use crate::policies::{self, Policy};
use crate::reference;
use crate::sim::{self, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, failures: Vec<String>, summary: String) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            summary
        } else {
            let shown: Vec<_> = failures.iter().take(5).cloned().collect();
            format!("{} failure(s): {}", failures.len(), shown.join("; "))
        };
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// Network with `n` streams and parameters drawn uniformly from ranges that
/// keep every formula well conditioned.
pub fn random_config(rng: &mut impl Rng, n: usize, horizon: u64) -> NetworkConfig {
    let p = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
    let lam = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
    let w = (0..n).map(|_| rng.gen_range(0.1..=10.0)).collect();
    NetworkConfig::new(p, lam, w, horizon, rng.gen()).expect("ranges are valid")
}

/// The four-stream network of the λ-sweep experiments.
pub fn four_stream_config(lambda: f64, horizon: u64, seed: u64) -> NetworkConfig {
    NetworkConfig::new(
        vec![0.25, 0.5, 0.75, 1.0],
        vec![lambda, 0.75 * lambda, 0.5 * lambda, 0.25 * lambda],
        vec![4.0, 4.0, 1.0, 1.0],
        horizon,
        seed,
    )
    .expect("valid for lambda in (0, 1]")
}

fn check_lower_bound(depth: Depth) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut failures = Vec::new();
    let (n2, n3) = match depth {
        Depth::Quick => (8, 2),
        Depth::Full => (20, 10),
    };
    let mut worst: f64 = 0.0;
    for k in 0..n2 + n3 {
        let c = random_config(&mut rng, if k < n2 { 2 } else { 3 }, 1);
        let lb = analysis::lower_bound(&c);
        let (mesh, _) = reference::lower_bound_mesh(&c, 1e-4);
        let gap = (mesh - lb.value).abs();
        worst = worst.max(gap);
        if gap > 1e-3 || mesh < lb.value - 1e-9 {
            failures.push(format!("config {k}: algorithm {} vs mesh {}", num(lb.value), num(mesh)));
        }
    }
    for k in 0..200 {
        let n = rng.gen_range(1..=8);
        let c = random_config(&mut rng, n, 1);
        let (a, b) = (analysis::lower_bound(&c), analysis::lower_bound_exact(&c));
        if (a.value - b.value).abs() > 1e-6 * a.value {
            failures.push(format!("config {k}: bisection {} vs piecewise {}", num(a.value), num(b.value)));
        }
    }
    CheckOutcome::new(
        "lower bound vs mesh search",
        failures,
        format!("worst gap {}", num(worst)),
    )
}

fn check_square_root_optimality() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut failures = Vec::new();
    for k in 0..5 {
        let n = rng.gen_range(2..=6);
        let c = random_config(&mut rng, n, 1);
        let best_s = analysis::ewsaoi_single(&c, &analysis::mu_single(&c)).unwrap();
        let best_n = analysis::ewsaoi_noqueue(&c, &analysis::mu_noqueue(&c)).unwrap();
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..1.0)).collect();
            let scale: f64 = raw.iter().sum::<f64>() * rng.gen_range(1.0..1.5);
            let spec = RandomizedPolicySpec::new(raw.iter().map(|x| x / scale).collect()).unwrap();
            let s = analysis::ewsaoi_single(&c, &spec).unwrap();
            let q = analysis::ewsaoi_noqueue(&c, &spec).unwrap();
            if s < best_s * (1.0 - 1e-12) {
                failures.push(format!("config {k}: single {} beats optimum {}", num(s), num(best_s)));
            }
            if q < best_n * (1.0 - 1e-12) {
                failures.push(format!("config {k}: no-queue {} beats optimum {}", num(q), num(best_n)));
            }
        }
    }
    CheckOutcome::new("randomized allocations optimal", failures, "5 configs x 1000 specs".into())
}

fn check_four_approximation() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.gen_range(1..=8);
        let c = random_config(&mut rng, n, 1);
        let ratio = analysis::ewsaoi_single_optimal(&c) / analysis::lower_bound(&c).value;
        worst = worst.max(ratio);
        if !(ratio < 4.0) {
            failures.push(format!("config {k}: ratio {}", num(ratio)));
        }
    }
    CheckOutcome::new(
        "single-packet randomized within 4x of bound",
        failures,
        format!("worst ratio {}", num(worst)),
    )
}

/// Compares `g` against central differences of the weighted FIFO age on a
/// grid of stable operating points.
pub fn check_gradient(g: impl Fn(f64, f64, f64, f64) -> f64) -> CheckOutcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &p in &[0.2, 0.5, 0.9, 1.0] {
        for &lam in &[0.05, 0.1, 0.15] {
            for &w_over_n in &[0.25, 1.0, 3.0] {
                let lo = lam / p;
                for k in 1..10 {
                    let mu = lo + (1.0 - lo) * k as f64 / 10.0;
                    let h = 1e-6;
                    let f = |m: f64| w_over_n * analysis::fifo_stream_aoi(p, lam, m).unwrap();
                    let fd = (f(mu + h) - f(mu - h)) / (2.0 * h);
                    let got = g(w_over_n, p, lam, mu);
                    let rel = (fd - got).abs() / fd.abs();
                    worst = worst.max(rel);
                    if !(rel < 1e-4) {
                        failures.push(format!(
                            "p={p} lambda={lam} mu={}: analytic {} vs difference {}",
                            num(mu),
                            num(got),
                            num(fd)
                        ));
                    }
                }
            }
        }
    }
    CheckOutcome::new(
        "FIFO gradient vs finite differences",
        failures,
        format!("worst relative error {}", num(worst)),
    )
}

fn check_gradient_mutation() -> CheckOutcome {
    // A sign error in the second term must be caught.
    let mutated = |w: f64, p: f64, lam: f64, mu: f64| {
        let x = p * mu;
        w * (lam / (p * mu * mu) * (2.0 / x - 1.0) + p * (1.0 - lam) / ((x - lam) * (x - lam)))
    };
    let caught = !check_gradient(mutated).passed;
    let failures = if caught {
        vec![]
    } else {
        vec!["sign-flipped gradient was accepted".to_string()]
    };
    CheckOutcome::new("gradient check detects mutation", failures, "mutant rejected".into())
}

fn check_fifo_optimum(depth: Depth) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut failures = Vec::new();
    let count = match depth {
        Depth::Quick => 4,
        Depth::Full => 12,
    };
    let mut tried = 0;
    let mut worst: f64 = 0.0;
    while tried < count {
        let n = if tried % 2 == 0 { 2 } else { 3 };
        let c = random_config(&mut rng, n, 1);
        // scale arrivals into the feasible region
        let load = 1.0 - analysis::stability_margin(&c);
        let target = rng.gen_range(0.2..0.9);
        let rates: Vec<f64> = c.arrival_rate().iter().map(|l| l * target / load).collect();
        let Ok(c) = c.with_arrival_rate(rates) else { continue };
        tried += 1;
        let r = match analysis::mu_fifo(&c, DEFAULT_DELTA) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("instance {tried}: {e}"));
                continue;
            }
        };
        let (mesh_mu, _) = reference::fifo_mesh(&c, 1e-5);
        let gap = r
            .spec
            .mu()
            .iter()
            .zip(&mesh_mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        if gap > 1e-3 {
            failures.push(format!("instance {tried}: {:?} vs mesh {:?}", r.spec.mu(), mesh_mu));
        }
    }
    CheckOutcome::new(
        "FIFO allocation vs mesh search",
        failures,
        format!("worst deviation {}", num(worst)),
    )
}

fn check_markov_oracle() -> CheckOutcome {
    let grid = [0.1, 0.3, 0.5, 0.7, 1.0];
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &p in &grid {
        for &lam in &grid {
            for &mu in &grid {
                let m = analysis::mc_expected_aoi(p, lam, mu, 1e-7).unwrap();
                let closed = 1.0 / (p * mu) + 1.0 / lam - 1.0;
                let gap = (m.mean - closed).abs();
                let mass = m.p_h.iter().sum::<f64>() + m.truncation_mass;
                worst = worst.max(gap);
                if gap > 1e-6 || (mass - 1.0).abs() > 1e-12 {
                    failures.push(format!(
                        "p={p} lambda={lam} mu={mu}: mean {} vs {} (mass {})",
                        num(m.mean),
                        num(closed),
                        num(mass)
                    ));
                }
            }
        }
    }
    CheckOutcome::new(
        "Markov chain vs closed-form age",
        failures,
        format!("worst gap {}", num(worst)),
    )
}

fn random_policy(rng: &mut impl Rng, c: &NetworkConfig) -> Policy {
    match rng.gen_range(0..3) {
        0 => Policy::Naive,
        1 => Policy::StationaryRandomized(analysis::mu_single(c)),
        _ => {
            let beta = (0..c.n_streams()).map(|_| rng.gen_range(0.1..10.0)).collect();
            Policy::max_weight(beta, c).expect("positive weights")
        }
    }
}

fn check_identity(depth: Depth) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let runs = match depth {
        Depth::Quick => 20,
        Depth::Full => 100,
    };
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..runs {
        let n = rng.gen_range(1..=6);
        let c = random_config(&mut rng, n, 10_000);
        let d = QueueDiscipline::ALL[rng.gen_range(0..3)];
        let pol = random_policy(&mut rng, &c);
        let r = sim::run(&c, d, &pol, &RunOptions::default());
        match sim::prop1_identity_check(&r.stats, r.slots_run()) {
            Ok(res) => {
                for (i, x) in res.iter().enumerate() {
                    worst = worst.max(x.abs());
                    if !(x.abs() < 1e-9) {
                        failures.push(format!("run {k} stream {i}: residual {}", num(*x)));
                    }
                }
            }
            Err(e) => failures.push(format!("run {k}: {e}")),
        }
    }
    CheckOutcome::new(
        "sample-path age decomposition",
        failures,
        format!("{runs} runs, worst residual {}", num(worst)),
    )
}

fn sim_settings(depth: Depth) -> (u64, usize) {
    match depth {
        Depth::Quick => (500_000, 5),
        Depth::Full => (2_000_000, 10),
    }
}

fn check_max_weight_orderings(depth: Depth) -> CheckOutcome {
    let (horizon, reps) = sim_settings(depth);
    let mut failures = Vec::new();
    for &lambda in &[0.05, 0.15, 0.3] {
        let c = four_stream_config(lambda, horizon, 7);
        let lb = analysis::lower_bound(&c).value;
        for (d, closed) in [
            (QueueDiscipline::SinglePacket, analysis::ewsaoi_single_optimal(&c)),
            (QueueDiscipline::NoQueue, analysis::ewsaoi_noqueue_optimal(&c)),
        ] {
            let beta = policies::default_beta(&c, d, DEFAULT_DELTA).unwrap();
            let mw = Policy::max_weight(beta, &c).unwrap();
            let rep = sim::replicate(&c, d, &mw, reps, &RunOptions::without_log());
            if rep.mean > closed + 3.0 * rep.stderr {
                failures.push(format!(
                    "lambda={lambda} {d}: max-weight {} above randomized {}",
                    num(rep.mean),
                    num(closed)
                ));
            }
            if rep.mean - 3.0 * rep.stderr < lb {
                failures.push(format!(
                    "lambda={lambda} {d}: max-weight {} below bound {}",
                    num(rep.mean),
                    num(lb)
                ));
            }
        }
    }
    CheckOutcome::new(
        "max-weight between bound and randomized",
        failures,
        format!("T={horizon}, {reps} replications"),
    )
}

fn check_randomized_simulation(depth: Depth) -> CheckOutcome {
    let (horizon, tol) = match depth {
        Depth::Quick => (1_000_000, 0.02),
        Depth::Full => (2_000_000, 0.02),
    };
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &lambda in &[0.05, 0.15, 0.3] {
        let c = four_stream_config(lambda, horizon, 11);
        let single = analysis::mu_single(&c);
        let noqueue = analysis::mu_noqueue(&c);
        for (d, spec, closed) in [
            (
                QueueDiscipline::SinglePacket,
                single.clone(),
                analysis::ewsaoi_single(&c, &single).unwrap(),
            ),
            (
                QueueDiscipline::NoQueue,
                noqueue.clone(),
                analysis::ewsaoi_noqueue(&c, &noqueue).unwrap(),
            ),
        ] {
            let r = sim::run(&c, d, &Policy::StationaryRandomized(spec), &RunOptions::without_log());
            let rel = (r.ewsaoi - closed).abs() / closed;
            worst = worst.max(rel);
            if rel > tol {
                failures.push(format!(
                    "lambda={lambda} {d}: simulated {} vs closed form {}",
                    num(r.ewsaoi),
                    num(closed)
                ));
            }
        }
    }
    CheckOutcome::new(
        "randomized simulation vs closed form",
        failures,
        format!("T={horizon}, worst relative error {}", num(worst)),
    )
}

fn check_instability(depth: Depth) -> CheckOutcome {
    let (horizon, _) = sim_settings(depth);
    let horizon = horizon.max(200_000);
    let mut failures = Vec::new();
    for (lambda, expect) in [(0.10, false), (0.20, true)] {
        let c = four_stream_config(lambda, horizon, 13);
        let (pol, _) = super::sweep::build_policy(
            &c,
            QueueDiscipline::Fifo,
            super::config::PolicyKind::MaxWeight,
            DEFAULT_DELTA,
        )
        .unwrap();
        let r = sim::run(&c, QueueDiscipline::Fifo, &pol, &RunOptions::without_log());
        if r.diverged != expect {
            failures.push(format!(
                "FIFO lambda={lambda}: diverged={} (slope {})",
                r.diverged,
                num(r.backlog_slope)
            ));
        }
    }
    let two_stream = NetworkConfig::new(
        vec![1.0 / 3.0, 1.0],
        vec![0.25, 0.25 / 3.0],
        vec![1.0, 1.0],
        horizon,
        17,
    )
    .unwrap();
    let r = sim::run(&two_stream, QueueDiscipline::Fifo, &Policy::Naive, &RunOptions::without_log());
    if !r.diverged {
        failures.push(format!("naive on two streams did not diverge (slope {})", num(r.backlog_slope)));
    }
    CheckOutcome::new("FIFO stability thresholds", failures, format!("T={horizon}"))
}

/// Runs every check at the given depth, in a fixed order.
pub fn run_verify(depth: Depth, mut progress: impl FnMut(&CheckOutcome, f64)) -> Vec<CheckOutcome> {
    let checks: Vec<Box<dyn Fn() -> CheckOutcome>> = vec![
        Box::new(move || check_lower_bound(depth)),
        Box::new(check_square_root_optimality),
        Box::new(check_four_approximation),
        Box::new(|| check_gradient(analysis::fifo_gradient)),
        Box::new(check_gradient_mutation),
        Box::new(move || check_fifo_optimum(depth)),
        Box::new(check_markov_oracle),
        Box::new(move || check_identity(depth)),
        Box::new(move || check_randomized_simulation(depth)),
        Box::new(move || check_max_weight_orderings(depth)),
        Box::new(move || check_instability(depth)),
    ];
    checks
        .iter()
        .map(|check| {
            let start = Instant::now();
            let outcome = check();
            progress(&outcome, start.elapsed().as_secs_f64());
            outcome
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_check_passes_and_mutant_fails() {
        assert!(check_gradient(analysis::fifo_gradient).passed);
        assert!(check_gradient_mutation().passed);
    }

    #[test]
    fn oracle_checks_pass() {
        assert!(check_markov_oracle().passed);
        assert!(check_four_approximation().passed);
    }
}
