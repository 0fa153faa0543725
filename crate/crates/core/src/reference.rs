//! Brute-force mesh searches used to cross-check the closed-form solvers.
//!
//! These are deliberately naive: they evaluate the objectives on a grid and
//! share no code with [`crate::analysis`] beyond the objective formulas
//! themselves.

use crate::analysis::{fifo_stream_aoi, lower_bound_objective};
use crate::model::NetworkConfig;

/// Minimizes `(1/2N) Σ w_i (1/q_i + 1)` over `q_i ≤ λ_i`, `Σ q_i/p_i ≤ 1`.
/// The first `N−1` channel shares `x_i = q_i/p_i` run over a mesh of spacing
/// `step` on the simplex, plus the cap `x_i = λ_i/p_i`. The last throughput is
/// set to its largest feasible value, since the objective decreases in every
/// coordinate. Returns the best value and its throughput vector.
///
/// # Panics
/// For `N > 3`, where the mesh is too large to enumerate.
pub fn lower_bound_mesh(config: &NetworkConfig, step: f64) -> (f64, Vec<f64>) {
    let n = config.n_streams();
    assert!(n <= 3, "mesh search is limited to three streams");
    let p = config.channel_reliability();
    let lam = config.arrival_rate();
    let last = n - 1;

    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut q = vec![0.0; n];
    let axis = |i: usize| -> Vec<f64> {
        let cap = (lam[i] / p[i]).min(1.0);
        let count = (cap / step).floor() as usize;
        let mut v: Vec<f64> = (1..=count).map(|k| k as f64 * step * p[i]).collect();
        if v.last().map_or(true, |&x| x < lam[i].min(p[i])) {
            v.push(lam[i].min(p[i]));
        }
        v
    };
    let axes: Vec<Vec<f64>> = (0..last).map(axis).collect();

    let mut visit = |q: &mut Vec<f64>, used: f64| {
        let room = 1.0 - used;
        if room <= 0.0 {
            return;
        }
        q[last] = lam[last].min(p[last] * room);
        let v = lower_bound_objective(config, q);
        if v < best.0 {
            best = (v, q.clone());
        }
    };

    match last {
        0 => visit(&mut q, 0.0),
        1 => {
            for &a in &axes[0] {
                q[0] = a;
                visit(&mut q, a / p[0]);
            }
        }
        _ => {
            for &a in &axes[0] {
                let used_a = a / p[0];
                if used_a >= 1.0 {
                    break;
                }
                q[0] = a;
                for &b in &axes[1] {
                    let used = used_a + b / p[1];
                    if used >= 1.0 {
                        break;
                    }
                    q[1] = b;
                    visit(&mut q, used);
                }
            }
        }
    }
    best
}

fn fifo_objective(config: &NetworkConfig, mu: &[f64]) -> f64 {
    let n = config.n_streams() as f64;
    let mut total = 0.0;
    for i in 0..config.n_streams() {
        match fifo_stream_aoi(config.channel_reliability()[i], config.arrival_rate()[i], mu[i]) {
            Ok(a) => total += config.weight()[i] * a,
            Err(_) => return f64::INFINITY,
        }
    }
    total / n
}

/// Mesh minimization of the FIFO randomized objective over `Σ μ_i = 1`
/// for `N ≤ 3`: a coarse pass at `10·step` followed by a pass at `step`
/// around the coarse minimizer. Returns the best `μ` and its objective.
///
/// # Panics
/// For `N > 3`.
pub fn fifo_mesh(config: &NetworkConfig, step: f64) -> (Vec<f64>, f64) {
    let n = config.n_streams();
    assert!(n <= 3, "mesh search is limited to three streams");
    match n {
        1 => (vec![1.0], fifo_objective(config, &[1.0])),
        2 => {
            let eval = |m: f64| fifo_objective(config, &[m, 1.0 - m]);
            let (m, v) = scan_1d(eval, 0.0, 1.0, step * 10.0);
            let (m, v2) = scan_1d(eval, (m - 20.0 * step).max(0.0), (m + 20.0 * step).min(1.0), step);
            (vec![m, 1.0 - m], v.min(v2))
        }
        _ => {
            let eval = |a: f64, b: f64| {
                if a + b >= 1.0 {
                    f64::INFINITY
                } else {
                    fifo_objective(config, &[a, b, 1.0 - a - b])
                }
            };
            let coarse = (step * 100.0).max(1e-3);
            let (a, b, _) = scan_2d(eval, (0.0, 1.0), (0.0, 1.0), coarse);
            let mid = (step * 10.0).max(coarse / 10.0);
            let (a, b, _) = scan_2d(eval, (a - 2.0 * coarse, a + 2.0 * coarse), (b - 2.0 * coarse, b + 2.0 * coarse), mid);
            let (a, b, v) = scan_2d(eval, (a - 2.0 * mid, a + 2.0 * mid), (b - 2.0 * mid, b + 2.0 * mid), step);
            (vec![a, b, 1.0 - a - b], v)
        }
    }
}

/// Grid scan of `f` on `(lo, hi)` with the given spacing.
pub fn scan_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let count = ((hi - lo) / step).ceil() as usize;
    let mut best = (f64::NAN, f64::INFINITY);
    for k in 1..count {
        let x = lo + k as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

fn scan_2d(
    f: impl Fn(f64, f64) -> f64,
    (alo, ahi): (f64, f64),
    (blo, bhi): (f64, f64),
    step: f64,
) -> (f64, f64, f64) {
    let (alo, blo) = (alo.max(0.0), blo.max(0.0));
    let (ahi, bhi) = (ahi.min(1.0), bhi.min(1.0));
    let na = ((ahi - alo) / step).ceil() as usize;
    let nb = ((bhi - blo) / step).ceil() as usize;
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    for i in 1..na {
        let a = alo + i as f64 * step;
        for j in 1..nb {
            let b = blo + j as f64 * step;
            let v = f(a, b);
            if v < best.2 {
                best = (a, b, v);
            }
        }
    }
    best
}
