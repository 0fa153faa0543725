//! Closed-form AoI expressions and the two KKT solvers.
//!
//! * [`lower_bound`] solves the throughput relaxation that bounds every policy
//!   from below; [`lower_bound_exact`] solves the same KKT system piecewise in
//!   closed form and is kept as an independent second route.
//! * [`mu_single`], [`mu_noqueue`] and [`mu_fifo`] give the optimal stationary
//!   randomized policies for the three disciplines.
//! * [`mc_expected_aoi`] evaluates the stationary AoI distribution of one
//!   single-packet stream from its two-dimensional Markov chain.

use thiserror::Error;

use crate::model::NetworkConfig;

/// Absolute tolerance for equality constraints (`Σ q_i/p_i = 1`, `Σ μ_i = 1`).
pub const EQ_TOL: f64 = 1e-9;

/// Default stabilization margin for [`mu_fifo`].
pub const DEFAULT_DELTA: f64 = 1e-6;

const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("expected {expected} scheduling probabilities, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("scheduling probability mu[{stream}] = {value} must be in (0, 1]")]
    NonPositiveProbability { stream: usize, value: f64 },
    #[error("scheduling probabilities sum to {total} > 1")]
    OverAllocated { total: f64 },
    #[error("stream {stream} is unstable: service rate p*mu = {service} <= arrival rate {arrival}")]
    Unstable {
        stream: usize,
        service: f64,
        arrival: f64,
    },
    #[error("FIFO randomized problem is infeasible: sum_i (lambda_i + delta)/p_i = {load} > 1")]
    Infeasible { load: f64 },
    #[error("invalid {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Scheduling probabilities of a stationary randomized policy.
///
/// Entries are in `[0, 1]` and sum to at most one; the remainder is the idle
/// probability `μ_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedPolicySpec {
    mu: Vec<f64>,
}

impl RandomizedPolicySpec {
    pub fn new(mu: Vec<f64>) -> Result<Self, AnalysisError> {
        for (stream, &value) in mu.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(AnalysisError::NonPositiveProbability { stream, value });
            }
        }
        let total: f64 = mu.iter().sum();
        if total > 1.0 + EQ_TOL {
            return Err(AnalysisError::OverAllocated { total });
        }
        Ok(Self { mu })
    }

    /// The naive policy `μ_i = 1/N`.
    pub fn uniform(n: usize) -> Self {
        Self {
            mu: vec![1.0 / n as f64; n],
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn idle_mass(&self) -> f64 {
        (1.0 - self.mu.iter().sum::<f64>()).max(0.0)
    }

    fn check_against(&self, config: &NetworkConfig) -> Result<(), AnalysisError> {
        if self.mu.len() != config.n_streams() {
            return Err(AnalysisError::LengthMismatch {
                expected: config.n_streams(),
                found: self.mu.len(),
            });
        }
        for (stream, &value) in self.mu.iter().enumerate() {
            if value <= 0.0 {
                return Err(AnalysisError::NonPositiveProbability { stream, value });
            }
        }
        Ok(())
    }
}

fn normalized(values: Vec<f64>) -> RandomizedPolicySpec {
    let total: f64 = values.iter().sum();
    RandomizedPolicySpec {
        mu: values.into_iter().map(|v| v / total).collect(),
    }
}

// ---------------------------------------------------------------------------
// Lower bound
// ---------------------------------------------------------------------------

/// Solution of the throughput relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundSolution {
    /// Multiplier `γ*` of the channel constraint `Σ q_i/p_i ≤ 1`.
    pub gamma_star: f64,
    /// Throughputs `q̂_i`.
    pub throughput: Vec<f64>,
    /// Multipliers `ζ_i` of the rate caps `q̂_i ≤ λ_i`.
    pub multipliers: Vec<f64>,
    /// The bound `L_B`.
    pub value: f64,
}

impl LowerBoundSolution {
    /// `Σ q̂_i / p_i`.
    pub fn channel_usage(&self, config: &NetworkConfig) -> f64 {
        self.throughput
            .iter()
            .zip(config.channel_reliability())
            .map(|(q, p)| q / p)
            .sum()
    }
}

/// `(1/2N) Σ w_i (1/q_i + 1)` for an arbitrary throughput vector.
pub fn lower_bound_objective(config: &NetworkConfig, throughput: &[f64]) -> f64 {
    let n = config.n_streams() as f64;
    config
        .weight()
        .iter()
        .zip(throughput)
        .map(|(w, q)| w * (1.0 / q + 1.0))
        .sum::<f64>()
        / (2.0 * n)
}

/// Breakpoints `γ_i = w_i p_i / (2 N λ_i²)`.
pub fn rate_cap_thresholds(config: &NetworkConfig) -> Vec<f64> {
    let n = config.n_streams() as f64;
    (0..config.n_streams())
        .map(|i| {
            let lam = config.arrival_rate()[i];
            config.weight()[i] * config.channel_reliability()[i] / (2.0 * n * lam * lam)
        })
        .collect()
}

/// `γ̃ = (Σ √(w_i/p_i))² / 2N`, the multiplier when no rate cap binds.
pub fn uncapped_gamma(config: &NetworkConfig) -> f64 {
    let s: f64 = sqrt_ratio_sum(config);
    s * s / (2.0 * config.n_streams() as f64)
}

fn sqrt_ratio_sum(config: &NetworkConfig) -> f64 {
    config
        .weight()
        .iter()
        .zip(config.channel_reliability())
        .map(|(w, p)| (w / p).sqrt())
        .sum()
}

/// `S(γ) = Σ q_i(γ)/p_i` with `q_i(γ) = λ_i min{1, √(γ_i/γ)}`; nonincreasing in `γ`.
pub fn channel_usage_at(config: &NetworkConfig, gamma: f64) -> f64 {
    let thresholds = rate_cap_thresholds(config);
    channel_usage_with(config, &thresholds, gamma)
}

fn channel_usage_with(config: &NetworkConfig, thresholds: &[f64], gamma: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..config.n_streams() {
        let lam = config.arrival_rate()[i];
        let q = if gamma <= thresholds[i] {
            lam
        } else {
            lam * (thresholds[i] / gamma).sqrt()
        };
        s += q / config.channel_reliability()[i];
    }
    s
}

fn solution_at(config: &NetworkConfig, thresholds: &[f64], gamma_star: f64) -> LowerBoundSolution {
    let n = config.n_streams() as f64;
    let mut throughput = Vec::with_capacity(config.n_streams());
    let mut multipliers = Vec::with_capacity(config.n_streams());
    for i in 0..config.n_streams() {
        let (w, p, lam) = (
            config.weight()[i],
            config.channel_reliability()[i],
            config.arrival_rate()[i],
        );
        let q = if gamma_star > 0.0 {
            lam.min((w * p / (2.0 * n * gamma_star)).sqrt())
        } else {
            lam
        };
        throughput.push(q);
        multipliers.push(((thresholds[i] - gamma_star) / p).max(0.0));
    }
    let value = lower_bound_objective(config, &throughput);
    LowerBoundSolution {
        gamma_star,
        throughput,
        multipliers,
        value,
    }
}

/// Lower bound `L_B` on the weighted AoI of any policy under any discipline.
///
/// Starts from `γ = max{γ̃, max_i γ_i}` and bisects the monotone map
/// `γ ↦ S(γ)` down towards `S(γ*) = 1`. When `Σ λ_i/p_i < 1` the channel
/// constraint is slack, `γ* = 0` and every stream gets `q̂_i = λ_i`.
pub fn lower_bound(config: &NetworkConfig) -> LowerBoundSolution {
    let thresholds = rate_cap_thresholds(config);
    let saturated = channel_usage_with(config, &thresholds, 0.0);
    if saturated < 1.0 {
        return solution_at(config, &thresholds, 0.0);
    }
    let mut hi = thresholds
        .iter()
        .copied()
        .fold(uncapped_gamma(config), f64::max);
    if (channel_usage_with(config, &thresholds, hi) - 1.0).abs() < EQ_TOL {
        return solution_at(config, &thresholds, hi);
    }
    let mut lo = 0.0;
    let width_tol = 1e-14 * hi.max(1.0);
    let mut gamma = hi;
    for _ in 0..MAX_BISECTIONS {
        gamma = 0.5 * (lo + hi);
        let s = channel_usage_with(config, &thresholds, gamma);
        if (s - 1.0).abs() < EQ_TOL || hi - lo < width_tol {
            break;
        }
        if s > 1.0 {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    solution_at(config, &thresholds, gamma)
}

/// Same KKT solution as [`lower_bound`], found by walking the breakpoints
/// `γ_i` in decreasing order.
///
/// Between two consecutive breakpoints the capped streams contribute a
/// constant `A` to `S(γ)` and the uncapped ones `B/√γ`, so `S(γ) = 1` has the
/// closed-form root `γ = (B / (1 - A))²`.
pub fn lower_bound_exact(config: &NetworkConfig) -> LowerBoundSolution {
    let n = config.n_streams();
    let thresholds = rate_cap_thresholds(config);
    let saturated = channel_usage_with(config, &thresholds, 0.0);
    if saturated < 1.0 {
        return solution_at(config, &thresholds, 0.0);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| thresholds[b].total_cmp(&thresholds[a]));

    let scale = (2.0 * n as f64).sqrt();
    let mut capped = 0.0;
    let mut uncapped: f64 = sqrt_ratio_sum(config) / scale;
    for k in 0..=n {
        // Streams order[..k] are capped at λ_i; the rest follow √(γ_i/γ).
        let upper = if k == 0 { f64::INFINITY } else { thresholds[order[k - 1]] };
        let lower = if k == n { 0.0 } else { thresholds[order[k]] };
        if capped < 1.0 && uncapped > 0.0 {
            let root = (uncapped / (1.0 - capped)).powi(2);
            if root >= lower && root <= upper {
                return solution_at(config, &thresholds, root);
            }
        }
        if k < n {
            let i = order[k];
            let (w, p) = (config.weight()[i], config.channel_reliability()[i]);
            capped += config.arrival_rate()[i] / p;
            uncapped -= (w / p).sqrt() / scale;
        }
    }
    // Unreachable for valid input: S is continuous, S(0) > 1 and S(∞) = 0.
    lower_bound(config)
}

// ---------------------------------------------------------------------------
// Single-packet and no-queue randomized policies
// ---------------------------------------------------------------------------

/// Optimal randomized policy for single-packet queues, `μ_i ∝ √(w_i/p_i)`.
///
/// Does not depend on the arrival rates.
pub fn mu_single(config: &NetworkConfig) -> RandomizedPolicySpec {
    normalized(
        config
            .weight()
            .iter()
            .zip(config.channel_reliability())
            .map(|(w, p)| (w / p).sqrt())
            .collect(),
    )
}

/// `(1/N) Σ w_i (1/λ_i − 1 + 1/(p_i μ_i))`.
pub fn ewsaoi_single(
    config: &NetworkConfig,
    spec: &RandomizedPolicySpec,
) -> Result<f64, AnalysisError> {
    spec.check_against(config)?;
    let n = config.n_streams() as f64;
    let total: f64 = (0..config.n_streams())
        .map(|i| {
            let (w, p, lam) = (
                config.weight()[i],
                config.channel_reliability()[i],
                config.arrival_rate()[i],
            );
            w * (1.0 / lam - 1.0 + 1.0 / (p * spec.mu()[i]))
        })
        .sum();
    Ok(total / n)
}

/// Closed-form value of [`ewsaoi_single`] at [`mu_single`].
pub fn ewsaoi_single_optimal(config: &NetworkConfig) -> f64 {
    let n = config.n_streams() as f64;
    let idle: f64 = config
        .weight()
        .iter()
        .zip(config.arrival_rate())
        .map(|(w, lam)| w * (1.0 / lam - 1.0))
        .sum();
    let s = sqrt_ratio_sum(config);
    idle / n + s * s / n
}

/// Optimal randomized policy for no-queue streams, `μ_i ∝ √(w_i/(p_i λ_i))`.
pub fn mu_noqueue(config: &NetworkConfig) -> RandomizedPolicySpec {
    normalized(noqueue_roots(config))
}

fn noqueue_roots(config: &NetworkConfig) -> Vec<f64> {
    (0..config.n_streams())
        .map(|i| {
            (config.weight()[i] / (config.channel_reliability()[i] * config.arrival_rate()[i]))
                .sqrt()
        })
        .collect()
}

/// `(1/N) Σ w_i / (p_i μ_i λ_i)`.
pub fn ewsaoi_noqueue(
    config: &NetworkConfig,
    spec: &RandomizedPolicySpec,
) -> Result<f64, AnalysisError> {
    spec.check_against(config)?;
    let n = config.n_streams() as f64;
    let total: f64 = (0..config.n_streams())
        .map(|i| {
            config.weight()[i]
                / (config.channel_reliability()[i] * spec.mu()[i] * config.arrival_rate()[i])
        })
        .sum();
    Ok(total / n)
}

/// Closed-form value of [`ewsaoi_noqueue`] at [`mu_noqueue`].
pub fn ewsaoi_noqueue_optimal(config: &NetworkConfig) -> f64 {
    let s: f64 = noqueue_roots(config).iter().sum();
    s * s / config.n_streams() as f64
}

// ---------------------------------------------------------------------------
// FIFO (Ber/Ber/1) queues
// ---------------------------------------------------------------------------

fn stable_service(p: f64, lam: f64, mu: f64) -> Result<f64, AnalysisError> {
    let service = p * mu;
    if !(service > lam) {
        return Err(AnalysisError::Unstable {
            stream: 0,
            service,
            arrival: lam,
        });
    }
    Ok(service)
}

/// Time-average AoI of a stable FIFO queue with arrival rate `lam` and
/// service rate `p·mu` (unweighted).
///
/// Errors with [`AnalysisError::Unstable`] (stream 0) when `p·mu ≤ lam`.
pub fn fifo_stream_aoi(p: f64, lam: f64, mu: f64) -> Result<f64, AnalysisError> {
    let x = stable_service(p, lam, mu)?;
    let rho = lam / x;
    Ok(1.0 / x + 1.0 / lam + rho * rho * (1.0 - x) / (x - lam))
}

/// Steady-state expected backlog `λ(1 − pμ)/(pμ − λ)`, measured at the
/// beginning of a slot before that slot's arrival.
pub fn fifo_backlog(p: f64, lam: f64, mu: f64) -> Result<f64, AnalysisError> {
    let x = stable_service(p, lam, mu)?;
    Ok(lam * (1.0 - x) / (x - lam))
}

/// `g_i(μ)`: derivative of `(w/N)·fifo_stream_aoi(p, lam, μ)` with respect to `μ`.
///
/// Negative and increasing on the stable region `p μ > λ`.
pub fn fifo_gradient(weight_over_n: f64, p: f64, lam: f64, mu: f64) -> f64 {
    let x = p * mu;
    weight_over_n * (lam / (p * mu * mu) * (2.0 / x - 1.0) - p * (1.0 - lam) / ((x - lam) * (x - lam)))
}

/// `(1/N) Σ w_i · fifo_stream_aoi(p_i, λ_i, μ_i)`.
pub fn ewsaoi_fifo(
    config: &NetworkConfig,
    spec: &RandomizedPolicySpec,
) -> Result<f64, AnalysisError> {
    spec.check_against(config)?;
    let n = config.n_streams() as f64;
    let mut total = 0.0;
    for i in 0..config.n_streams() {
        let aoi = fifo_stream_aoi(
            config.channel_reliability()[i],
            config.arrival_rate()[i],
            spec.mu()[i],
        )
        .map_err(|e| match e {
            AnalysisError::Unstable {
                service, arrival, ..
            } => AnalysisError::Unstable {
                stream: i,
                service,
                arrival,
            },
            other => other,
        })?;
        total += config.weight()[i] * aoi;
    }
    Ok(total / n)
}

/// Optimal FIFO randomized policy and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct FifoOptResult {
    pub spec: RandomizedPolicySpec,
    pub delta: f64,
    /// Multiplier of `Σ μ_i ≤ 1` at the solution.
    pub gamma: f64,
    pub converged: bool,
    pub ewsaoi: f64,
}

/// Sufficient-condition stability margin `1 − Σ λ_i/p_i`.
pub fn stability_margin(config: &NetworkConfig) -> f64 {
    1.0 - config
        .arrival_rate()
        .iter()
        .zip(config.channel_reliability())
        .map(|(lam, p)| lam / p)
        .sum::<f64>()
}

struct FifoStream {
    weight_over_n: f64,
    p: f64,
    lam: f64,
    floor: f64,
}

impl FifoStream {
    fn gradient(&self, mu: f64) -> f64 {
        fifo_gradient(self.weight_over_n, self.p, self.lam, mu)
    }

    /// `max{floor, g⁻¹(−γ)}`, capped at 1.
    fn allocation(&self, gamma: f64) -> f64 {
        let target = -gamma;
        if self.gradient(self.floor) >= target {
            return self.floor;
        }
        if self.gradient(1.0) <= target {
            return 1.0;
        }
        let (mut lo, mut hi) = (self.floor, 1.0);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.gradient(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Optimal stationary randomized policy for FIFO queues under the tightened
/// stability constraint `p_i μ_i ≥ λ_i + δ`.
///
/// For a multiplier `γ` each stream takes `μ_i(γ) = max{(λ_i+δ)/p_i, g_i⁻¹(−γ)}`;
/// `γ` is then bisected (geometrically, since it spans many decades when
/// `δ` is small) until `Σ μ_i(γ) = 1`.
pub fn mu_fifo(config: &NetworkConfig, delta: f64) -> Result<FifoOptResult, AnalysisError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(AnalysisError::InvalidParameter {
            name: "delta",
            value: delta,
        });
    }
    let n = config.n_streams();
    let streams: Vec<FifoStream> = (0..n)
        .map(|i| {
            let p = config.channel_reliability()[i];
            let lam = config.arrival_rate()[i];
            FifoStream {
                weight_over_n: config.weight()[i] / n as f64,
                p,
                lam,
                floor: (lam + delta) / p,
            }
        })
        .collect();
    let load: f64 = streams.iter().map(|s| s.floor).sum();
    if load > 1.0 {
        return Err(AnalysisError::Infeasible { load });
    }

    let finish = |mu: Vec<f64>, gamma: f64| -> Result<FifoOptResult, AnalysisError> {
        let total: f64 = mu.iter().sum();
        let spec = RandomizedPolicySpec::new(mu)?;
        let ewsaoi = ewsaoi_fifo(config, &spec)?;
        Ok(FifoOptResult {
            spec,
            delta,
            gamma,
            converged: (total - 1.0).abs() < EQ_TOL,
            ewsaoi,
        })
    };

    if n == 1 {
        let gamma = -streams[0].gradient(1.0);
        return finish(vec![1.0], gamma);
    }
    let total_at = |gamma: f64| -> f64 { streams.iter().map(|s| s.allocation(gamma)).sum() };

    // At γ_hi every stream sits on its floor; below γ_lo every stream wants μ = 1.
    let mut hi = streams
        .iter()
        .map(|s| -s.gradient(s.floor))
        .fold(f64::MIN, f64::max);
    if (load - 1.0).abs() < EQ_TOL {
        return finish(streams.iter().map(|s| s.floor).collect(), hi);
    }
    let mut lo = streams
        .iter()
        .map(|s| -s.gradient(1.0))
        .fold(f64::MAX, f64::min);
    let mut gamma = hi;
    for _ in 0..MAX_BISECTIONS {
        gamma = (lo * hi).sqrt();
        if gamma <= lo || gamma >= hi {
            break;
        }
        let total = total_at(gamma);
        if (total - 1.0).abs() < 1e-13 {
            break;
        }
        if total > 1.0 {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    finish(streams.iter().map(|s| s.allocation(gamma)).collect(), gamma)
}

// ---------------------------------------------------------------------------
// Markov-chain oracle for a single-packet stream
// ---------------------------------------------------------------------------

/// Truncated stationary AoI distribution of one single-packet stream.
#[derive(Debug, Clone, PartialEq)]
pub struct McStationary {
    /// `P(h)` for `h = 1..=p_h.len()`.
    pub p_h: Vec<f64>,
    /// `P(1, 0) = λ² p μ`.
    pub p_10: f64,
    /// Probability mass beyond the truncation point.
    pub truncation_mass: f64,
    /// `Σ_{h ≤ H} h P(h)`.
    pub mean: f64,
}

/// Geometric upper bound on `Σ_{h>H} h^k c^{h-1}`, or infinity when the
/// ratio test has not kicked in yet.
fn tail_bound(h: u64, c: f64, c_pow_h: f64, k: i32) -> f64 {
    let next = (h + 1) as f64;
    let first = next.powi(k) * c_pow_h;
    let ratio = ((next + 1.0) / next).powi(k) * c;
    if ratio < 1.0 {
        first / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

/// Stationary mean AoI of a single-packet stream, computed from
/// `P(h) = (P(1,0)/λ) Σ_{n<h} (1−λ)^{h−1−n} (1−pμ)^n`.
///
/// The sum is truncated at the first `H` whose remaining contribution to the
/// mean is provably below `tail_tol`; it should agree with `1/(pμ) + 1/λ − 1`.
pub fn mc_expected_aoi(
    p: f64,
    lam: f64,
    mu: f64,
    tail_tol: f64,
) -> Result<McStationary, AnalysisError> {
    for (name, value) in [("p", p), ("lambda", lam), ("mu", mu)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(AnalysisError::InvalidParameter { name, value });
        }
    }
    if !(tail_tol > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "tail_tol",
            value: tail_tol,
        });
    }
    const MAX_LEN: u64 = 100_000_000;

    let a = 1.0 - lam;
    let b = 1.0 - p * mu;
    let c = a.max(b);
    let p_10 = lam * lam * p * mu;
    let scale = p_10 / lam;

    // s_h = Σ_{n<h} a^{h-1-n} b^n, s_{h+1} = a s_h + b^h.
    let mut s = 1.0;
    let mut b_pow = b;
    let mut c_pow = c;
    let mut p_h = Vec::new();
    let mut mean = 0.0;
    let mut h: u64 = 1;
    loop {
        let prob = scale * s;
        p_h.push(prob);
        mean += h as f64 * prob;
        if c == 0.0 || scale * tail_bound(h, c, c_pow, 2) < tail_tol || h >= MAX_LEN {
            break;
        }
        s = a * s + b_pow;
        b_pow *= b;
        c_pow *= c;
        h += 1;
    }

    // Mass beyond H, summed until what is left cannot matter at f64 precision.
    let mut truncation_mass = 0.0;
    if c > 0.0 {
        loop {
            s = a * s + b_pow;
            b_pow *= b;
            c_pow *= c;
            h += 1;
            truncation_mass += scale * s;
            if scale * tail_bound(h, c, c_pow, 1) < 1e-18 || h >= 2 * MAX_LEN {
                break;
            }
        }
    }

    Ok(McStationary {
        p_h,
        p_10,
        truncation_mass,
        mean,
    })
}
