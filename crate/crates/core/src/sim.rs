//! Slot-by-slot simulation, sample-path statistics and replication.

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{advance_slot, NetworkConfig, QueueDiscipline, StreamState};
use crate::policies::{Policy, StreamView};

/// Total FIFO backlog at which a run is abandoned as divergent.
pub const DEFAULT_BACKLOG_CAP: u64 = 10_000_000;

/// Backlog growth (packets per slot over the second half of a run) above
/// which a FIFO run is declared divergent.
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.01;

const STREAM_ARRIVALS: u64 = 1;
const STREAM_CHANNELS: u64 = 2;
const STREAM_POLICY: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("stream {stream}: delivery log was not recorded for this run")]
    LogNotRecorded { stream: usize },
    #[error("stream {stream}: inter-delivery times plus residual cover {covered} slots, expected {horizon}")]
    HorizonMismatch {
        stream: usize,
        covered: u64,
        horizon: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub backlog_cap: u64,
    pub slope_threshold: f64,
    /// Keep every inter-delivery time and delay. Needed for
    /// [`prop1_identity_check`]; costs two words per delivery.
    pub record_log: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            backlog_cap: DEFAULT_BACKLOG_CAP,
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            record_log: true,
        }
    }
}

impl RunOptions {
    pub fn without_log() -> Self {
        Self {
            record_log: false,
            ..Self::default()
        }
    }
}

/// Delivery log and accumulators for one stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamStats {
    /// `D_i(T)`.
    pub deliveries: u64,
    /// `I_i[m]`; `I_i[1]` counts from slot 1.
    pub inter_delivery: Vec<u64>,
    /// `z_i[m]`.
    pub delays: Vec<u64>,
    /// Slots after the last delivery, `R_i`.
    pub residual: u64,
    /// Delay of the last delivery (0 if none).
    pub last_delay: u64,
    /// `Σ_t h_i(t)`.
    pub aoi_sum: u128,
    /// `Σ_t Q_i(t)`, backlog sampled at the start of each slot before arrivals.
    pub backlog_sum: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePathStats {
    pub streams: Vec<StreamStats>,
    /// Slots actually simulated.
    pub slots: u64,
    /// `(1/TN) Σ_i w_i Σ_t h_i(t)`.
    pub weighted_aoi: f64,
}

impl SamplePathStats {
    pub fn mean_aoi(&self, stream: usize) -> f64 {
        self.streams[stream].aoi_sum as f64 / self.slots as f64
    }

    pub fn throughput(&self, stream: usize) -> f64 {
        self.streams[stream].deliveries as f64 / self.slots as f64
    }

    pub fn backlog_mean(&self, stream: usize) -> f64 {
        self.streams[stream].backlog_sum as f64 / self.slots as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub stats: SamplePathStats,
    pub ewsaoi: f64,
    /// Safety cap hit, or (FIFO only) backlog slope above threshold.
    pub diverged: bool,
    pub cap_hit: bool,
    /// Total backlog growth over the second half of the run, packets per slot.
    pub backlog_slope: f64,
    pub config: NetworkConfig,
    pub policy: String,
    pub discipline: QueueDiscipline,
}

impl RunResult {
    pub fn slots_run(&self) -> u64 {
        self.stats.slots
    }
}

/// Source of per-slot randomness.
pub trait SlotRandomness {
    fn arrivals(&mut self, slot: u64, out: &mut [bool]);
    fn channels(&mut self, slot: u64, out: &mut [bool]);
    fn policy_draw(&mut self, slot: u64) -> f64;
}

/// Independent ChaCha streams for arrivals, channels and policy draws, all
/// derived from one seed. Every slot draws one bit per stream for arrivals and
/// for channels, so runs with the same seed see the same arrival and channel
/// realizations whatever the policy does.
pub struct SeededRandomness {
    arrival_rng: ChaCha8Rng,
    channel_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    arrival: Vec<Bernoulli>,
    channel: Vec<Bernoulli>,
}

impl SeededRandomness {
    pub fn new(config: &NetworkConfig, seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        let bern = |ps: &[f64]| {
            ps.iter()
                .map(|&p| Bernoulli::new(p).expect("probability validated by NetworkConfig"))
                .collect()
        };
        Self {
            arrival_rng: stream(STREAM_ARRIVALS),
            channel_rng: stream(STREAM_CHANNELS),
            policy_rng: stream(STREAM_POLICY),
            arrival: bern(config.arrival_rate()),
            channel: bern(config.channel_reliability()),
        }
    }
}

impl SlotRandomness for SeededRandomness {
    fn arrivals(&mut self, _slot: u64, out: &mut [bool]) {
        for (o, d) in out.iter_mut().zip(&self.arrival) {
            *o = d.sample(&mut self.arrival_rng);
        }
    }

    fn channels(&mut self, _slot: u64, out: &mut [bool]) {
        for (o, d) in out.iter_mut().zip(&self.channel) {
            *o = d.sample(&mut self.channel_rng);
        }
    }

    fn policy_draw(&mut self, _slot: u64) -> f64 {
        self.policy_rng.gen()
    }
}

/// Simulate `config.horizon()` slots with randomness seeded by `config.seed()`.
pub fn run(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    policy: &Policy,
    options: &RunOptions,
) -> RunResult {
    let mut source = SeededRandomness::new(config, config.seed());
    run_with(config, discipline, policy, options, &mut source)
}

/// Simulate with an explicit randomness source.
pub fn run_with<R: SlotRandomness>(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    policy: &Policy,
    options: &RunOptions,
    source: &mut R,
) -> RunResult {
    let n = config.n_streams();
    let horizon = config.horizon();
    let uses_draw = !matches!(policy, Policy::MaxWeight { .. });
    let fifo = discipline == QueueDiscipline::Fifo;

    let mut states = vec![StreamState::new(); n];
    let mut stats = vec![StreamStats::default(); n];
    let mut last_delivery = vec![0u64; n];
    let mut arrivals = vec![false; n];
    let mut channels = vec![false; n];
    let mut views = vec![
        StreamView {
            aoi: 1,
            system_time: None,
        };
        n
    ];

    let half = horizon / 2;
    let mut backlog_at_half = 0u64;
    let mut total_backlog = 0u64;
    let mut cap_hit = false;
    let mut slots = 0u64;

    for t in 1..=horizon {
        if t == half + 1 {
            backlog_at_half = total_backlog;
        }
        source.arrivals(t, &mut arrivals);
        for i in 0..n {
            let st = &mut states[i];
            stats[i].backlog_sum += st.queue.len() as u128;
            stats[i].aoi_sum += st.aoi as u128;
            if arrivals[i] {
                st.apply_arrival(discipline, t);
                if fifo {
                    total_backlog += 1;
                }
            }
            views[i] = StreamView {
                aoi: st.aoi,
                system_time: st.system_time(t),
            };
        }
        let draw = if uses_draw { source.policy_draw(t) } else { 0.0 };
        let decision = policy.decide(&views, draw);
        source.channels(t, &mut channels);
        let events = advance_slot(&mut states, discipline, t, decision, &arrivals, &channels);
        if let Some(d) = events.delivery {
            let s = &mut stats[d.stream];
            s.deliveries += 1;
            if options.record_log {
                s.inter_delivery.push(t - last_delivery[d.stream]);
                s.delays.push(d.system_time);
            }
            s.last_delay = d.system_time;
            last_delivery[d.stream] = t;
            if fifo {
                total_backlog -= 1;
            }
        }
        slots = t;
        if fifo && total_backlog > options.backlog_cap {
            cap_hit = true;
            break;
        }
    }

    for (s, &last) in stats.iter_mut().zip(&last_delivery) {
        s.residual = slots - last;
    }
    if !fifo {
        total_backlog = states.iter().map(|s| s.backlog() as u64).sum();
    }
    let second_half = slots.saturating_sub(half.min(slots)).max(1);
    let backlog_slope = (total_backlog as f64 - backlog_at_half as f64) / second_half as f64;

    let weighted: f64 = stats
        .iter()
        .zip(config.weight())
        .map(|(s, w)| w * s.aoi_sum as f64)
        .sum();
    let weighted_aoi = weighted / (slots as f64 * n as f64);
    let diverged = cap_hit || (fifo && backlog_slope > options.slope_threshold);

    RunResult {
        stats: SamplePathStats {
            streams: stats,
            slots,
            weighted_aoi,
        },
        ewsaoi: weighted_aoi,
        diverged,
        cap_hit,
        backlog_slope,
        config: config.clone(),
        policy: policy.to_string(),
        discipline,
    }
}

/// Relative difference, per stream, between the time-average AoI and its
/// decomposition into inter-delivery intervals, delays and the residual
///
/// `(1/T)[Σ_m z[m−1] I[m] + Σ_m (I[m]+1) I[m]/2 + z[D] R + (R+1) R/2]`, `z[0] = 0`.
///
/// All terms are integers, so the decomposition is evaluated exactly.
pub fn prop1_identity_check(stats: &SamplePathStats, horizon: u64) -> Result<Vec<f64>, SimError> {
    stats
        .streams
        .iter()
        .enumerate()
        .map(|(stream, s)| {
            if s.inter_delivery.len() as u64 != s.deliveries || s.delays.len() as u64 != s.deliveries {
                return Err(SimError::LogNotRecorded { stream });
            }
            let covered = s.inter_delivery.iter().sum::<u64>() + s.residual;
            if covered != horizon {
                return Err(SimError::HorizonMismatch {
                    stream,
                    covered,
                    horizon,
                });
            }
            // Twice the bracket, to stay in integers.
            let mut twice: u128 = 0;
            let mut prev_delay = 0u128;
            for (&i, &z) in s.inter_delivery.iter().zip(&s.delays) {
                let i = i as u128;
                twice += 2 * prev_delay * i + (i + 1) * i;
                prev_delay = z as u128;
            }
            let r = s.residual as u128;
            twice += 2 * prev_delay * r + (r + 1) * r;
            let rhs = twice as f64 / (2.0 * horizon as f64);
            let lhs = s.aoi_sum as f64 / horizon as f64;
            Ok((rhs - lhs) / lhs)
        })
        .collect()
}

/// Summary of independent replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicated {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single replication.
    pub stderr: f64,
    pub diverged_fraction: f64,
    /// Per-replication EWSAoI, in seed order.
    pub samples: Vec<f64>,
}

impl Replicated {
    pub fn from_samples(samples: Vec<f64>, diverged: usize) -> Self {
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        let stderr = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            diverged_fraction: diverged as f64 / k,
            samples,
        }
    }
}

/// Run `replications` independent copies with seeds `seed, seed+1, …`,
/// in parallel on the current rayon pool.
///
/// # Panics
/// If `replications` is zero.
pub fn replicate(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    policy: &Policy,
    replications: usize,
    options: &RunOptions,
) -> Replicated {
    assert!(replications >= 1, "at least one replication is required");
    let results: Vec<(f64, bool)> = (0..replications as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = config.clone().with_seed(config.seed().wrapping_add(k));
            let r = run(&cfg, discipline, policy, options);
            (r.ewsaoi, r.diverged)
        })
        .collect();
    let diverged = results.iter().filter(|r| r.1).count();
    Replicated::from_samples(results.into_iter().map(|r| r.0).collect(), diverged)
}
