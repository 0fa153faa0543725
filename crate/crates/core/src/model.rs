//! Network parameters and the exact per-slot dynamics of streams, queues and AoI.
//!
//! Every slot is processed in a fixed order:
//!
//! 1. arrivals are applied to the queues ([`StreamState::apply_arrival`]),
//! 2. the policy observes the post-arrival state and picks at most one stream,
//! 3. channel states are realized,
//! 4. deliveries happen and the AoI for the next slot is computed ([`advance_slot`]).
//!
//! Under the no-queue discipline a packet is only transmittable in its arrival
//! slot, so the policy has to see same-slot arrivals; the ordering above makes
//! that possible.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while validating a [`NetworkConfig`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("network must have at least one stream")]
    NoStreams,
    #[error("{field} has {found} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{field}[{index}] = {value} is outside (0, 1]")]
    NotAProbability {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("weight[{index}] = {value} must be a positive finite number")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("horizon must be at least one slot")]
    ZeroHorizon,
}

/// The parameters `(N, p_i, λ_i, w_i)` of a network plus run controls.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    channel_reliability: Vec<f64>,
    arrival_rate: Vec<f64>,
    weight: Vec<f64>,
    horizon: u64,
    seed: u64,
}

fn check_probabilities(field: &'static str, values: &[f64]) -> Result<(), ConfigError> {
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(ConfigError::NotAProbability {
                field,
                index,
                value,
            });
        }
    }
    Ok(())
}

impl NetworkConfig {
    pub fn new(
        channel_reliability: Vec<f64>,
        arrival_rate: Vec<f64>,
        weight: Vec<f64>,
        horizon: u64,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        let n = channel_reliability.len();
        if n == 0 {
            return Err(ConfigError::NoStreams);
        }
        for (field, len) in [("arrival_rate", arrival_rate.len()), ("weight", weight.len())] {
            if len != n {
                return Err(ConfigError::LengthMismatch {
                    field,
                    expected: n,
                    found: len,
                });
            }
        }
        check_probabilities("channel_reliability", &channel_reliability)?;
        check_probabilities("arrival_rate", &arrival_rate)?;
        for (index, &value) in weight.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NonPositiveWeight { index, value });
            }
        }
        if horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        Ok(Self {
            channel_reliability,
            arrival_rate,
            weight,
            horizon,
            seed,
        })
    }

    pub fn n_streams(&self) -> usize {
        self.channel_reliability.len()
    }

    /// Per-stream channel ON probabilities `p_i`.
    pub fn channel_reliability(&self) -> &[f64] {
        &self.channel_reliability
    }

    /// Per-stream Bernoulli arrival probabilities `λ_i`.
    pub fn arrival_rate(&self) -> &[f64] {
        &self.arrival_rate
    }

    /// Per-stream priorities `w_i`.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_horizon(mut self, horizon: u64) -> Result<Self, ConfigError> {
        if horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same network with a different arrival-rate vector.
    pub fn with_arrival_rate(self, arrival_rate: Vec<f64>) -> Result<Self, ConfigError> {
        Self::new(
            self.channel_reliability,
            arrival_rate,
            self.weight,
            self.horizon,
            self.seed,
        )
    }
}

/// Which packet of a queue is eligible for transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueueDiscipline {
    /// Packets are served in arrival order; the queue is unbounded.
    Fifo,
    /// A new arrival replaces whatever packet is queued.
    SinglePacket,
    /// A packet can only be sent in the slot it arrives in.
    NoQueue,
}

impl QueueDiscipline {
    pub const ALL: [QueueDiscipline; 3] = [
        QueueDiscipline::SinglePacket,
        QueueDiscipline::NoQueue,
        QueueDiscipline::Fifo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueueDiscipline::Fifo => "fifo",
            QueueDiscipline::SinglePacket => "single",
            QueueDiscipline::NoQueue => "noqueue",
        }
    }
}

impl fmt::Display for QueueDiscipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueueDiscipline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fifo" => Ok(QueueDiscipline::Fifo),
            "single" | "singlepacket" | "lifo" => Ok(QueueDiscipline::SinglePacket),
            "noqueue" | "none" => Ok(QueueDiscipline::NoQueue),
            other => Err(format!(
                "unknown queue discipline `{other}` (expected fifo, single or noqueue)"
            )),
        }
    }
}

/// A queued packet, identified by its arrival slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub arrival_slot: u64,
}

/// Runtime state of one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamState {
    /// AoI `h_i(t)` at the destination at the beginning of the current slot.
    pub aoi: u64,
    pub queue: VecDeque<Packet>,
    /// Arrival slot of the freshest packet delivered so far (0 before any delivery).
    pub last_delivered_arrival: u64,
}

impl Default for StreamState {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamState {
    pub fn new() -> Self {
        Self {
            aoi: 1,
            queue: VecDeque::new(),
            last_delivered_arrival: 0,
        }
    }

    pub fn head_of_line(&self) -> Option<&Packet> {
        self.queue.front()
    }

    /// System time `z_i(t)` of the head-of-line packet, undefined for an empty queue.
    pub fn system_time(&self, slot: u64) -> Option<u64> {
        self.head_of_line().map(|p| slot - p.arrival_slot)
    }

    pub fn backlog(&self) -> usize {
        self.queue.len()
    }

    /// Enqueues a packet that arrived in `slot` according to the discipline.
    pub fn apply_arrival(&mut self, discipline: QueueDiscipline, slot: u64) {
        debug_assert!(slot >= 1);
        let packet = Packet { arrival_slot: slot };
        match discipline {
            QueueDiscipline::Fifo => self.queue.push_back(packet),
            QueueDiscipline::SinglePacket | QueueDiscipline::NoQueue => {
                self.queue.clear();
                self.queue.push_back(packet);
            }
        }
    }
}

/// A successful transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub stream: usize,
    /// System time of the delivered packet, i.e. its delay `z_i(t)`.
    pub system_time: u64,
}

/// What happened during one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotEvents<'a> {
    pub arrivals: &'a [bool],
    pub scheduled: Option<usize>,
    /// The scheduled stream, if it actually had a head-of-line packet.
    pub transmitted: Option<usize>,
    pub channel_on: &'a [bool],
    pub delivery: Option<Delivery>,
}

impl SlotEvents<'_> {
    /// `u_i(t)`.
    pub fn is_transmitted(&self, stream: usize) -> bool {
        self.transmitted == Some(stream)
    }

    /// `d_i(t)`.
    pub fn delivered(&self, stream: usize) -> bool {
        self.delivery.is_some_and(|d| d.stream == stream)
    }
}

/// Executes steps 3-4 of a slot: serves the decision over the realized
/// channels and moves every stream's AoI to slot `slot + 1`.
///
/// Arrivals for `slot` must already have been applied. A decision naming an
/// empty queue idles the base station.
pub fn advance_slot<'a>(
    states: &mut [StreamState],
    discipline: QueueDiscipline,
    slot: u64,
    decision: Option<usize>,
    arrivals: &'a [bool],
    channel_on: &'a [bool],
) -> SlotEvents<'a> {
    debug_assert_eq!(states.len(), channel_on.len());
    let transmitted = decision.filter(|&i| !states[i].queue.is_empty());
    let mut delivery = None;
    if let Some(i) = transmitted {
        let state = &mut states[i];
        if channel_on[i] {
            if let Some(packet) = state.head_of_line().copied() {
                assert!(
                    packet.arrival_slot > state.last_delivered_arrival,
                    "stream {i}: delivered packet from slot {} is not fresher than {}",
                    packet.arrival_slot,
                    state.last_delivered_arrival
                );
                let z = slot - packet.arrival_slot;
                state.queue.pop_front();
                state.last_delivered_arrival = packet.arrival_slot;
                delivery = Some(Delivery {
                    stream: i,
                    system_time: z,
                });
            }
        }
    }
    for (i, state) in states.iter_mut().enumerate() {
        match delivery {
            Some(d) if d.stream == i => state.aoi = d.system_time + 1,
            _ => state.aoi += 1,
        }
        if discipline == QueueDiscipline::NoQueue {
            state.queue.clear();
        }
    }
    SlotEvents {
        arrivals,
        scheduled: decision,
        transmitted,
        channel_on,
        delivery,
    }
}
