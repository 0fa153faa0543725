//! Scheduling policies: stationary randomized and Max-Weight.

use std::fmt;

use thiserror::Error;

use crate::analysis::{self, AnalysisError, RandomizedPolicySpec};
use crate::model::{NetworkConfig, QueueDiscipline};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("expected {expected} Max-Weight coefficients, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("Max-Weight coefficient beta[{index}] = {value} must be positive and finite")]
    NonPositiveBeta { index: usize, value: f64 },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// What a scheduler sees of one stream at decision time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamView {
    pub aoi: u64,
    /// System time of the head-of-line packet; `None` when the queue is empty.
    pub system_time: Option<u64>,
}

impl StreamView {
    pub fn has_packet(&self) -> bool {
        self.system_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Picks stream `i` with probability `μ_i` regardless of state.
    StationaryRandomized(RandomizedPolicySpec),
    /// Picks the nonempty stream maximizing `β_i p_i (h_i − z_i)`.
    MaxWeight {
        beta: Vec<f64>,
        /// `β_i p_i`, cached.
        gain: Vec<f64>,
    },
    /// `μ_i = 1/N`.
    Naive,
}

impl Policy {
    pub fn max_weight(beta: Vec<f64>, config: &NetworkConfig) -> Result<Self, PolicyError> {
        if beta.len() != config.n_streams() {
            return Err(PolicyError::LengthMismatch {
                expected: config.n_streams(),
                found: beta.len(),
            });
        }
        if let Some((index, &value)) = beta
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b > 0.0 && b.is_finite()))
        {
            return Err(PolicyError::NonPositiveBeta { index, value });
        }
        let gain = beta
            .iter()
            .zip(config.channel_reliability())
            .map(|(b, p)| b * p)
            .collect();
        Ok(Policy::MaxWeight { beta, gain })
    }

    /// Choose a stream for this slot.
    ///
    /// `draw` is a uniform sample on `[0, 1)` and is only consulted by the
    /// randomized policies. A randomized policy may pick a stream with an
    /// empty queue, in which case the base station idles.
    pub fn decide(&self, obs: &[StreamView], draw: f64) -> Option<usize> {
        match self {
            Policy::StationaryRandomized(spec) => sample_index(spec.mu(), draw),
            Policy::Naive => {
                let n = obs.len();
                if n == 0 {
                    return None;
                }
                Some(((draw * n as f64) as usize).min(n - 1))
            }
            Policy::MaxWeight { gain, .. } => {
                let mut best: Option<(usize, f64)> = None;
                for (i, view) in obs.iter().enumerate() {
                    let Some(z) = view.system_time else { continue };
                    let reward = gain[i] * view.aoi.saturating_sub(z) as f64;
                    if best.map_or(true, |(_, b)| reward > b) {
                        best = Some((i, reward));
                    }
                }
                best.map(|(i, _)| i)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Policy::StationaryRandomized(_) => "randomized",
            Policy::MaxWeight { .. } => "max-weight",
            Policy::Naive => "naive",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::StationaryRandomized(spec) => write!(f, "randomized(mu={:?})", spec.mu()),
            Policy::MaxWeight { beta, .. } => write!(f, "max-weight(beta={beta:?})"),
            Policy::Naive => f.write_str("naive"),
        }
    }
}

fn sample_index(mu: &[f64], draw: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, &m) in mu.iter().enumerate() {
        acc += m;
        if draw < acc {
            return Some(i);
        }
    }
    None
}

/// Optimal randomized allocation for a discipline: `μ^S`, `μ^N` or `μ^F`.
pub fn optimal_randomized(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    delta: f64,
) -> Result<RandomizedPolicySpec, AnalysisError> {
    Ok(match discipline {
        QueueDiscipline::SinglePacket => analysis::mu_single(config),
        QueueDiscipline::NoQueue => analysis::mu_noqueue(config),
        QueueDiscipline::Fifo => analysis::mu_fifo(config, delta)?.spec,
    })
}

/// `β_i = w_i / (p_i μ_i^X)` where `μ^X` is the optimal randomized
/// allocation for `discipline`.
pub fn default_beta(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    delta: f64,
) -> Result<Vec<f64>, AnalysisError> {
    let spec = optimal_randomized(config, discipline, delta)?;
    Ok(beta_from(config, &spec))
}

/// `β_i = w_i / (p_i μ_i)` for an arbitrary allocation.
pub fn beta_from(config: &NetworkConfig, spec: &RandomizedPolicySpec) -> Vec<f64> {
    (0..config.n_streams())
        .map(|i| config.weight()[i] / (config.channel_reliability()[i] * spec.mu()[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::DEFAULT_DELTA;

    fn cfg(p: &[f64], lam: &[f64], w: &[f64]) -> NetworkConfig {
        NetworkConfig::new(p.to_vec(), lam.to_vec(), w.to_vec(), 10, 0).unwrap()
    }

    fn view(aoi: u64, z: Option<u64>) -> StreamView {
        StreamView {
            aoi,
            system_time: z,
        }
    }

    #[test]
    fn max_weight_prefers_larger_age_reduction() {
        let c = cfg(&[1.0, 1.0], &[0.5, 0.5], &[1.0, 1.0]);
        let mw = Policy::max_weight(vec![1.0, 1.0], &c).unwrap();
        // rewards 50 − 30 = 20 and 40 − 10 = 30
        assert_eq!(mw.decide(&[view(50, Some(30)), view(40, Some(10))], 0.0), Some(1));
    }

    #[test]
    fn max_weight_idles_only_when_all_empty() {
        let c = cfg(&[0.5, 0.9, 0.3], &[0.5; 3], &[1.0; 3]);
        let mw = Policy::max_weight(vec![1.0; 3], &c).unwrap();
        assert_eq!(mw.decide(&[view(3, None), view(9, None), view(1, None)], 0.5), None);
        // a zero reward still beats idling
        assert_eq!(mw.decide(&[view(3, None), view(1, Some(0)), view(9, None)], 0.5), Some(1));
    }

    #[test]
    fn max_weight_ties_go_to_lowest_index() {
        let c = cfg(&[1.0, 0.5, 1.0], &[0.5; 3], &[1.0; 3]);
        let mw = Policy::max_weight(vec![1.0, 2.0, 1.0], &c).unwrap();
        let obs = [view(4, Some(1)), view(5, Some(2)), view(7, Some(4))];
        assert_eq!(mw.decide(&obs, 0.0), Some(0));
    }

    #[test]
    fn max_weight_rejects_bad_beta() {
        let c = cfg(&[1.0, 1.0], &[0.5, 0.5], &[1.0, 1.0]);
        assert!(matches!(
            Policy::max_weight(vec![1.0, 0.0], &c),
            Err(PolicyError::NonPositiveBeta { index: 1, .. })
        ));
        assert!(matches!(
            Policy::max_weight(vec![1.0], &c),
            Err(PolicyError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn randomized_degenerate_spec_always_picks_first() {
        let spec = RandomizedPolicySpec::new(vec![1.0, 0.0, 0.0]).unwrap();
        let pol = Policy::StationaryRandomized(spec);
        let obs = [view(1, None); 3];
        for k in 0..1000 {
            assert_eq!(pol.decide(&obs, k as f64 / 1000.0), Some(0));
        }
    }

    #[test]
    fn randomized_idle_mass() {
        let spec = RandomizedPolicySpec::new(vec![0.25, 0.25]).unwrap();
        let pol = Policy::StationaryRandomized(spec);
        let obs = [view(1, None); 2];
        assert_eq!(pol.decide(&obs, 0.1), Some(0));
        assert_eq!(pol.decide(&obs, 0.3), Some(1));
        assert_eq!(pol.decide(&obs, 0.7), None);
    }

    #[test]
    fn naive_splits_unit_interval() {
        let obs = [view(1, None); 4];
        assert_eq!(Policy::Naive.decide(&obs, 0.0), Some(0));
        assert_eq!(Policy::Naive.decide(&obs, 0.26), Some(1));
        assert_eq!(Policy::Naive.decide(&obs, 0.999_999), Some(3));
    }

    #[test]
    fn default_beta_examples() {
        let sym = cfg(&[0.5; 4], &[0.3; 4], &[2.0; 4]);
        for b in default_beta(&sym, QueueDiscipline::SinglePacket, DEFAULT_DELTA).unwrap() {
            assert!((b - 4.0 * 2.0 / 0.5).abs() < 1e-12);
        }

        let c = cfg(&[1.0 / 3.0, 1.0], &[0.2, 0.1], &[1.0, 1.0]);
        let beta = default_beta(&c, QueueDiscipline::SinglePacket, DEFAULT_DELTA).unwrap();
        // μ^S = (√3, 1)/(√3 + 1)
        let s3 = 3f64.sqrt();
        assert!((beta[0] - 3.0 * (s3 + 1.0) / s3).abs() < 1e-12);
        assert!((beta[1] - (s3 + 1.0)).abs() < 1e-12);
        assert!((beta[0] - 4.732_050_807_568_877).abs() < 1e-9);
        assert!((beta[1] - 2.732_050_807_568_877).abs() < 1e-9);

        let full = cfg(&[0.3, 0.8], &[1.0, 1.0], &[2.0, 1.0]);
        let s = default_beta(&full, QueueDiscipline::SinglePacket, DEFAULT_DELTA).unwrap();
        let n = default_beta(&full, QueueDiscipline::NoQueue, DEFAULT_DELTA).unwrap();
        for (a, b) in s.iter().zip(&n) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn default_beta_fifo_infeasible() {
        let c = cfg(&[1.0 / 3.0, 1.0], &[0.35, 0.35 / 3.0], &[1.0, 1.0]);
        assert!(matches!(
            default_beta(&c, QueueDiscipline::Fifo, DEFAULT_DELTA),
            Err(AnalysisError::Infeasible { .. })
        ));
    }
}
