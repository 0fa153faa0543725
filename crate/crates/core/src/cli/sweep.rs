//! λ sweeps: one CSV row per (λ, discipline, policy).

use std::io::{self, Write};

use rayon::prelude::*;

use super::config::{ExperimentSpec, PolicyKind};
use super::format::num;
use super::CliError;
use crate::analysis::{self, AnalysisError, RandomizedPolicySpec};
use crate::model::{NetworkConfig, QueueDiscipline};
use crate::policies::{self, Policy};
use crate::sim::{self, RunOptions};

pub const CSV_HEADER: &str =
    "lambda,discipline,policy,source,ewsaoi_mean,ewsaoi_stderr,lower_bound,diverged_fraction";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    ClosedForm,
    Simulated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::ClosedForm => "closed_form",
            Source::Simulated => "simulated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub discipline: QueueDiscipline,
    pub policy: PolicyKind,
    pub source: Source,
    pub ewsaoi_mean: f64,
    pub ewsaoi_stderr: f64,
    pub lower_bound: f64,
    pub diverged_fraction: f64,
}

/// Builds the simulated policy for a discipline.
///
/// For FIFO queues outside the region where a stabilizing randomized
/// allocation exists, Max-Weight falls back to the single-packet weights and
/// the randomized policy to `μ^S`, so the divergence can still be observed.
/// The second element is a note describing any such fallback.
pub fn build_policy(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    kind: PolicyKind,
    delta: f64,
) -> Result<(Policy, Option<String>), CliError> {
    let spec = match policies::optimal_randomized(config, discipline, delta) {
        Ok(spec) => (spec, None),
        Err(AnalysisError::Infeasible { load }) => (
            analysis::mu_single(config),
            Some(format!(
                "no stabilizing randomized FIFO allocation (sum (lambda_i+delta)/p_i = {}); using the single-packet allocation",
                num(load)
            )),
        ),
        Err(e) => return Err(e.into()),
    };
    let policy = match kind {
        PolicyKind::OptimalRandomized => Policy::StationaryRandomized(spec.0),
        PolicyKind::MaxWeight => Policy::max_weight(policies::beta_from(config, &spec.0), config)?,
        PolicyKind::Naive => Policy::Naive,
    };
    Ok((policy, spec.1))
}

fn closed_form(
    config: &NetworkConfig,
    discipline: QueueDiscipline,
    kind: PolicyKind,
    delta: f64,
) -> Option<Result<f64, AnalysisError>> {
    let n = config.n_streams();
    Some(match (discipline, kind) {
        (_, PolicyKind::MaxWeight) => return None,
        (QueueDiscipline::SinglePacket, PolicyKind::OptimalRandomized) => {
            Ok(analysis::ewsaoi_single_optimal(config))
        }
        (QueueDiscipline::NoQueue, PolicyKind::OptimalRandomized) => {
            Ok(analysis::ewsaoi_noqueue_optimal(config))
        }
        (QueueDiscipline::Fifo, PolicyKind::OptimalRandomized) => {
            analysis::mu_fifo(config, delta).map(|r| r.ewsaoi)
        }
        (QueueDiscipline::SinglePacket, PolicyKind::Naive) => {
            analysis::ewsaoi_single(config, &RandomizedPolicySpec::uniform(n))
        }
        (QueueDiscipline::NoQueue, PolicyKind::Naive) => {
            analysis::ewsaoi_noqueue(config, &RandomizedPolicySpec::uniform(n))
        }
        (QueueDiscipline::Fifo, PolicyKind::Naive) => {
            analysis::ewsaoi_fifo(config, &RandomizedPolicySpec::uniform(n))
        }
    })
}

fn sweep_point(
    spec: &ExperimentSpec,
    lambda: f64,
    discipline: QueueDiscipline,
    kind: PolicyKind,
) -> Result<SweepRow, CliError> {
    let config = spec.config_at(lambda)?;
    let lower_bound = analysis::lower_bound(&config).value;
    let row = |source, mean, stderr, diverged| SweepRow {
        lambda,
        discipline,
        policy: kind,
        source,
        ewsaoi_mean: mean,
        ewsaoi_stderr: stderr,
        lower_bound,
        diverged_fraction: diverged,
    };
    match closed_form(&config, discipline, kind, spec.delta) {
        Some(Ok(v)) => Ok(row(Source::ClosedForm, v, 0.0, 0.0)),
        Some(Err(AnalysisError::Infeasible { .. } | AnalysisError::Unstable { .. })) => {
            Ok(row(Source::ClosedForm, f64::INFINITY, 0.0, 1.0))
        }
        Some(Err(e)) => Err(e.into()),
        None => {
            let (policy, _) = build_policy(&config, discipline, kind, spec.delta)?;
            let rep = sim::replicate(
                &config,
                discipline,
                &policy,
                spec.replications,
                &RunOptions::without_log(),
            );
            // Outside Σλ_i/p_i ≤ 1 no policy keeps FIFO queues bounded.
            let diverged = if discipline == QueueDiscipline::Fifo
                && analysis::stability_margin(&config) < 0.0
            {
                1.0
            } else {
                rep.diverged_fraction
            };
            Ok(row(Source::Simulated, rep.mean, rep.stderr, diverged))
        }
    }
}

/// Evaluates every (λ, discipline, policy) point. Rows come back in that
/// nesting order regardless of how the work was scheduled.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>, CliError> {
    let mut jobs = Vec::new();
    for &lambda in &spec.lambdas {
        for &d in &spec.disciplines {
            for &p in &spec.policies {
                jobs.push((lambda, d, p));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(l, d, p)| sweep_point(spec, l, d, p))
        .collect()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(r.lambda),
            r.discipline.as_str(),
            r.policy.as_str(),
            r.source.as_str(),
            num(r.ewsaoi_mean),
            num(r.ewsaoi_stderr),
            num(r.lower_bound),
            num(r.diverged_fraction),
        )?;
    }
    out.flush()
}
