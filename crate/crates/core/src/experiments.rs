//! Batches of independent runs: the promise-tightness sweep and the
//! comparison of promise and dwell-time variants against the self-triggered
//! baseline.

use rayon::prelude::*;

use crate::config::{Law, ScenarioConfig};
use crate::engine::{run, RunOutput};
use crate::error::{Error, Result};
use crate::promises::{PromiseRule, PromiseRuleConfig};

/// Horizon at which sweep rows are read.
pub const SWEEP_HORIZON: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub v_at_horizon: f64,
    pub n_comm_at_horizon: u64,
    /// Sum of per-agent event messages over the whole run.
    pub n_e_total: u64,
}

fn run_all(configs: &[ScenarioConfig], parallel: bool) -> Result<Vec<RunOutput>> {
    if parallel {
        configs.par_iter().map(run).collect()
    } else {
        configs.iter().map(run).collect()
    }
}

/// One team-law run per `λ`, all on `config`'s seed and a 30 s horizon.
pub fn sweep_lambda(
    config: &ScenarioConfig,
    lambdas: &[f64],
    parallel: bool,
) -> Result<Vec<SweepRow>> {
    if !matches!(config.promise.rule, PromiseRule::StaticBall { .. }) {
        return Err(Error::InvalidConfig(
            "the λ sweep needs the static promise rule".into(),
        ));
    }
    let configs: Vec<ScenarioConfig> = lambdas
        .iter()
        .map(|&lambda| {
            let mut cfg = config.clone();
            if cfg.law == Law::SelfTriggered {
                cfg.law = Law::Team;
            }
            cfg.duration = SWEEP_HORIZON;
            cfg.promise = PromiseRuleConfig {
                rule: PromiseRule::StaticBall { lambda },
                ..config.promise
            };
            cfg
        })
        .collect();
    let runs = run_all(&configs, parallel)?;
    Ok(lambdas
        .iter()
        .zip(&runs)
        .map(|(&lambda, r)| SweepRow {
            lambda,
            v_at_horizon: r.v_at(SWEEP_HORIZON),
            n_comm_at_horizon: r.n_comm_at(SWEEP_HORIZON),
            n_e_total: r.metrics.n_e.iter().sum(),
        })
        .collect())
}

/// The default `λ` grid `{0, 0.1, …, 1}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    SelfTriggered,
    /// Fixed promises, fixed dwell time.
    Fpfd,
    /// Fixed promises, adaptive dwell time.
    Fpad,
    /// Adaptive promises, fixed dwell time.
    Apfd,
    /// Adaptive promises, adaptive dwell time.
    Apad,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::SelfTriggered,
        Variant::Fpfd,
        Variant::Fpad,
        Variant::Apfd,
        Variant::Apad,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::SelfTriggered => "self",
            Variant::Fpfd => "FPFD",
            Variant::Fpad => "FPAD",
            Variant::Apfd => "APFD",
            Variant::Apad => "APAD",
        }
    }

    /// Derives the variant's configuration from a static-rule team scenario.
    /// Adaptive promises use the dynamic rule with the scale and floor
    /// given by `dynamic`.
    pub fn configure(self, base: &ScenarioConfig, dynamic: PromiseRuleConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        let (law, adaptive_promise, adaptive_dwell) = match self {
            Variant::SelfTriggered => (Law::SelfTriggered, false, false),
            Variant::Fpfd => (Law::Team, false, false),
            Variant::Fpad => (Law::Team, false, true),
            Variant::Apfd => (Law::Team, true, false),
            Variant::Apad => (Law::Team, true, true),
        };
        cfg.law = law;
        if adaptive_promise {
            cfg.promise = dynamic;
        }
        cfg.dwell.adaptive = adaptive_dwell;
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub variants: Vec<Variant>,
    /// Sample times (every `stride` ticks).
    pub times: Vec<f64>,
    /// `n_comm[v][k]`: cumulative N_comm of variant `v` at `times[k]`.
    pub n_comm: Vec<Vec<u64>>,
    /// `v[v][k]`: V of variant `v` at `times[k]`.
    pub v: Vec<Vec<f64>>,
}

/// Runs the five variants on a common seed and samples their cumulative
/// message counts and V every `stride` ticks.
pub fn compare(
    base: &ScenarioConfig,
    dynamic: PromiseRuleConfig,
    stride: usize,
    parallel: bool,
) -> Result<Comparison> {
    let stride = stride.max(1);
    let configs: Vec<_> = Variant::ALL
        .iter()
        .map(|v| v.configure(base, dynamic))
        .collect();
    let runs = run_all(&configs, parallel)?;
    let ticks = runs.iter().map(|r| r.lyapunov.len()).min().unwrap_or(0);
    let idx: Vec<usize> = (0..ticks)
        .step_by(stride)
        .chain((ticks > 0 && (ticks - 1) % stride != 0).then(|| ticks - 1))
        .collect();
    Ok(Comparison {
        variants: Variant::ALL.to_vec(),
        times: idx.iter().map(|&k| runs[0].lyapunov[k].0.secs()).collect(),
        n_comm: runs
            .iter()
            .map(|r| idx.iter().map(|&k| r.n_comm[k]).collect())
            .collect(),
        v: runs
            .iter()
            .map(|r| idx.iter().map(|&k| r.lyapunov[k].1).collect())
            .collect(),
    })
}
