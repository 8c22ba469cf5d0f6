//! Scenario configuration and its TOML file format.
//!
//! Agents are numbered from 0. `formation.distances` lists one desired
//! distance per entry of `graph.edges`, in the same order.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::FormationSpec;
use crate::model::{CommGraph, ControlBounds, UnicycleState};
use crate::network::NetworkParams;
use crate::promises::{PromiseRule, PromiseRuleConfig};
use crate::triggers::{DwellConfig, TriggerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Law {
    #[serde(rename = "self")]
    SelfTriggered,
    #[serde(rename = "team")]
    Team,
    #[serde(rename = "robust-team")]
    RobustTeam,
}

impl Law {
    pub fn as_str(self) -> &'static str {
        match self {
            Law::SelfTriggered => "self",
            Law::Team => "team",
            Law::RobustTeam => "robust-team",
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Law {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self" => Ok(Law::SelfTriggered),
            "team" => Ok(Law::Team),
            "robust-team" => Ok(Law::RobustTeam),
            other => Err(Error::InvalidConfig(format!(
                "unknown law {other:?} (expected self, team or robust-team)"
            ))),
        }
    }
}

/// Axis-aligned box `[x_min, x_max] × [y_min, y_max]` the agents start in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub graph: CommGraph,
    pub formation: FormationSpec,
    pub initial: Vec<UnicycleState>,
    pub workspace: Option<Workspace>,
    pub bounds: ControlBounds,
    pub dwell: DwellConfig,
    pub promise: PromiseRuleConfig,
    pub network: NetworkParams,
    pub trigger: TriggerConfig,
    pub law: Law,
    pub duration: f64,
    pub dt_sim: f64,
    pub seed: u64,
    /// Every n-th tick is written to the state trace.
    pub trace_stride: u64,
}

impl ScenarioConfig {
    /// Four unicycles driving to the 2×1 rectangle on the complete graph
    /// without the 0–2 diagonal: team law, static radius δ = 1, fixed dwell
    /// times 0.3 s and 0.003 s, ideal channel, 30 s.
    pub fn formation4() -> Self {
        let graph = CommGraph::complete_minus(4, &[(0, 2)]).expect("valid graph");
        let formation = FormationSpec::rectangle(&graph, 150.0).expect("valid formation");
        let bounds = ControlBounds {
            u_max: 5.0,
            v_max: 3.0,
        };
        Self {
            graph,
            formation,
            initial: [(6.0, 10.0), (7.0, 3.0), (14.0, 8.0), (7.0, 13.0)]
                .iter()
                .map(|&(x, y)| UnicycleState::new(x, y, FRAC_PI_2))
                .collect(),
            workspace: None,
            bounds,
            dwell: DwellConfig::fixed(0.3, 0.003),
            // δ = 1 = 2 · u_max · λ
            promise: PromiseRuleConfig::static_ball(0.1),
            network: NetworkParams::ideal(),
            trigger: TriggerConfig::default(),
            law: Law::Team,
            duration: 30.0,
            dt_sim: 0.001,
            seed: 0,
            trace_stride: 10,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.graph.agent_count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.agent_count();
        if self.initial.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{} initial states for {n} agents",
                self.initial.len()
            )));
        }
        for (i, s) in self.initial.iter().enumerate() {
            if !(s.position.iter().all(|c| c.is_finite()) && s.heading.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "initial state of agent {i} is not finite"
                )));
            }
            if let Some(w) = self.workspace {
                let p = s.position;
                if p.x < w.x_min || p.x > w.x_max || p.y < w.y_min || p.y > w.y_max {
                    return Err(Error::InvalidConfig(format!(
                        "agent {i} starts at ({}, {}) outside the workspace",
                        p.x, p.y
                    )));
                }
            }
        }
        ControlBounds::new(self.bounds.u_max, self.bounds.v_max)?;
        self.dwell.validate()?;
        self.promise.validate(self.dwell.t_d_event)?;
        self.network.validate()?;
        self.trigger.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.dt_sim > 0.0 && self.dt_sim <= self.dwell.t_d_event / 3.0 + 1e-15) {
            return Err(Error::InvalidConfig(format!(
                "dt_sim must lie in (0, t_d_event/3], got {} with t_d_event={}",
                self.dt_sim, self.dwell.t_d_event
            )));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidConfig(
                "trace_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let cfg = file.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScenarioFile::from_config(self)).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    graph: GraphSection,
    formation: FormationSection,
    agents: AgentsSection,
    control: ControlSection,
    dwell: DwellConfig,
    promise: PromiseSection,
    #[serde(default)]
    network: NetworkParams,
    engine: EngineSection,
    #[serde(default)]
    trigger: TriggerConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSection {
    agents: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormationSection {
    gain: f64,
    distances: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentsSection {
    /// `[x, y, heading]` per agent.
    initial: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workspace: Option<Workspace>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlSection {
    u_max: f64,
    v_max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PromiseSection {
    /// `static` or `dynamic`.
    rule: String,
    #[serde(default)]
    lambda: f64,
    #[serde(default = "default_dynamic_scale")]
    dynamic_scale: f64,
    #[serde(default = "default_dynamic_floor")]
    dynamic_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expiration: Option<f64>,
}

fn default_dynamic_scale() -> f64 {
    0.5
}

fn default_dynamic_floor() -> f64 {
    1e-6
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineSection {
    law: Law,
    duration: f64,
    dt_sim: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trace_stride")]
    trace_stride: u64,
}

fn default_trace_stride() -> u64 {
    10
}

impl ScenarioFile {
    fn into_config(self) -> Result<ScenarioConfig> {
        let edges: Vec<(usize, usize)> = self.graph.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = CommGraph::new(self.graph.agents, &edges)?;
        if self.formation.distances.len() != edges.len() {
            return Err(Error::InvalidFormation(format!(
                "{} distances for {} edges",
                self.formation.distances.len(),
                edges.len()
            )));
        }
        let pairs: Vec<_> = edges
            .iter()
            .copied()
            .zip(self.formation.distances.iter().copied())
            .collect();
        let formation = FormationSpec::new(&graph, self.formation.gain, &pairs)?;
        let rule = match self.promise.rule.as_str() {
            "static" => PromiseRule::StaticBall {
                lambda: self.promise.lambda,
            },
            "dynamic" => PromiseRule::DynamicBall {
                scale: self.promise.dynamic_scale,
                floor: self.promise.dynamic_floor,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown promise rule {other:?} (expected static or dynamic)"
                )))
            }
        };
        Ok(ScenarioConfig {
            graph,
            formation,
            initial: self
                .agents
                .initial
                .iter()
                .map(|s| UnicycleState::new(s[0], s[1], s[2]))
                .collect(),
            workspace: self.agents.workspace,
            bounds: ControlBounds {
                u_max: self.control.u_max,
                v_max: self.control.v_max,
            },
            dwell: self.dwell,
            promise: PromiseRuleConfig {
                rule,
                expiration: self.promise.expiration,
            },
            network: self.network,
            trigger: self.trigger,
            law: self.engine.law,
            duration: self.engine.duration,
            dt_sim: self.engine.dt_sim,
            seed: self.engine.seed,
            trace_stride: self.engine.trace_stride,
        })
    }

    fn from_config(cfg: &ScenarioConfig) -> Self {
        let edges = cfg.graph.edges();
        let (rule, lambda, dynamic_scale, dynamic_floor) = match cfg.promise.rule {
            PromiseRule::StaticBall { lambda } => (
                "static",
                lambda,
                default_dynamic_scale(),
                default_dynamic_floor(),
            ),
            PromiseRule::DynamicBall { scale, floor } => ("dynamic", 0.0, scale, floor),
        };
        ScenarioFile {
            graph: GraphSection {
                agents: cfg.graph.agent_count(),
                edges: edges.iter().map(|&(i, j)| [i, j]).collect(),
            },
            formation: FormationSection {
                gain: cfg.formation.gain(),
                distances: edges
                    .iter()
                    .map(|&(i, j)| cfg.formation.distance(i, j).expect("edge has a distance"))
                    .collect(),
            },
            agents: AgentsSection {
                initial: cfg
                    .initial
                    .iter()
                    .map(|s| [s.position.x, s.position.y, s.heading])
                    .collect(),
                workspace: cfg.workspace,
            },
            control: ControlSection {
                u_max: cfg.bounds.u_max,
                v_max: cfg.bounds.v_max,
            },
            dwell: cfg.dwell,
            promise: PromiseSection {
                rule: rule.to_string(),
                lambda,
                dynamic_scale,
                dynamic_floor,
                expiration: cfg.promise.expiration,
            },
            network: cfg.network,
            engine: EngineSection {
                law: cfg.law,
                duration: cfg.duration,
                dt_sim: cfg.dt_sim,
                seed: cfg.seed,
                trace_stride: cfg.trace_stride,
            },
            trigger: cfg.trigger,
        }
    }
}
