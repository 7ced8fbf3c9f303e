//! Per-step telemetry shared by the navigator and the fleet simulator.

use serde::{Deserialize, Serialize};

use crate::flow_field::{FlowField, Obstacle};
use crate::safety::SafetyReport;
use crate::{AgentId, Vec2};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSample {
    pub id: AgentId,
    pub healthy: bool,
    /// Commanded position `r_d`.
    pub desired: Vec2,
    /// Commanded velocity.
    pub desired_velocity: Vec2,
    /// Vehicle position; absent when only commands were logged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_velocity: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub altitude: Option<f64>,
    /// Navigator potential for this agent, while it is navigating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// Stream value at the commanded position, while navigating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(default)]
    pub noise_injected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub schema_version: u32,
    pub step: usize,
    /// Seconds since scenario start.
    pub time: f64,
    /// Slide increment used by this step's commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    /// Wall-clock navigation time for this step.
    pub runtime_ns: u64,
    pub deadline_missed: bool,
    /// Obstacles that appeared at this step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub activated: Vec<Obstacle>,
    pub agents: Vec<AgentSample>,
}

impl StepRecord {
    pub fn healthy(&self) -> impl Iterator<Item = &AgentSample> {
        self.agents.iter().filter(|a| a.healthy)
    }

    /// Largest commanded speed among healthy agents.
    pub fn peak_commanded_speed(&self) -> f64 {
        self.healthy()
            .map(|a| a.desired_velocity.norm())
            .fold(0.0, f64::max)
    }
}

/// Safety assessment made when the navigator (re)activated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub step: usize,
    pub time: f64,
    pub failed: Vec<AgentId>,
    pub report: SafetyReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLog {
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    #[serde(default)]
    pub activations: Vec<Activation>,
}

impl ScenarioLog {
    pub fn new(dt: f64) -> Self {
        ScenarioLog {
            dt,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Obstacle set in force at each step, in step order.
    pub fn fields(&self) -> Vec<FlowField> {
        let mut current: Vec<Obstacle> = Vec::new();
        self.steps
            .iter()
            .map(|s| {
                current.extend(s.activated.iter().copied());
                FlowField::new(current.clone()).unwrap_or_default()
            })
            .collect()
    }

    /// Copy with wall-clock fields zeroed; everything left is seed-determined.
    pub fn timing_stripped(&self) -> ScenarioLog {
        let mut out = self.clone();
        for s in &mut out.steps {
            s.runtime_ns = 0;
            s.deadline_missed = false;
        }
        out
    }

    pub fn deadline_misses(&self) -> usize {
        self.steps.iter().filter(|s| s.deadline_missed).count()
    }

    pub fn peak_commanded_speed(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.delta_phi.is_some())
            .map(StepRecord::peak_commanded_speed)
            .fold(0.0, f64::max)
    }

    /// Runtimes of steps where the navigator ran.
    pub fn navigation_runtimes(&self) -> Vec<u64> {
        self.steps
            .iter()
            .filter(|s| s.delta_phi.is_some())
            .map(|s| s.runtime_ns)
            .collect()
    }
}
