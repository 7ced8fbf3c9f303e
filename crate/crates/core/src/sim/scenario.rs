use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::vehicle::VehicleModel;
use crate::error::{Error, Result};
use crate::navigator::NavigatorConfig;
use crate::safety::{LambdaSettings, SafetyMargins};
use crate::solver::SolverConfig;
use crate::{AgentId, Vec2};

/// Streamwise spacing between the rows of the six-agent layout, meters.
///
/// Slightly above `2.72 * sqrt(3) / 2` so the diagonal neighbours sit just
/// beyond the lateral pairs, which are exactly 2.72 m apart.
pub const SIX_AGENT_ROW_SPACING: f64 = 2.36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: AgentId,
    /// Initial x-y position, meters.
    pub position: Vec2,
    /// Constant flight altitude, meters.
    #[serde(default = "default_altitude")]
    pub altitude: f64,
}

fn default_altitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    pub agent: AgentId,
    /// Seconds from scenario start.
    pub time: f64,
}

/// Motion before the first failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreFailureMotion {
    /// Hover at the initial positions.
    #[default]
    Hold,
    /// Fly the obstacle-free field at `v_des`.
    Advance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigationSettings {
    /// Control period, seconds.
    pub dt: f64,
    pub k_passes: usize,
    /// Desired peak speed, m/s.
    pub v_des: f64,
}

impl Default for NavigationSettings {
    fn default() -> Self {
        let n = NavigatorConfig::default();
        NavigationSettings {
            dt: n.dt,
            k_passes: n.k_passes,
            v_des: n.v_des,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub iterations: usize,
    /// Escape noise standard deviation, meters.
    pub noise_sigma: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSettings {
            iterations: s.iterations,
            noise_sigma: s.noise_sigma,
        }
    }
}

/// How activations estimate `lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyCheckSettings {
    /// Grid spacing, meters.
    pub lambda_grid_step: f64,
    /// Padding around agents and disks, meters.
    pub lambda_padding: f64,
    pub refine_lambda: bool,
    pub lambda_inflation: f64,
}

impl Default for SafetyCheckSettings {
    fn default() -> Self {
        SafetyCheckSettings {
            lambda_grid_step: LambdaSettings::DEFAULT_STEP,
            lambda_padding: 3.0,
            refine_lambda: true,
            lambda_inflation: 0.0,
        }
    }
}

/// A complete, self-describing simulation run.
///
/// The scenario seed drives both the solver noise and the vehicle
/// disturbances; `navigator.dt` is also the solver's velocity period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    #[serde(default)]
    pub pre_failure: PreFailureMotion,
    #[serde(default)]
    pub margins: SafetyMargins,
    #[serde(default)]
    pub navigator: NavigationSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub vehicle: VehicleModel,
    #[serde(default)]
    pub safety: SafetyCheckSettings,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
}

impl Scenario {
    /// Ticks simulated: `duration / dt`, rounded.
    pub fn steps(&self) -> usize {
        (self.duration / self.navigator.dt).round() as usize
    }

    pub fn navigator_config(&self) -> NavigatorConfig {
        NavigatorConfig {
            dt: self.navigator.dt,
            k_passes: self.navigator.k_passes,
            v_des: self.navigator.v_des,
            total_steps: self.steps(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            iterations: self.solver.iterations,
            noise_sigma: self.solver.noise_sigma,
            dt: self.navigator.dt,
            rng_seed: self.seed,
        }
    }

    pub fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    pub fn initial_positions(&self) -> Vec<Vec2> {
        self.agents.iter().map(|a| a.position).collect()
    }

    /// Every problem with the scenario, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.margins.problems();
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            out.push(format!("duration must be > 0, got {}", self.duration));
        }
        out.extend(self.navigator_config().problems());
        out.extend(self.solver_config().problems());
        out.extend(self.vehicle.problems(self.margins.delta));
        let s = &self.safety;
        if !(s.lambda_grid_step > 0.0 && s.lambda_grid_step.is_finite()) {
            out.push(format!("safety.lambda_grid_step must be > 0, got {}", s.lambda_grid_step));
        }
        if !(s.lambda_padding >= 0.0 && s.lambda_padding.is_finite()) {
            out.push(format!("safety.lambda_padding must be >= 0, got {}", s.lambda_padding));
        }
        if !(s.lambda_inflation >= 0.0 && s.lambda_inflation.is_finite()) {
            out.push(format!("safety.lambda_inflation must be >= 0, got {}", s.lambda_inflation));
        }

        if self.agents.is_empty() {
            out.push("at least one agent is required".into());
        }
        let mut ids = HashSet::new();
        for a in &self.agents {
            if !ids.insert(a.id) {
                out.push(format!("agent id {} appears more than once", a.id));
            }
            if !(a.position.x.is_finite() && a.position.y.is_finite() && a.altitude.is_finite()) {
                out.push(format!("agent {} has a non-finite position or altitude", a.id));
            }
        }
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                if a.id != b.id && a.position == b.position {
                    out.push(format!("agents {} and {} start at the same position", a.id, b.id));
                }
            }
        }

        let mut failed = HashSet::new();
        for f in &self.failures {
            if !ids.contains(&f.agent) {
                out.push(format!("failure refers to unknown agent {}", f.agent));
            }
            if !failed.insert(f.agent) {
                out.push(format!("agent {} fails more than once", f.agent));
            }
            if !(f.time >= 0.0 && f.time <= self.duration) {
                out.push(format!(
                    "failure of {} at t = {} s lies outside [0, {}]",
                    f.agent, f.time, self.duration
                ));
            }
        }
        if !self.agents.is_empty() && failed.len() >= self.agents.len() {
            out.push(format!(
                "{} failures leave no healthy agent out of {}",
                failed.len(),
                self.agents.len()
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(p))
        }
    }
}

/// Leading triangle plus interior agents flying in `+x`, with Q1 at the
/// origin ahead of the others.
///
/// Rows sit [`SIX_AGENT_ROW_SPACING`] apart; lateral neighbours are `2 (2 (delta + epsilon))`
/// = 2.72 m apart, which is the minimum pairwise distance.
pub fn six_agent_layout() -> Vec<(AgentId, Vec2)> {
    let d = 2.72;
    let h = SIX_AGENT_ROW_SPACING;
    vec![
        (AgentId(1), Vec2::new(0.0, 0.0)),
        (AgentId(2), Vec2::new(-2.0 * h, 0.0)),
        (AgentId(3), Vec2::new(-h, d / 2.0)),
        (AgentId(4), Vec2::new(-h, -d / 2.0)),
        (AgentId(5), Vec2::new(-2.0 * h, d)),
        (AgentId(6), Vec2::new(-2.0 * h, -d)),
    ]
}

/// The six-agent CEM demonstration: Q1 fails at 0.5 s and the other five
/// slide past it for 20 s at `v_des = 1 m/s`, `K = 2`, `dt = 0.01 s`.
pub fn default_six_agent_scenario() -> Scenario {
    Scenario {
        name: "six-agent".into(),
        seed: 2019,
        duration: 20.0,
        pre_failure: PreFailureMotion::Hold,
        margins: SafetyMargins::default(),
        navigator: NavigationSettings::default(),
        solver: SolverSettings::default(),
        vehicle: VehicleModel::default(),
        safety: SafetyCheckSettings::default(),
        agents: six_agent_layout()
            .into_iter()
            .map(|(id, position)| AgentSpec {
                id,
                position,
                altitude: 1.0,
            })
            .collect(),
        failures: vec![FailureSpec {
            agent: AgentId(1),
            time: 0.5,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::min_pairwise_distance;

    #[test]
    fn layout_minimum_separation_is_exact() {
        let pts: Vec<Vec2> = six_agent_layout().into_iter().map(|(_, p)| p).collect();
        assert_eq!(min_pairwise_distance(&pts), Some(2.72));
    }

    #[test]
    fn default_scenario_is_valid() {
        let s = default_six_agent_scenario();
        s.validate().unwrap();
        assert_eq!(s.steps(), 2000);
        assert_eq!(s.solver_config().dt, s.navigator.dt);
    }

    #[test]
    fn duration_lets_the_tail_clear_the_obstacle() {
        let s = default_six_agent_scenario();
        let a_p = 2.0 * s.margins.padding();
        let tail = s.agents.iter().map(|a| a.position.x).fold(f64::INFINITY, f64::min);
        let t0 = s.failures[0].time;
        assert!(t0 + (5.0 * a_p - tail) / s.navigator.v_des <= s.duration);
    }

    #[test]
    fn validation_collects_every_problem() {
        let mut s = default_six_agent_scenario();
        s.duration = -1.0;
        s.failures.push(FailureSpec {
            agent: AgentId(42),
            time: 0.0,
        });
        s.vehicle.disturbance_amplitude = 1.0;
        let Err(Error::ConfigInvalid(p)) = s.validate() else {
            panic!("expected ConfigInvalid");
        };
        assert!(p.iter().any(|m| m.contains("duration")));
        assert!(p.iter().any(|m| m.contains("unknown agent Q42")));
        assert!(p.iter().any(|m| m.contains("disturbance_amplitude")));
    }

    #[test]
    fn all_agents_failing_is_rejected() {
        let mut s = default_six_agent_scenario();
        s.agents.truncate(1);
        let Err(Error::ConfigInvalid(p)) = s.validate() else {
            panic!("expected ConfigInvalid");
        };
        assert!(p.iter().any(|m| m.contains("no healthy agent")));
    }
}
