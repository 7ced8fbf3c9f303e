//! Deterministic fleet simulator.
//!
//! Point-mass vehicles track navigator commands with a bounded error. Failures
//! are scripted: at its failure time an agent freezes, its last setpoint
//! becomes an obstacle with `a_f = delta + epsilon`, and the navigator
//! re-anchors the remaining agents.

pub mod log;
mod scenario;
mod vehicle;

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_field::{FlowField, Obstacle};
use crate::navigator::{CemNavigator, Pacing};
use crate::safety::{self, LambdaSettings};
use crate::{AgentId, Vec2};

pub use self::log::{Activation, AgentSample, ScenarioLog, StepRecord};
pub use scenario::{
    default_six_agent_scenario, six_agent_layout, AgentSpec, FailureSpec, NavigationSettings,
    PreFailureMotion, SafetyCheckSettings, Scenario, SolverSettings, SIX_AGENT_ROW_SPACING,
};
pub use vehicle::{VehicleMode, VehicleModel, VehicleState};

/// Run `scenario` for its full duration.
pub fn run_scenario(scenario: &Scenario, pacing: Pacing) -> Result<ScenarioLog> {
    Runner::new(scenario)?.run(pacing, None)
}

/// Simulate only up to the last scripted failure and return the safety
/// assessments made at each activation.
pub fn preflight(scenario: &Scenario) -> Result<Vec<Activation>> {
    let runner = Runner::new(scenario)?;
    let last = runner.failure_steps.iter().map(|(s, _)| *s).max();
    match last {
        None => Ok(Vec::new()),
        Some(last) => Ok(runner.run(Pacing::Fast, Some(last))?.activations),
    }
}

/// Peak commanded speed and runtime statistics for one `k_passes` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepEntry {
    pub k: usize,
    pub peak_speed: f64,
    pub mean_runtime_ns: f64,
    pub median_runtime_ns: u64,
    pub p99_runtime_ns: u64,
}

/// Rerun `scenario` once per entry of `k_values` with the same seed.
pub fn sweep_k(scenario: &Scenario, k_values: &[usize]) -> Result<Vec<KSweepEntry>> {
    if k_values.is_empty() {
        return Err(Error::ConfigInvalid(vec!["k sweep needs at least one value".into()]));
    }
    k_values
        .iter()
        .map(|&k| {
            let mut s = scenario.clone();
            s.navigator.k_passes = k;
            let log = run_scenario(&s, Pacing::Fast)?;
            let runtimes = log.navigation_runtimes();
            let stats = crate::io::bench::RuntimeStats::from_ns(&runtimes);
            Ok(KSweepEntry {
                k,
                peak_speed: log.peak_commanded_speed(),
                mean_runtime_ns: stats.mean_ns,
                median_runtime_ns: stats.p50_ns,
                p99_runtime_ns: stats.p99_ns,
            })
        })
        .collect()
}

struct Runner<'a> {
    scenario: &'a Scenario,
    /// (step index, agent index) sorted by step.
    failure_steps: Vec<(usize, usize)>,
}

impl<'a> Runner<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let dt = scenario.navigator.dt;
        let mut failure_steps: Vec<(usize, usize)> = scenario
            .failures
            .iter()
            .map(|f| {
                let idx = scenario.agent_index(f.agent).expect("validated");
                ((f.time / dt - 1e-9).ceil().max(0.0) as usize, idx)
            })
            .collect();
        failure_steps.sort();
        Ok(Runner {
            scenario,
            failure_steps,
        })
    }

    fn run(&self, pacing: Pacing, stop_after: Option<usize>) -> Result<ScenarioLog> {
        let s = self.scenario;
        let dt = s.navigator.dt;
        let steps = s.steps();
        let nav_cfg = s.navigator_config();
        let solver_cfg = s.solver_config();
        let deadline = Duration::from_secs_f64(dt);
        let n = s.agents.len();

        let mut desired: Vec<Vec2> = s.agents.iter().map(|a| a.position).collect();
        let mut desired_vel = vec![Vec2::zeros(); n];
        let mut healthy = vec![true; n];
        let mut vehicles: Vec<VehicleState> = s
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| VehicleState::new(a.position, &s.vehicle, s.seed, i))
            .collect();
        let mut field = FlowField::empty();
        let mut nav = match s.pre_failure {
            PreFailureMotion::Hold => None,
            PreFailureMotion::Advance => {
                let agents: Vec<(AgentId, Vec2)> = s.agents.iter().map(|a| (a.id, a.position)).collect();
                Some(CemNavigator::activate(&agents, FlowField::empty(), nav_cfg, solver_cfg)?)
            }
        };

        let mut log = ScenarioLog::new(dt);
        let mut pending = self.failure_steps.iter().peekable();
        for step in 0..steps {
            let tick = Instant::now();
            let time = step as f64 * dt;

            let mut activated = Vec::new();
            let mut failed_now = Vec::new();
            while let Some(&&(at, idx)) = pending.peek() {
                if at != step {
                    break;
                }
                pending.next();
                healthy[idx] = false;
                vehicles[idx].freeze();
                desired_vel[idx] = Vec2::zeros();
                let obstacle = Obstacle::new(desired[idx], s.margins.padding(), &s.margins)?;
                field = field.with(obstacle)?;
                activated.push(obstacle);
                failed_now.push(s.agents[idx].id);
            }

            if !activated.is_empty() {
                let ids: Vec<AgentId> = (0..n).filter(|&i| healthy[i]).map(|i| s.agents[i].id).collect();
                let positions: Vec<Vec2> = (0..n).filter(|&i| healthy[i]).map(|i| desired[i]).collect();
                let remap = |e: Error| match e {
                    Error::AgentInsideExclusion { agent } => Error::AgentInsideExclusion {
                        agent: ids[agent.0 as usize],
                    },
                    e => e,
                };
                let lambda = LambdaSettings {
                    refine: s.safety.refine_lambda,
                    inflation: s.safety.lambda_inflation,
                    ..LambdaSettings::around(&positions, &field, s.safety.lambda_padding, s.safety.lambda_grid_step)?
                };
                let report = safety::assess(&positions, &field, &s.margins, &lambda).map_err(remap)?;
                for w in report.warnings() {
                    ::log::warn!("activation at t = {time:.3} s: {w}");
                }
                for n in report.notes() {
                    ::log::info!("activation at t = {time:.3} s: {n}");
                }
                log.activations.push(Activation {
                    step,
                    time,
                    failed: failed_now,
                    report,
                });

                nav = Some(match nav.take() {
                    Some(mut n) => {
                        n.reactivate(field.clone(), &ids)?;
                        n
                    }
                    None => {
                        let agents: Vec<(AgentId, Vec2)> = ids.iter().copied().zip(positions).collect();
                        CemNavigator::activate(&agents, field.clone(), nav_cfg, solver_cfg)?
                    }
                });
            }

            if stop_after.is_some_and(|last| step >= last) {
                break;
            }

            let mut record = StepRecord {
                schema_version: log::LOG_SCHEMA_VERSION,
                step,
                time,
                delta_phi: None,
                v_max: None,
                runtime_ns: 0,
                deadline_missed: false,
                activated,
                agents: Vec::with_capacity(n),
            };

            let mut nav_samples = Vec::new();
            if let Some(nav) = nav.as_mut() {
                let out = nav.step()?;
                record.delta_phi = Some(out.delta_phi_used);
                record.v_max = Some(out.v_max_observed);
                record.runtime_ns = out.step_runtime_ns;
                record.deadline_missed = Duration::from_nanos(out.step_runtime_ns) > deadline;
                if record.deadline_missed {
                    ::log::warn!("deadline miss at step {step}: {} us", out.step_runtime_ns / 1000);
                }
                for c in &out.commands {
                    let i = s.agent_index(c.agent_id).expect("navigator agents come from the scenario");
                    desired[i] = c.position;
                    desired_vel[i] = c.velocity;
                }
                let noise: Vec<bool> = out.commands.iter().map(|c| c.noise_injected).collect();
                nav_samples = nav.samples(&noise);
            }

            for (i, agent) in s.agents.iter().enumerate() {
                let (actual, actual_vel) = if healthy[i] {
                    vehicles[i].track(desired[i], desired_vel[i], time + dt, dt, &s.vehicle, s.margins.delta)
                } else {
                    (vehicles[i].position(), Vec2::zeros())
                };
                let from_nav = nav_samples.iter().find(|x| x.id == agent.id);
                record.agents.push(AgentSample {
                    id: agent.id,
                    healthy: healthy[i],
                    desired: desired[i],
                    desired_velocity: desired_vel[i],
                    actual: Some(actual),
                    actual_velocity: Some(actual_vel),
                    altitude: Some(agent.altitude),
                    phi: from_nav.and_then(|x| x.phi),
                    psi: from_nav.and_then(|x| x.psi),
                    noise_injected: from_nav.is_some_and(|x| x.noise_injected),
                });
            }
            log.steps.push(record);

            if pacing == Pacing::RealTime {
                if let Some(rest) = deadline.checked_sub(tick.elapsed()) {
                    thread::sleep(rest);
                }
            }
        }
        Ok(log)
    }
}
