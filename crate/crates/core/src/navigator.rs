//! Fixed-rate streamline navigation (containment exclusion mode).
//!
//! On activation every healthy agent is pinned to the streamline through its
//! current position. Each tick advances all agents' potential by one shared
//! increment `delta_phi` and inverts back to x-y. The increment is retuned
//! `K` times per tick as `delta_phi * v_des / v_max` so the fastest agent
//! moves at roughly `v_des`; only the last pass is sent out.

use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_field::{FieldPoint, FlowField};
use crate::sim::log::{AgentSample, ScenarioLog, StepRecord, LOG_SCHEMA_VERSION};
use crate::solver::{calc_xy, noise_source, NoiseRng, SolveResult, SolverConfig};
use crate::{AgentId, Vec2};

/// Lower clamp on the slide increment.
pub const MIN_DELTA_PHI: f64 = 1e-6;
/// Upper clamp, as a multiple of the nominal `v_des * dt`.
pub const MAX_DELTA_PHI_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigatorConfig {
    /// Control period, seconds.
    pub dt: f64,
    /// Retune passes per tick.
    pub k_passes: usize,
    /// Desired maximum speed, m/s.
    pub v_des: f64,
    /// Ticks per episode.
    pub total_steps: usize,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        NavigatorConfig {
            dt: 0.01,
            k_passes: 2,
            v_des: 1.0,
            total_steps: 2000,
        }
    }
}

impl NavigatorConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("navigator.dt must be > 0, got {}", self.dt));
        }
        if self.k_passes < 1 {
            out.push("navigator.k_passes must be >= 1".to_string());
        }
        if !(self.v_des > 0.0 && self.v_des.is_finite()) {
            out.push(format!("navigator.v_des must be > 0, got {}", self.v_des));
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

    /// `v_des * dt`, the increment that gives `v_des` in undisturbed flow.
    pub fn nominal_delta_phi(&self) -> f64 {
        self.v_des * self.dt
    }

    fn clamp_delta_phi(&self, d: f64) -> f64 {
        d.clamp(MIN_DELTA_PHI, MAX_DELTA_PHI_FACTOR * self.nominal_delta_phi())
    }
}

/// One healthy agent's streamline coordinates and last command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentNavState {
    pub agent_id: AgentId,
    pub phi: f64,
    /// Streamline anchor, fixed for the episode.
    pub psi0: f64,
    pub desired_position: Vec2,
    pub desired_velocity: Vec2,
}

/// Desired state sent to one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentCommand {
    pub agent_id: AgentId,
    pub position: Vec2,
    pub velocity: Vec2,
    pub noise_injected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub commands: Vec<AgentCommand>,
    pub delta_phi_used: f64,
    pub v_max_observed: f64,
    pub step_runtime_ns: u64,
}

/// Receiver of per-tick desired states.
pub trait CommandSink {
    fn send(&mut self, timestamp: f64, commands: &[AgentCommand]);
}

impl<F: FnMut(f64, &[AgentCommand])> CommandSink for F {
    fn send(&mut self, timestamp: f64, commands: &[AgentCommand]) {
        self(timestamp, commands)
    }
}

/// Discards everything.
pub struct NullSink;

impl CommandSink for NullSink {
    fn send(&mut self, _: f64, _: &[AgentCommand]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// No sleeping between ticks.
    #[default]
    Fast,
    /// Sleep out the remainder of each control period.
    RealTime,
}

/// Anchor each agent to the streamline through its position.
///
/// Returns the states and the initial increment `v_des * dt`.
pub fn activate(
    agents: &[(AgentId, Vec2)],
    field: &FlowField,
    cfg: &NavigatorConfig,
) -> Result<(Vec<AgentNavState>, f64)> {
    cfg.validate()?;
    let states = agents
        .iter()
        .map(|&(agent_id, p)| {
            if field.inside_planned(p).is_some() {
                return Err(Error::AgentInsideExclusion { agent: agent_id });
            }
            let fp = field.eval_field(p).map_err(|e| e.for_agent(agent_id))?;
            Ok(AgentNavState {
                agent_id,
                phi: fp.phi,
                psi0: fp.psi,
                desired_position: p,
                desired_velocity: Vec2::zeros(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((states, cfg.nominal_delta_phi()))
}

/// One control tick. Updates `states` in place and returns the commands with
/// the increment to use next tick.
pub fn step<R: Rng + ?Sized>(
    states: &mut [AgentNavState],
    field: &FlowField,
    cfg: &NavigatorConfig,
    solver: &SolverConfig,
    delta_phi: f64,
    rng: &mut R,
) -> Result<(StepOutput, f64)> {
    let started = Instant::now();
    let solver = SolverConfig {
        dt: cfg.dt,
        ..*solver
    };

    let mut delta_phi = delta_phi;
    let mut used = delta_phi;
    let mut v_max = 0.0;
    let mut results: Vec<SolveResult> = Vec::with_capacity(states.len());
    for _ in 0..cfg.k_passes {
        used = delta_phi;
        results.clear();
        for s in states.iter() {
            let target = FieldPoint {
                phi: s.phi + used,
                psi: s.psi0,
            };
            let res = calc_xy(target, s.desired_position, field, &solver, rng)
                .map_err(|e| e.for_agent(s.agent_id))?;
            results.push(res);
        }
        v_max = results.iter().map(|r| r.velocity.norm()).fold(0.0, f64::max);
        if v_max > 0.0 {
            delta_phi = cfg.clamp_delta_phi(delta_phi * cfg.v_des / v_max);
        }
    }

    let commands = states
        .iter_mut()
        .zip(&results)
        .map(|(s, r)| {
            s.phi += used;
            s.desired_position = r.position;
            s.desired_velocity = r.velocity;
            AgentCommand {
                agent_id: s.agent_id,
                position: r.position,
                velocity: r.velocity,
                noise_injected: r.noise_was_injected,
            }
        })
        .collect();

    let out = StepOutput {
        commands,
        delta_phi_used: used,
        v_max_observed: v_max,
        step_runtime_ns: started.elapsed().as_nanos() as u64,
    };
    Ok((out, delta_phi))
}

/// Stateful navigator: field, per-agent anchors, slide increment and noise stream.
#[derive(Debug, Clone)]
pub struct CemNavigator {
    cfg: NavigatorConfig,
    solver: SolverConfig,
    field: FlowField,
    states: Vec<AgentNavState>,
    delta_phi: f64,
    rng: NoiseRng,
}

impl CemNavigator {
    /// Activate on `agents` with the noise stream seeded from `solver.rng_seed`.
    pub fn activate(
        agents: &[(AgentId, Vec2)],
        field: FlowField,
        cfg: NavigatorConfig,
        solver: SolverConfig,
    ) -> Result<Self> {
        solver.validate()?;
        let (states, delta_phi) = activate(agents, &field, &cfg)?;
        Ok(CemNavigator {
            cfg,
            solver,
            field,
            states,
            delta_phi,
            rng: noise_source(solver.rng_seed),
        })
    }

    /// Re-anchor on a changed obstacle set, keeping only agents in `keep`.
    ///
    /// Agents start from their last commanded positions; the increment resets
    /// to nominal and the noise stream continues.
    pub fn reactivate(&mut self, field: FlowField, keep: &[AgentId]) -> Result<()> {
        let agents: Vec<(AgentId, Vec2)> = self
            .states
            .iter()
            .filter(|s| keep.contains(&s.agent_id))
            .map(|s| (s.agent_id, s.desired_position))
            .collect();
        let (states, delta_phi) = activate(&agents, &field, &self.cfg)?;
        self.field = field;
        self.states = states;
        self.delta_phi = delta_phi;
        Ok(())
    }

    pub fn step(&mut self) -> Result<StepOutput> {
        let (out, next) = step(
            &mut self.states,
            &self.field,
            &self.cfg,
            &self.solver,
            self.delta_phi,
            &mut self.rng,
        )?;
        self.delta_phi = next;
        Ok(out)
    }

    pub fn states(&self) -> &[AgentNavState] {
        &self.states
    }

    pub fn field(&self) -> &FlowField {
        &self.field
    }

    pub fn config(&self) -> &NavigatorConfig {
        &self.cfg
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn set_k_passes(&mut self, k: usize) {
        self.cfg.k_passes = k;
    }

    /// Increment the next tick will start from.
    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    /// Log samples for the current states.
    pub fn samples(&self, noise: &[bool]) -> Vec<AgentSample> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| AgentSample {
                id: s.agent_id,
                healthy: true,
                desired: s.desired_position,
                desired_velocity: s.desired_velocity,
                actual: None,
                actual_velocity: None,
                altitude: None,
                phi: Some(s.phi),
                psi: self.field.eval_field(s.desired_position).ok().map(|fp| fp.psi),
                noise_injected: noise.get(i).copied().unwrap_or(false),
            })
            .collect()
    }

    /// Run `total_steps` ticks, feeding `sink` and logging commanded states.
    ///
    /// Ticks slower than `dt` are logged as deadline misses and reported with
    /// a warning; they do not stop the episode.
    pub fn run_episode(&mut self, sink: &mut dyn CommandSink, pacing: Pacing) -> Result<ScenarioLog> {
        let mut log = ScenarioLog::new(self.cfg.dt);
        let deadline = Duration::from_secs_f64(self.cfg.dt);
        for t in 0..self.cfg.total_steps {
            let tick = Instant::now();
            let out = self.step()?;
            let time = t as f64 * self.cfg.dt;
            sink.send(time, &out.commands);

            let missed = Duration::from_nanos(out.step_runtime_ns) > deadline;
            if missed {
                log::warn!(
                    "deadline miss at step {t}: {} us > {} us",
                    out.step_runtime_ns / 1000,
                    deadline.as_micros()
                );
            }
            let noise: Vec<bool> = out.commands.iter().map(|c| c.noise_injected).collect();
            log.steps.push(StepRecord {
                schema_version: LOG_SCHEMA_VERSION,
                step: t,
                time,
                delta_phi: Some(out.delta_phi_used),
                v_max: Some(out.v_max_observed),
                runtime_ns: out.step_runtime_ns,
                deadline_missed: missed,
                activated: if t == 0 {
                    self.field.obstacles().to_vec()
                } else {
                    Vec::new()
                },
                agents: self.samples(&noise),
            });

            if pacing == Pacing::RealTime {
                if let Some(rest) = deadline.checked_sub(tick.elapsed()) {
                    thread::sleep(rest);
                }
            }
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Obstacle, SafetyMargins};

    fn unit_field() -> FlowField {
        FlowField::single(Obstacle::from_planned(Vec2::zeros(), 1.0, &SafetyMargins::default()).unwrap())
    }

    #[test]
    fn activation_on_empty_field() {
        let cfg = NavigatorConfig::default();
        let agents = [(AgentId(0), Vec2::new(1.0, 2.0)), (AgentId(1), Vec2::new(-3.0, 0.5))];
        let (states, dphi) = activate(&agents, &FlowField::empty(), &cfg).unwrap();
        assert_eq!(dphi, 0.01);
        assert_eq!((states[0].phi, states[0].psi0), (1.0, 2.0));
        assert_eq!((states[1].phi, states[1].psi0), (-3.0, 0.5));
    }

    #[test]
    fn activation_anchors_and_rejects_inside() {
        let cfg = NavigatorConfig::default();
        let (states, _) = activate(&[(AgentId(4), Vec2::new(2.0, 0.0))], &unit_field(), &cfg).unwrap();
        assert!((states[0].phi - 2.5).abs() < 1e-15);
        assert_eq!(states[0].psi0, 0.0);

        let err = activate(&[(AgentId(7), Vec2::new(0.5, 0.0))], &unit_field(), &cfg).unwrap_err();
        assert_eq!(err, Error::AgentInsideExclusion { agent: AgentId(7) });
    }

    #[test]
    fn uniform_flow_step() {
        let cfg = NavigatorConfig::default();
        let mut nav = CemNavigator::activate(
            &[(AgentId(0), Vec2::zeros())],
            FlowField::empty(),
            cfg,
            SolverConfig::default(),
        )
        .unwrap();
        let out = nav.step().unwrap();
        let c = out.commands[0];
        assert!((c.position - Vec2::new(0.01, 0.0)).norm() < 1e-15);
        assert!((c.velocity - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!((nav.delta_phi() - 0.01).abs() < 1e-15);
        assert_eq!(out.delta_phi_used, 0.01);
    }

    #[test]
    fn rescale_halves_when_twice_too_fast() {
        // Uniform flow, v_des 0.5 but increment sized for 1 m/s: the first
        // pass sees v_max = 2 v_des, so the second pass uses half the increment.
        let cfg = NavigatorConfig {
            v_des: 0.5,
            ..Default::default()
        };
        let mut states = vec![AgentNavState {
            agent_id: AgentId(0),
            phi: 0.0,
            psi0: 0.0,
            desired_position: Vec2::zeros(),
            desired_velocity: Vec2::zeros(),
        }];
        let mut rng = noise_source(0);
        let (out, next) = step(&mut states, &FlowField::empty(), &cfg, &SolverConfig::default(), 0.01, &mut rng).unwrap();
        assert_eq!(out.delta_phi_used, 0.005);
        assert!((next - 0.005).abs() < 1e-15);
        assert!((out.v_max_observed - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_pass_uses_incoming_increment() {
        let cfg = NavigatorConfig {
            v_des: 0.5,
            k_passes: 1,
            ..Default::default()
        };
        let mut states = vec![AgentNavState {
            agent_id: AgentId(0),
            phi: 0.0,
            psi0: 0.0,
            desired_position: Vec2::zeros(),
            desired_velocity: Vec2::zeros(),
        }];
        let mut rng = noise_source(0);
        let (out, next) = step(&mut states, &FlowField::empty(), &cfg, &SolverConfig::default(), 0.01, &mut rng).unwrap();
        assert_eq!(out.delta_phi_used, 0.01);
        assert!((out.v_max_observed - 1.0).abs() < 1e-12);
        assert!((next - 0.005).abs() < 1e-15);
    }

    #[test]
    fn empty_state_set_keeps_increment() {
        let cfg = NavigatorConfig::default();
        let mut rng = noise_source(0);
        let (out, next) = step(&mut [], &FlowField::empty(), &cfg, &SolverConfig::default(), 0.02, &mut rng).unwrap();
        assert_eq!(out.v_max_observed, 0.0);
        assert_eq!(next, 0.02);
    }

    #[test]
    fn increment_is_clamped() {
        let cfg = NavigatorConfig::default();
        assert_eq!(cfg.clamp_delta_phi(1e-9), MIN_DELTA_PHI);
        assert_eq!(cfg.clamp_delta_phi(5.0), 0.1);
    }

    #[test]
    fn zero_step_episode_is_empty() {
        let cfg = NavigatorConfig {
            total_steps: 0,
            ..Default::default()
        };
        let mut nav =
            CemNavigator::activate(&[(AgentId(0), Vec2::zeros())], FlowField::empty(), cfg, SolverConfig::default())
                .unwrap();
        let log = nav.run_episode(&mut NullSink, Pacing::Fast).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn episode_feeds_sink_each_tick() {
        let cfg = NavigatorConfig {
            total_steps: 25,
            ..Default::default()
        };
        let mut nav = CemNavigator::activate(
            &[(AgentId(0), Vec2::new(-4.0, 0.3)), (AgentId(1), Vec2::new(-4.0, -2.5))],
            unit_field(),
            cfg,
            SolverConfig::default(),
        )
        .unwrap();
        let mut seen = Vec::new();
        let mut sink = |t: f64, cmds: &[AgentCommand]| seen.push((t, cmds.len()));
        let log = nav.run_episode(&mut sink, Pacing::Fast).unwrap();
        assert_eq!(log.len(), 25);
        assert_eq!(seen.len(), 25);
        assert!(seen.iter().all(|&(_, n)| n == 2));
        assert_eq!(log.steps[0].activated.len(), 1);
        assert!(log.steps.windows(2).all(|w| w[1].time > w[0].time));
    }

    #[test]
    fn realtime_pacing_takes_wall_time() {
        let cfg = NavigatorConfig {
            total_steps: 5,
            ..Default::default()
        };
        let mut nav =
            CemNavigator::activate(&[(AgentId(0), Vec2::zeros())], FlowField::empty(), cfg, SolverConfig::default())
                .unwrap();
        let t = Instant::now();
        nav.run_episode(&mut NullSink, Pacing::RealTime).unwrap();
        assert!(t.elapsed() >= Duration::from_millis(45));
    }
}
