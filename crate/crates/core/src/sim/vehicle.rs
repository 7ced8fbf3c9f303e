use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Vec2;

/// Offset separating the disturbance streams from the solver noise stream.
const DISTURBANCE_STREAM: u64 = 0x5eed_d157_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VehicleMode {
    /// Actual position equals the command.
    Perfect,
    /// `p' = v_d + k_p (r_d - p)`.
    FirstOrderLag,
    /// Lag plus a per-agent sinusoid.
    LagPlusDisturbance,
}

/// Point-mass tracking model. The tracking error is always saturated at `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleModel {
    pub mode: VehicleMode,
    /// Position gain, 1/s.
    pub k_p: f64,
    /// Sinusoid amplitude per axis, meters. Must not exceed `delta`.
    pub disturbance_amplitude: f64,
    /// Base angular frequency, rad/s; each agent draws a factor in [0.5, 1.5).
    pub disturbance_frequency: f64,
}

impl Default for VehicleModel {
    fn default() -> Self {
        VehicleModel {
            mode: VehicleMode::LagPlusDisturbance,
            k_p: 2.0,
            disturbance_amplitude: 0.2,
            disturbance_frequency: 1.5,
        }
    }
}

impl VehicleModel {
    pub fn perfect() -> Self {
        VehicleModel {
            mode: VehicleMode::Perfect,
            ..VehicleModel::default()
        }
    }

    pub fn problems(&self, delta: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.k_p > 0.0 && self.k_p.is_finite()) {
            out.push(format!("vehicle.k_p must be > 0, got {}", self.k_p));
        }
        if !(self.disturbance_amplitude >= 0.0 && self.disturbance_amplitude <= delta) {
            out.push(format!(
                "vehicle.disturbance_amplitude must lie in [0, delta = {delta}], got {}",
                self.disturbance_amplitude
            ));
        }
        if !(self.disturbance_frequency >= 0.0 && self.disturbance_frequency.is_finite()) {
            out.push(format!(
                "vehicle.disturbance_frequency must be >= 0, got {}",
                self.disturbance_frequency
            ));
        }
        out
    }
}

/// One simulated vehicle.
#[derive(Debug, Clone)]
pub struct VehicleState {
    lag: Vec2,
    actual: Vec2,
    phase: [f64; 2],
    freq_scale: f64,
    frozen: bool,
}

impl VehicleState {
    pub fn new(start: Vec2, model: &VehicleModel, seed: u64, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64((seed ^ DISTURBANCE_STREAM).wrapping_add(index as u64));
        let phase = [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
        let freq_scale = rng.random_range(0.5..1.5);
        let mut v = VehicleState {
            lag: start,
            actual: start,
            phase,
            freq_scale,
            frozen: false,
        };
        if model.mode == VehicleMode::LagPlusDisturbance {
            v.actual = saturate(start + v.disturbance(0.0, model), start, model.disturbance_amplitude);
        }
        v
    }

    pub fn position(&self) -> Vec2 {
        self.actual
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Hover in place from now on.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Advance to time `t` under command (`r_d`, `v_d`); returns the new
    /// actual position and its finite-difference velocity.
    pub fn track(&mut self, r_d: Vec2, v_d: Vec2, t: f64, dt: f64, model: &VehicleModel, delta: f64) -> (Vec2, Vec2) {
        if self.frozen {
            return (self.actual, Vec2::zeros());
        }
        let prev = self.actual;
        self.actual = match model.mode {
            VehicleMode::Perfect => {
                self.lag = r_d;
                r_d
            }
            VehicleMode::FirstOrderLag | VehicleMode::LagPlusDisturbance => {
                self.lag += (v_d + (r_d - self.lag) * model.k_p) * dt;
                self.lag = saturate(self.lag, r_d, delta);
                let d = match model.mode {
                    VehicleMode::LagPlusDisturbance => self.disturbance(t, model),
                    _ => Vec2::zeros(),
                };
                saturate(self.lag + d, r_d, delta)
            }
        };
        (self.actual, (self.actual - prev) / dt)
    }

    fn disturbance(&self, t: f64, model: &VehicleModel) -> Vec2 {
        let w = model.disturbance_frequency * self.freq_scale;
        Vec2::new((w * t + self.phase[0]).sin(), (w * t + self.phase[1]).sin()) * model.disturbance_amplitude
    }
}

/// Pull `p` back onto the disk of radius `r` around `center` if it left it.
fn saturate(p: Vec2, center: Vec2, r: f64) -> Vec2 {
    let e = p - center;
    let n = e.norm();
    if n > r {
        center + e * (r / n)
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_mode_copies_the_command() {
        let m = VehicleModel::perfect();
        let mut v = VehicleState::new(Vec2::zeros(), &m, 1, 0);
        let (p, vel) = v.track(Vec2::new(0.01, 0.0), Vec2::new(1.0, 0.0), 0.01, 0.01, &m, 0.4);
        assert_eq!(p, Vec2::new(0.01, 0.0));
        assert!((vel.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lag_error_is_saturated_at_delta() {
        let m = VehicleModel {
            mode: VehicleMode::FirstOrderLag,
            ..VehicleModel::default()
        };
        let mut v = VehicleState::new(Vec2::zeros(), &m, 1, 0);
        let target = Vec2::new(5.0, 0.0);
        let (p, _) = v.track(target, Vec2::zeros(), 0.01, 0.01, &m, 0.4);
        assert!(((p - target).norm() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn lag_converges_to_a_fixed_command() {
        let m = VehicleModel {
            mode: VehicleMode::FirstOrderLag,
            ..VehicleModel::default()
        };
        let mut v = VehicleState::new(Vec2::zeros(), &m, 1, 0);
        let target = Vec2::new(0.3, 0.0);
        let mut p = Vec2::zeros();
        for i in 0..1000 {
            p = v.track(target, Vec2::zeros(), (i + 1) as f64 * 0.01, 0.01, &m, 0.4).0;
        }
        assert!((p - target).norm() < 1e-6);
    }

    #[test]
    fn disturbance_stays_within_amplitude_envelope() {
        let m = VehicleModel::default();
        let mut v = VehicleState::new(Vec2::zeros(), &m, 9, 3);
        for i in 0..500 {
            let (p, _) = v.track(Vec2::zeros(), Vec2::zeros(), (i + 1) as f64 * 0.01, 0.01, &m, 0.4);
            assert!(p.norm() <= 0.4 + 1e-12);
        }
    }

    #[test]
    fn frozen_vehicle_does_not_move() {
        let m = VehicleModel::default();
        let mut v = VehicleState::new(Vec2::new(1.0, 2.0), &m, 0, 0);
        let before = v.position();
        v.freeze();
        let (p, vel) = v.track(Vec2::new(9.0, 9.0), Vec2::new(1.0, 0.0), 0.01, 0.01, &m, 0.4);
        assert_eq!(p, before);
        assert_eq!(vel, Vec2::zeros());
    }

    #[test]
    fn streams_differ_per_agent_and_repeat_per_seed() {
        let m = VehicleModel::default();
        let a = VehicleState::new(Vec2::zeros(), &m, 4, 0);
        let b = VehicleState::new(Vec2::zeros(), &m, 4, 1);
        let c = VehicleState::new(Vec2::zeros(), &m, 4, 0);
        assert_ne!(a.phase, b.phase);
        assert_eq!(a.phase, c.phase);
    }
}
