//! Inversion of `(phi, psi)` targets back to x-y positions.
//!
//! A fixed number of full Newton steps `r <- r - J^-1 (f(r) - target)` with
//! saddle-escape noise whenever the iterate sits on or inside the nearest
//! planned exclusion circle. Stagnation points make `J` singular, so the
//! solve falls back to `J + mu I` before giving up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_field::{FieldPoint, FlowField, Jacobian2x2};
use crate::{AgentId, Vec2};

/// `|det J|` below this is treated as singular.
pub const DET_FLOOR: f64 = 1e-12;
const DAMPING_START: f64 = 1e-6;
const DAMPING_GROWTH: f64 = 10.0;
const DAMPING_RETRIES: usize = 3;

/// Seeded noise stream shared by one navigator instance.
pub type NoiseRng = ChaCha8Rng;

pub fn noise_source(seed: u64) -> NoiseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Newton steps per inversion.
    pub iterations: usize,
    /// Standard deviation of the escape noise, meters.
    pub noise_sigma: f64,
    /// Control period used for the finite-difference velocity, seconds.
    pub dt: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 20,
            noise_sigma: 0.001,
            dt: 0.01,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.iterations < 1 {
            out.push("solver.iterations must be >= 1".to_string());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            out.push(format!("solver.noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("solver.dt must be > 0, got {}", self.dt));
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub position: Vec2,
    /// `(position - guess) / dt`.
    pub velocity: Vec2,
    /// `[|phi error|, |psi error|]` at the returned position.
    pub residual: [f64; 2],
    pub noise_was_injected: bool,
    /// The final iterate was inside a planned disk and got pushed to its boundary.
    pub projected: bool,
}

/// Find the position whose field value is `target`, starting from `guess`.
///
/// Runs exactly `cfg.iterations` update steps; there is no early exit.
pub fn calc_xy<R: Rng + ?Sized>(
    target: FieldPoint,
    guess: Vec2,
    field: &FlowField,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SolveResult> {
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).map_err(|_| Error::NonFinite)?)
    } else {
        None
    };

    let mut r = guess;
    let mut injected = false;
    for _ in 0..cfg.iterations {
        let (fp, jac) = field.eval(r)?;
        let err = [fp.phi - target.phi, fp.psi - target.psi];
        let (step, damped) = newton_step(&jac, err).ok_or(Error::SingularJacobian { x: r.x, y: r.y })?;

        let mut kick = Vec2::zeros();
        if let (Some(normal), Some((obstacle, dist))) = (&noise, field.nearest(r)) {
            if dist <= obstacle.planned_radius() || damped {
                let away = if dist > 0.0 {
                    (r - obstacle.center()) / dist
                } else {
                    Vec2::new(1.0, 0.0)
                };
                let across = Vec2::new(away.y, -away.x);
                let radial: f64 = normal.sample(rng);
                let tangential: f64 = normal.sample(rng);
                kick = away * radial.abs() + across * tangential;
                injected = true;
            }
        }

        r = r - step + kick;
        if !(r.x.is_finite() && r.y.is_finite()) {
            return Err(Error::NonFinite);
        }
    }

    let projected_to = project_outside(r, field);
    let projected = projected_to != r;
    r = projected_to;

    let fp = field.eval_field(r)?;
    Ok(SolveResult {
        position: r,
        velocity: (r - guess) / cfg.dt,
        residual: [(fp.phi - target.phi).abs(), (fp.psi - target.psi).abs()],
        noise_was_injected: injected,
        projected,
    })
}

/// Solve `J s = err`, damping `J + mu I` when `J` is near singular.
/// Returns the step and whether damping was needed.
fn newton_step(j: &Jacobian2x2, err: [f64; 2]) -> Option<(Vec2, bool)> {
    let solve = |a: f64, b: f64, c: f64, d: f64| {
        let det = a * d - b * c;
        if det.abs() < DET_FLOOR || !det.is_finite() {
            return None;
        }
        Some(Vec2::new(d * err[0] - b * err[1], a * err[1] - c * err[0]) / det)
    };
    if let Some(s) = solve(j.dphi_dx, j.dphi_dy, j.dpsi_dx, j.dpsi_dy) {
        return Some((s, false));
    }
    let mut mu = DAMPING_START;
    for _ in 0..=DAMPING_RETRIES {
        if let Some(s) = solve(j.dphi_dx + mu, j.dphi_dy, j.dpsi_dx, j.dpsi_dy + mu) {
            return Some((s, true));
        }
        mu *= DAMPING_GROWTH;
    }
    None
}

/// Nearest point of the complement of the open planned disks.
///
/// Points already outside come back unchanged. Overlapping disks are handled
/// by also considering pairwise circle intersections.
pub fn project_outside(p: Vec2, field: &FlowField) -> Vec2 {
    let obstacles = field.obstacles();
    let strictly_inside = |q: Vec2, skip: &[usize]| {
        obstacles.iter().enumerate().any(|(k, o)| {
            !skip.contains(&k) && (q - o.center()).norm() < o.planned_radius() - 1e-12
        })
    };
    if !obstacles
        .iter()
        .any(|o| (p - o.center()).norm() < o.planned_radius())
    {
        return p;
    }

    let mut candidates = Vec::new();
    for (k, o) in obstacles.iter().enumerate() {
        let d = p - o.center();
        let n = d.norm();
        let dir = if n > 0.0 { d / n } else { Vec2::new(1.0, 0.0) };
        let q = onto_circle(o.center(), dir, o.planned_radius());
        if !strictly_inside(q, &[k]) {
            candidates.push(q);
        }
    }
    for i in 0..obstacles.len() {
        for j in i + 1..obstacles.len() {
            for q in circle_intersections(&obstacles[i], &obstacles[j]) {
                if !strictly_inside(q, &[i, j]) {
                    candidates.push(q);
                }
            }
        }
    }
    candidates
        .into_iter()
        .min_by(|a, b| (a - p).norm().total_cmp(&(b - p).norm()))
        .unwrap_or(p)
}

/// `center + dir * r`, nudged outward until rounding no longer leaves it inside.
fn onto_circle(center: Vec2, dir: Vec2, r: f64) -> Vec2 {
    let mut scale = r;
    let mut q = center + dir * scale;
    while (q - center).norm() < r {
        scale = scale.next_up();
        q = center + dir * scale;
    }
    q
}

fn circle_intersections(a: &crate::Obstacle, b: &crate::Obstacle) -> Vec<Vec2> {
    let d = b.center() - a.center();
    let dist = d.norm();
    let (ra, rb) = (a.planned_radius(), b.planned_radius());
    if dist > ra + rb || dist < (ra - rb).abs() || dist == 0.0 {
        return Vec::new();
    }
    let along = (ra * ra - rb * rb + dist * dist) / (2.0 * dist);
    let h = (ra * ra - along * along).max(0.0).sqrt();
    let base = a.center() + d * (along / dist);
    let perp = Vec2::new(-d.y, d.x) / dist;
    vec![base + perp * h, base - perp * h]
}

/// Element-wise [`calc_xy`] sharing one noise stream, consumed in list order.
pub fn invert_batch<R: Rng + ?Sized>(
    targets: &[(FieldPoint, Vec2)],
    field: &FlowField,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<Vec<SolveResult>> {
    targets
        .iter()
        .enumerate()
        .map(|(i, (target, guess))| {
            calc_xy(*target, *guess, field, cfg, rng).map_err(|e| e.for_agent(AgentId(i as u32)))
        })
        .collect()
}
