//! Ideal-flow navigation field: uniform stream plus one doublet per failed agent.
//!
//! For an obstacle set `F` the complex potential is the sum over `F` of
//! `(z - z_f) + a_p^2 / (z - z_f)`. Its real part is the potential `phi`, its
//! imaginary part the stream function `psi`. Each doublet makes the circle of
//! radius `a_p` around its center a `psi = 0` streamline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::safety::SafetyMargins;
use crate::Vec2;

/// Points closer than this to an obstacle center are rejected.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Slack on the planned-radius boundary for inside/outside tests.
pub const EXCLUSION_TOLERANCE: f64 = 1e-9;

/// Tolerance on `a_p = a_f + delta + epsilon` when both radii are given.
const RADIUS_TOLERANCE: f64 = 1e-9;

/// A failed agent's no-fly zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObstacleRepr", into = "ObstacleRepr")]
pub struct Obstacle {
    center: Vec2,
    actual_radius: f64,
    planned_radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleRepr {
    center: [f64; 2],
    actual_radius: f64,
    planned_radius: f64,
}

impl TryFrom<ObstacleRepr> for Obstacle {
    type Error = Error;

    fn try_from(r: ObstacleRepr) -> Result<Self> {
        Obstacle::checked(Vec2::new(r.center[0], r.center[1]), r.actual_radius, r.planned_radius)
    }
}

impl From<Obstacle> for ObstacleRepr {
    fn from(o: Obstacle) -> Self {
        ObstacleRepr {
            center: [o.center.x, o.center.y],
            actual_radius: o.actual_radius,
            planned_radius: o.planned_radius,
        }
    }
}

impl Obstacle {
    /// Obstacle with actual radius `a_f`; the planned radius is `a_f + delta + epsilon`.
    pub fn new(center: Vec2, actual_radius: f64, margins: &SafetyMargins) -> Result<Self> {
        Self::checked(center, actual_radius, actual_radius + margins.padding())
    }

    /// Obstacle specified by its planned radius `a_p`; `a_f = a_p - delta - epsilon`.
    pub fn from_planned(center: Vec2, planned_radius: f64, margins: &SafetyMargins) -> Result<Self> {
        Self::checked(center, planned_radius - margins.padding(), planned_radius)
    }

    /// Both radii given explicitly; they must agree with `margins`.
    pub fn from_parts(
        center: Vec2,
        actual_radius: f64,
        planned_radius: f64,
        margins: &SafetyMargins,
    ) -> Result<Self> {
        let expected = actual_radius + margins.padding();
        if (planned_radius - expected).abs() > RADIUS_TOLERANCE {
            return Err(Error::InvalidObstacle(format!(
                "planned radius {planned_radius} != actual radius {actual_radius} + delta + epsilon = {expected}"
            )));
        }
        Self::checked(center, actual_radius, planned_radius)
    }

    fn checked(center: Vec2, actual_radius: f64, planned_radius: f64) -> Result<Self> {
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::InvalidObstacle("center must be finite".into()));
        }
        if !(actual_radius > 0.0 && actual_radius.is_finite()) {
            return Err(Error::InvalidObstacle(format!(
                "actual radius must be positive, got {actual_radius}"
            )));
        }
        if !(planned_radius > actual_radius && planned_radius.is_finite()) {
            return Err(Error::InvalidObstacle(format!(
                "planned radius {planned_radius} must exceed actual radius {actual_radius}"
            )));
        }
        Ok(Obstacle {
            center,
            actual_radius,
            planned_radius,
        })
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    /// `a_f`, radius of the no-fly cylinder.
    pub fn actual_radius(&self) -> f64 {
        self.actual_radius
    }

    /// `a_p`, the radius commanded trajectories never enter.
    pub fn planned_radius(&self) -> f64 {
        self.planned_radius
    }

    /// Stagnation points `(x_f -/+ a_p, y_f)` of this obstacle alone.
    pub fn stagnation_points(&self) -> [Vec2; 2] {
        let a = self.planned_radius;
        [
            self.center - Vec2::new(a, 0.0),
            self.center + Vec2::new(a, 0.0),
        ]
    }
}

/// Potential and stream values at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub phi: f64,
    pub psi: f64,
}

/// Partial derivatives of `(phi, psi)` with respect to `(x, y)`.
///
/// Built from the real and imaginary parts of the complex derivative, so the
/// Cauchy-Riemann relations hold bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2x2 {
    pub dphi_dx: f64,
    pub dphi_dy: f64,
    pub dpsi_dx: f64,
    pub dpsi_dy: f64,
}

impl Jacobian2x2 {
    pub const IDENTITY: Jacobian2x2 = Jacobian2x2 {
        dphi_dx: 1.0,
        dphi_dy: 0.0,
        dpsi_dx: 0.0,
        dpsi_dy: 1.0,
    };

    fn from_derivative(re: f64, im: f64) -> Self {
        Jacobian2x2 {
            dphi_dx: re,
            dphi_dy: -im,
            dpsi_dx: im,
            dpsi_dy: re,
        }
    }

    pub fn det(&self) -> f64 {
        self.dphi_dx * self.dpsi_dy - self.dphi_dy * self.dpsi_dx
    }

    /// Local squared stretch `phi_x^2 + phi_y^2`; `J^T J` is this times the identity.
    pub fn gain(&self) -> f64 {
        self.dphi_dx * self.dphi_dx + self.dphi_dy * self.dphi_dy
    }

    pub fn to_matrix(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::new(self.dphi_dx, self.dphi_dy, self.dpsi_dx, self.dpsi_dy)
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn square(half_width: f64) -> Result<Self> {
        Rect::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidDomain(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    /// Sample coordinates along each axis: `min + i * step` for every `i` that stays within the rectangle.
    pub fn axes(&self, step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidDomain(format!("grid step must be positive, got {step}")));
        }
        Ok((axis(self.x_min, self.x_max, step), axis(self.y_min, self.y_max, step)))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
    let intervals = ((max - min) / step + 1e-9).floor() as usize;
    (0..=intervals).map(|i| min + i as f64 * step).collect()
}

/// One grid sample; `value` is `None` inside a planned exclusion disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub x: f64,
    pub y: f64,
    pub value: Option<FieldPoint>,
}

/// The obstacle set `F`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Obstacle>", into = "Vec<Obstacle>")]
pub struct FlowField {
    obstacles: Vec<Obstacle>,
}

impl TryFrom<Vec<Obstacle>> for FlowField {
    type Error = Error;

    fn try_from(obstacles: Vec<Obstacle>) -> Result<Self> {
        FlowField::new(obstacles)
    }
}

impl From<FlowField> for Vec<Obstacle> {
    fn from(f: FlowField) -> Self {
        f.obstacles
    }
}

impl FlowField {
    pub fn new(obstacles: Vec<Obstacle>) -> Result<Self> {
        for (i, a) in obstacles.iter().enumerate() {
            for b in &obstacles[i + 1..] {
                if (a.center - b.center).norm() <= SINGULARITY_GUARD {
                    return Err(Error::DuplicateObstacle {
                        x: a.center.x,
                        y: a.center.y,
                    });
                }
            }
        }
        Ok(FlowField { obstacles })
    }

    /// No failures: the identity map `phi = x`, `psi = y`.
    pub fn empty() -> Self {
        FlowField::default()
    }

    pub fn single(obstacle: Obstacle) -> Self {
        FlowField {
            obstacles: vec![obstacle],
        }
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    /// New field with `obstacle` added.
    pub fn with(&self, obstacle: Obstacle) -> Result<Self> {
        let mut obstacles = self.obstacles.clone();
        obstacles.push(obstacle);
        FlowField::new(obstacles)
    }

    fn guard(&self, p: Vec2) -> Result<()> {
        for o in &self.obstacles {
            if (p - o.center).norm_squared() <= SINGULARITY_GUARD * SINGULARITY_GUARD {
                return Err(Error::SingularityEvaluation { x: p.x, y: p.y });
            }
        }
        Ok(())
    }

    /// `phi` and `psi` at `p`.
    pub fn eval_field(&self, p: Vec2) -> Result<FieldPoint> {
        self.guard(p)?;
        if self.obstacles.is_empty() {
            return Ok(FieldPoint { phi: p.x, psi: p.y });
        }
        let mut phi = 0.0;
        let mut psi = 0.0;
        for o in &self.obstacles {
            let dx = p.x - o.center.x;
            let dy = p.y - o.center.y;
            let r2 = dx * dx + dy * dy;
            let a2 = o.planned_radius * o.planned_radius;
            phi += dx * (r2 + a2) / r2;
            psi += dy * (r2 - a2) / r2;
        }
        Ok(FieldPoint { phi, psi })
    }

    /// Analytic Jacobian of `(phi, psi)` at `p`.
    pub fn eval_jacobian(&self, p: Vec2) -> Result<Jacobian2x2> {
        self.guard(p)?;
        let (re, im) = self.derivative(p);
        Ok(Jacobian2x2::from_derivative(re, im))
    }

    /// Field value and Jacobian in one pass.
    pub fn eval(&self, p: Vec2) -> Result<(FieldPoint, Jacobian2x2)> {
        Ok((self.eval_field(p)?, self.eval_jacobian(p)?))
    }

    // Real and imaginary parts of f'(z) = sum(1 - a_p^2 / (z - z_f)^2).
    fn derivative(&self, p: Vec2) -> (f64, f64) {
        if self.obstacles.is_empty() {
            return (1.0, 0.0);
        }
        let mut re = 0.0;
        let mut im = 0.0;
        for o in &self.obstacles {
            let dx = p.x - o.center.x;
            let dy = p.y - o.center.y;
            let r2 = dx * dx + dy * dy;
            let r4 = r2 * r2;
            let a2 = o.planned_radius * o.planned_radius;
            re += 1.0 - a2 * (dx * dx - dy * dy) / r4;
            im += 2.0 * a2 * dx * dy / r4;
        }
        (re, im)
    }

    /// Index of the first obstacle whose open planned disk contains `p`.
    ///
    /// Points within [`EXCLUSION_TOLERANCE`] of a circle count as outside.
    pub fn inside_planned(&self, p: Vec2) -> Option<usize> {
        self.obstacles
            .iter()
            .position(|o| (p - o.center).norm() < o.planned_radius - EXCLUSION_TOLERANCE)
    }

    /// Nearest obstacle by center distance, with that distance.
    pub fn nearest(&self, p: Vec2) -> Option<(&Obstacle, f64)> {
        self.obstacles
            .iter()
            .map(|o| (o, (p - o.center).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Smallest `|p - center| - a_p` over obstacles; `None` when the field is empty.
    pub fn planned_clearance(&self, p: Vec2) -> Option<f64> {
        self.obstacles
            .iter()
            .map(|o| (p - o.center).norm() - o.planned_radius)
            .min_by(f64::total_cmp)
    }

    /// Smallest `|p - center| - a_f` over obstacles.
    pub fn actual_clearance(&self, p: Vec2) -> Option<f64> {
        self.obstacles
            .iter()
            .map(|o| (p - o.center).norm() - o.actual_radius)
            .min_by(f64::total_cmp)
    }

    /// Row-major (y outer, x inner) samples of the field over `domain`,
    /// masked inside planned exclusion disks.
    pub fn sample_grid(&self, domain: &Rect, step: f64) -> Result<Vec<GridSample>> {
        let (xs, ys) = domain.axes(step)?;
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                let p = Vec2::new(x, y);
                let value = if self.inside_planned(p).is_some() {
                    None
                } else {
                    self.eval_field(p).ok()
                };
                out.push(GridSample { x, y, value });
            }
        }
        Ok(out)
    }

    /// Grid maximum of `phi_x^2 + phi_y^2` over `domain` minus the open planned disks.
    ///
    /// Halving `grid_step` keeps every previous sample, so the result never
    /// decreases under refinement.
    pub fn lambda_max(&self, domain: &Rect, grid_step: f64) -> Result<f64> {
        let (xs, ys) = domain.axes(grid_step)?;
        let mut best: Option<f64> = None;
        for &y in &ys {
            for &x in &xs {
                let p = Vec2::new(x, y);
                if self.inside_planned(p).is_some() || self.guard(p).is_err() {
                    continue;
                }
                let (re, im) = self.derivative(p);
                let gain = re * re + im * im;
                best = Some(best.map_or(gain, |b| b.max(gain)));
            }
        }
        best.ok_or(Error::EmptyDomain)
    }
}
