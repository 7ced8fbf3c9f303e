//! Inter-agent separation guarantees for streamline navigation.
//!
//! Two pre-flight conditions are checked on the formation at the moment
//! obstacles appear:
//!
//! * the general bound: with `p_min0` the smallest pairwise distance in the
//!   `(phi, psi)` plane and `lambda_max` the largest `phi_x^2 + phi_y^2` in
//!   the motion domain, `p_min0^2 / lambda_max >= 4 (delta + epsilon)^2`;
//! * the single-obstacle bound: `d_min0 >= 2 (delta + epsilon) + a_p` in the
//!   x-y plane.
//!
//! Equality passes both. A slack of [`BOUNDARY_TOLERANCE`] absorbs rounding
//! in distances computed from coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_field::{FlowField, Rect};
use crate::sim::log::ScenarioLog;
use crate::{AgentId, Vec2};

pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Relative change under grid halving above which `lambda_max` is flagged.
pub const REFINEMENT_LIMIT: f64 = 0.01;

/// Controller tracking-error bound and vehicle enclosing radius, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyMargins {
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for SafetyMargins {
    fn default() -> Self {
        SafetyMargins {
            delta: 0.40,
            epsilon: 0.28,
        }
    }
}

impl SafetyMargins {
    pub fn new(delta: f64, epsilon: f64) -> Result<Self> {
        let m = SafetyMargins { delta, epsilon };
        let problems = m.problems();
        if problems.is_empty() {
            Ok(m)
        } else {
            Err(Error::ConfigInvalid(problems))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            out.push(format!("margins.delta must be > 0, got {}", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            out.push(format!("margins.epsilon must be > 0, got {}", self.epsilon));
        }
        out
    }

    /// `delta + epsilon`: gap between actual and planned exclusion radii.
    pub fn padding(&self) -> f64 {
        self.delta + self.epsilon
    }

    /// `2 (delta + epsilon)`: the inter-agent distance that must never be undercut.
    pub fn separation_floor(&self) -> f64 {
        2.0 * self.padding()
    }
}

/// How `lambda_max` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSettings {
    pub domain: Rect,
    pub grid_step: f64,
    /// Also evaluate at `grid_step / 2` and report the relative change.
    #[serde(default = "yes")]
    pub refine: bool,
    /// Multiply the grid value by `1 + inflation` before using it (0.05 for a 5% cushion).
    #[serde(default)]
    pub inflation: f64,
}

fn yes() -> bool {
    true
}

impl LambdaSettings {
    pub const DEFAULT_STEP: f64 = 0.01;

    pub fn new(domain: Rect, grid_step: f64) -> Self {
        LambdaSettings {
            domain,
            grid_step,
            refine: true,
            inflation: 0.0,
        }
    }

    /// Bounding box of `positions` and the obstacle disks, padded by `pad` meters.
    pub fn around(positions: &[Vec2], field: &FlowField, pad: f64, grid_step: f64) -> Result<Self> {
        let mut pts: Vec<(Vec2, f64)> = positions.iter().map(|p| (*p, 0.0)).collect();
        pts.extend(field.obstacles().iter().map(|o| (o.center(), o.planned_radius())));
        if pts.is_empty() {
            return Err(Error::InvalidDomain("no positions to bound".into()));
        }
        let mut r = Rect {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (p, rad) in pts {
            r.x_min = r.x_min.min(p.x - rad - pad);
            r.x_max = r.x_max.max(p.x + rad + pad);
            r.y_min = r.y_min.min(p.y - rad - pad);
            r.y_max = r.y_max.max(p.y + rad + pad);
        }
        r.validate()?;
        Ok(LambdaSettings::new(r, grid_step))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// Smallest pairwise distance in the `(phi, psi)` plane.
    pub p_min0: f64,
    /// Grid value, after inflation.
    pub lambda_max: f64,
    /// Relative change of `lambda_max` when the grid step is halved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_refinement: Option<f64>,
    pub lambda_domain: Rect,
    pub lambda_grid_step: f64,
    /// `2 (delta + epsilon) sqrt(lambda_max)`.
    pub required_p_min: f64,
    pub satisfied: bool,
    /// `p_min0 / sqrt(lambda_max) - 2 (delta + epsilon)`, meters.
    pub margin: f64,
}

impl Theorem1Report {
    pub fn refinement_ok(&self) -> bool {
        self.lambda_refinement.is_none_or(|c| c < REFINEMENT_LIMIT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub d_min0: f64,
    pub a_p: f64,
    /// `2 (delta + epsilon) + a_p`.
    pub required_d_min: f64,
    pub satisfied: bool,
    /// `d_min0 - required_d_min`, meters.
    pub margin: f64,
}

/// Outcome of a check that may be out of scope for the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Check<T> {
    Evaluated(T),
    NotApplicable { reason: String },
}

impl<T> Check<T> {
    pub fn evaluated(&self) -> Option<&T> {
        match self {
            Check::Evaluated(t) => Some(t),
            Check::NotApplicable { .. } => None,
        }
    }
}

/// Both pre-flight checks for one formation/obstacle configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub healthy_agents: usize,
    pub obstacles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_min0: Option<f64>,
    pub theorem1: Check<Theorem1Report>,
    pub theorem2: Check<Theorem2Report>,
}

impl SafetyReport {
    /// Failures of the check that governs this configuration.
    ///
    /// With a single obstacle Theorem 2 is the tight condition and governs;
    /// otherwise Theorem 1 does.
    pub fn warnings(&self) -> Vec<String> {
        match &self.theorem2 {
            Check::Evaluated(t) => theorem2_findings(t),
            Check::NotApplicable { .. } => self.theorem1_findings(),
        }
    }

    /// Failures of the conservative Theorem 1 when Theorem 2 governs.
    pub fn notes(&self) -> Vec<String> {
        match &self.theorem2 {
            Check::Evaluated(_) => self.theorem1_findings(),
            Check::NotApplicable { .. } => Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.warnings().is_empty()
    }

    fn theorem1_findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Check::Evaluated(t) = &self.theorem1 {
            if !t.satisfied {
                out.push(format!(
                    "theorem 1 violated: p_min0 = {:.4} < {:.4} required (lambda_max = {:.4}, margin {:.4} m)",
                    t.p_min0, t.required_p_min, t.lambda_max, t.margin
                ));
            }
            if !t.refinement_ok() {
                out.push(format!(
                    "lambda_max grid not converged: halving the step changed it by {:.2}%",
                    100.0 * t.lambda_refinement.unwrap_or(0.0)
                ));
            }
        }
        out
    }
}

fn theorem2_findings(t: &Theorem2Report) -> Vec<String> {
    if t.satisfied {
        Vec::new()
    } else {
        vec![format!(
            "theorem 2 violated: d_min0 = {:.4} m < {:.4} m required (margin {:.4} m)",
            t.d_min0, t.required_d_min, t.margin
        )]
    }
}

/// Smallest pairwise Euclidean distance; `None` for fewer than two points.
pub fn min_pairwise_distance(points: &[Vec2]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a - b).norm();
            best = Some(best.map_or(d, |m| m.min(d)));
        }
    }
    best
}

fn ensure_outside(positions: &[Vec2], field: &FlowField) -> Result<()> {
    for (i, p) in positions.iter().enumerate() {
        if field.inside_planned(*p).is_some() {
            return Err(Error::AgentInsideExclusion {
                agent: AgentId(i as u32),
            });
        }
    }
    Ok(())
}

/// General multi-obstacle condition. Agent ids in errors are list indices.
pub fn check_theorem1(
    positions: &[Vec2],
    field: &FlowField,
    margins: &SafetyMargins,
    lambda: &LambdaSettings,
) -> Result<Theorem1Report> {
    if positions.len() < 2 {
        return Err(Error::NotApplicable("need at least two healthy agents".into()));
    }
    ensure_outside(positions, field)?;

    let images = positions
        .iter()
        .map(|p| field.eval_field(*p).map(|fp| Vec2::new(fp.phi, fp.psi)))
        .collect::<Result<Vec<_>>>()?;
    let p_min0 = min_pairwise_distance(&images).unwrap_or(0.0);

    let grid = field.lambda_max(&lambda.domain, lambda.grid_step)?;
    let lambda_refinement = if lambda.refine {
        let fine = field.lambda_max(&lambda.domain, lambda.grid_step / 2.0)?;
        Some((fine - grid).abs() / grid)
    } else {
        None
    };
    let lambda_max = grid * (1.0 + lambda.inflation);

    let floor = margins.separation_floor();
    let margin = p_min0 / lambda_max.sqrt() - floor;
    Ok(Theorem1Report {
        p_min0,
        lambda_max,
        lambda_refinement,
        lambda_domain: lambda.domain,
        lambda_grid_step: lambda.grid_step,
        required_p_min: floor * lambda_max.sqrt(),
        satisfied: margin >= -BOUNDARY_TOLERANCE,
        margin,
    })
}

/// Single-obstacle condition on a precomputed `d_min0`.
pub fn theorem2_condition(d_min0: f64, margins: &SafetyMargins, a_p: f64) -> Theorem2Report {
    let required_d_min = margins.separation_floor() + a_p;
    let margin = d_min0 - required_d_min;
    Theorem2Report {
        d_min0,
        a_p,
        required_d_min,
        satisfied: margin >= -BOUNDARY_TOLERANCE,
        margin,
    }
}

/// Single-obstacle condition; `NotApplicable` unless `field` holds exactly one obstacle.
pub fn check_theorem2(
    positions: &[Vec2],
    margins: &SafetyMargins,
    field: &FlowField,
) -> Result<Theorem2Report> {
    if field.len() != 1 {
        return Err(Error::NotApplicable(format!(
            "requires exactly one failed agent, field has {}",
            field.len()
        )));
    }
    let d_min0 = min_pairwise_distance(positions)
        .ok_or_else(|| Error::NotApplicable("need at least two healthy agents".into()))?;
    Ok(theorem2_condition(d_min0, margins, field.obstacles()[0].planned_radius()))
}

/// Run both checks, recording out-of-scope cases instead of failing.
pub fn assess(
    positions: &[Vec2],
    field: &FlowField,
    margins: &SafetyMargins,
    lambda: &LambdaSettings,
) -> Result<SafetyReport> {
    ensure_outside(positions, field)?;
    let theorem1 = match check_theorem1(positions, field, margins, lambda) {
        Ok(r) => Check::Evaluated(r),
        Err(Error::NotApplicable(reason)) => Check::NotApplicable { reason },
        Err(e) => return Err(e),
    };
    let theorem2 = match check_theorem2(positions, margins, field) {
        Ok(r) => Check::Evaluated(r),
        Err(Error::NotApplicable(reason)) => Check::NotApplicable { reason },
        Err(e) => return Err(e),
    };
    Ok(SafetyReport {
        healthy_agents: positions.len(),
        obstacles: field.len(),
        d_min0: min_pairwise_distance(positions),
        theorem1,
        theorem2,
    })
}

/// Squared x-y distance and `(phi, psi)` distance squared over `lambda_max`
/// for one pair; the conformal bound says the first is at least the second.
pub fn conformal_bound_terms(field: &FlowField, a: Vec2, b: Vec2, lambda_max: f64) -> Result<(f64, f64)> {
    let fa = field.eval_field(a)?;
    let fb = field.eval_field(b)?;
    let dp2 = (fa.phi - fb.phi).powi(2) + (fa.psi - fb.psi).powi(2);
    Ok(((a - b).norm_squared(), dp2 / lambda_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationSample {
    pub time: f64,
    /// Nearest-neighbour distance among healthy commanded positions.
    pub d_min_commanded: Option<f64>,
    pub d_min_actual: Option<f64>,
    /// Smallest `|r - center| - a_f` over healthy agents and active obstacles.
    pub clearance_commanded: Option<f64>,
    pub clearance_actual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// `2 (delta + epsilon)`.
    pub floor: f64,
    pub samples: Vec<SeparationSample>,
}

fn min_opt(it: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    it.flatten().min_by(f64::total_cmp)
}

impl SeparationReport {
    pub fn min_d_commanded(&self) -> Option<f64> {
        min_opt(self.samples.iter().map(|s| s.d_min_commanded))
    }

    pub fn min_d_actual(&self) -> Option<f64> {
        min_opt(self.samples.iter().map(|s| s.d_min_actual))
    }

    pub fn min_clearance_commanded(&self) -> Option<f64> {
        min_opt(self.samples.iter().map(|s| s.clearance_commanded))
    }

    pub fn min_clearance_actual(&self) -> Option<f64> {
        min_opt(self.samples.iter().map(|s| s.clearance_actual))
    }

    /// Commanded nearest-neighbour distance never fell below the floor.
    pub fn floor_respected(&self) -> bool {
        self.min_d_commanded()
            .is_none_or(|d| d >= self.floor - BOUNDARY_TOLERANCE)
    }
}

/// Per-step separation and exclusion clearance over a log.
///
/// Obstacles are taken from the log itself, each active from the step it
/// appeared at.
pub fn monitor_separations(log: &ScenarioLog, margins: &SafetyMargins) -> SeparationReport {
    let fields = log.fields();
    let samples = log
        .steps
        .iter()
        .zip(&fields)
        .map(|(step, field)| {
            let desired: Vec<Vec2> = step.healthy().map(|a| a.desired).collect();
            let actual: Option<Vec<Vec2>> = step.healthy().map(|a| a.actual).collect();
            let clearance = |pts: &[Vec2]| min_opt(pts.iter().map(|p| field.actual_clearance(*p)));
            SeparationSample {
                time: step.time,
                d_min_commanded: min_pairwise_distance(&desired),
                d_min_actual: actual.as_deref().and_then(min_pairwise_distance),
                clearance_commanded: clearance(&desired),
                clearance_actual: actual.as_deref().and_then(clearance),
            }
        })
        .collect();
    SeparationReport {
        floor: margins.separation_floor(),
        samples,
    }
}
