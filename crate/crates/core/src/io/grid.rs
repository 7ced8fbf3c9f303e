use std::io::Write;

use crate::error::{Error, Result};
use crate::flow_field::{FlowField, Obstacle, Rect};
use crate::safety::SafetyMargins;
use crate::Vec2;

fn numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{what}: {t:?} is not a number")))
        })
        .collect()
}

/// Parse `"x,y,a_p;x,y,a_p;..."`. An empty string is the empty set.
pub fn parse_obstacles(spec: &str, margins: &SafetyMargins) -> Result<Vec<Obstacle>> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match numbers(item, "obstacle")?.as_slice() {
            &[x, y, a_p] => Obstacle::from_planned(Vec2::new(x, y), a_p, margins),
            _ => Err(Error::Parse(format!("obstacle {item:?} must be x,y,a_p"))),
        })
        .collect()
}

/// Parse `"x_min,x_max,y_min,y_max"`.
pub fn parse_bbox(spec: &str) -> Result<Rect> {
    match numbers(spec, "bbox")?.as_slice() {
        &[x_min, x_max, y_min, y_max] => Rect::new(x_min, x_max, y_min, y_max),
        _ => Err(Error::Parse(format!("bbox {spec:?} must be x_min,x_max,y_min,y_max"))),
    }
}

/// Write the `(x, y, phi, psi)` grid as CSV; returns the number of data rows.
///
/// Metadata precedes the header as `# key = value` lines. Cells inside an
/// exclusion disk keep their coordinates and leave `phi` and `psi` empty.
pub fn write_field_grid<W: Write>(mut out: W, field: &FlowField, domain: &Rect, step: f64) -> Result<usize> {
    let samples = field.sample_grid(domain, step)?;
    let (xs, ys) = domain.axes(step)?;
    writeln!(out, "# streamnav field grid")?;
    writeln!(out, "# step = {step}")?;
    writeln!(out, "# nx = {}", xs.len())?;
    writeln!(out, "# ny = {}", ys.len())?;
    writeln!(
        out,
        "# bbox = {},{},{},{}",
        domain.x_min, domain.x_max, domain.y_min, domain.y_max
    )?;
    for o in field.obstacles() {
        let c = o.center();
        writeln!(
            out,
            "# obstacle = {},{},{},{}  (x, y, a_f, a_p)",
            c.x,
            c.y,
            o.actual_radius(),
            o.planned_radius()
        )?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "phi", "psi"])?;
    for s in &samples {
        let (phi, psi) = match s.value {
            Some(v) => (v.phi.to_string(), v.psi.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([s.x.to_string(), s.y.to_string(), phi, psi])?;
    }
    w.flush()?;
    Ok(samples.len())
}
