use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::safety::{monitor_separations, SafetyMargins};
use crate::sim::log::{ScenarioLog, StepRecord, LOG_SCHEMA_VERSION};

/// Appends one JSON object per step record.
pub struct JsonlWriter<W: Write> {
    out: W,
    written: usize,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter { out, written: 0 }
    }

    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_step_log<W: Write>(out: W, log: &ScenarioLog) -> Result<()> {
    let mut w = JsonlWriter::new(out);
    for s in &log.steps {
        w.write(s)?;
    }
    w.finish()?;
    Ok(())
}

/// Read a JSON-lines step log, rejecting other schema versions.
pub fn read_step_log<R: BufRead>(input: R) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("step log line {}: {e}", n + 1)))?;
        if rec.schema_version != LOG_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "step log line {}: schema version {} (expected {LOG_SCHEMA_VERSION})",
                n + 1,
                rec.schema_version
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// One summary CSV row per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: usize,
    pub time: f64,
    pub healthy: usize,
    pub delta_phi: Option<f64>,
    pub v_max: Option<f64>,
    pub peak_commanded_speed: f64,
    pub d_min_commanded: Option<f64>,
    pub d_min_actual: Option<f64>,
    pub clearance_commanded: Option<f64>,
    pub clearance_actual: Option<f64>,
    pub runtime_ns: u64,
    pub deadline_missed: bool,
}

pub fn write_summary_csv<W: Write>(out: W, log: &ScenarioLog, margins: &SafetyMargins) -> Result<()> {
    let sep = monitor_separations(log, margins);
    let mut w = csv::Writer::from_writer(out);
    for (s, m) in log.steps.iter().zip(&sep.samples) {
        w.serialize(SummaryRow {
            step: s.step,
            time: s.time,
            healthy: s.healthy().count(),
            delta_phi: s.delta_phi,
            v_max: s.v_max,
            peak_commanded_speed: s.peak_commanded_speed(),
            d_min_commanded: m.d_min_commanded,
            d_min_actual: m.d_min_actual,
            clearance_commanded: m.clearance_commanded,
            clearance_actual: m.clearance_actual,
            runtime_ns: s.runtime_ns,
            deadline_missed: s.deadline_missed,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub steps: PathBuf,
    pub summary: PathBuf,
    pub activations: PathBuf,
}

/// Write `steps.jsonl`, `summary.csv` and `activations.json` into `dir`.
pub fn write_outputs(dir: &Path, log: &ScenarioLog, margins: &SafetyMargins) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let paths = OutputPaths {
        steps: dir.join("steps.jsonl"),
        summary: dir.join("summary.csv"),
        activations: dir.join("activations.json"),
    };
    write_step_log(BufWriter::new(File::create(&paths.steps)?), log)?;
    write_summary_csv(BufWriter::new(File::create(&paths.summary)?), log, margins)?;
    let mut a = BufWriter::new(File::create(&paths.activations)?);
    serde_json::to_writer_pretty(&mut a, &log.activations)?;
    a.write_all(b"\n")?;
    a.flush()?;
    Ok(paths)
}
