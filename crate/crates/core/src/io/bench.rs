use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_field::{FlowField, Obstacle};
use crate::navigator::{CemNavigator, NavigatorConfig};
use crate::safety::SafetyMargins;
use crate::solver::SolverConfig;
use crate::{AgentId, Vec2};

/// Nearest-rank percentiles of a runtime sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub count: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl RuntimeStats {
    /// All zeros for an empty sample.
    pub fn from_ns(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return RuntimeStats::default();
        }
        let mut v = samples.to_vec();
        v.sort_unstable();
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        RuntimeStats {
            count: v.len(),
            mean_ns: v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64,
            p50_ns: rank(0.50),
            p99_ns: rank(0.99),
            max_ns: *v.last().expect("nonempty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub agents: usize,
    pub k: usize,
    pub steps: usize,
    pub deadline_ns: u64,
    pub deadline_misses: usize,
    pub stats: RuntimeStats,
}

/// `n` agents on a 2.72 m lattice upstream of one failed agent at the origin.
pub fn synthetic_formation(n: usize) -> Vec<(AgentId, Vec2)> {
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    (0..n)
        .map(|i| {
            let row = (i / cols) as f64;
            let col = (i % cols) as f64 - (cols as f64 - 1.0) / 2.0;
            (AgentId(i as u32 + 2), Vec2::new(-3.0 - 2.72 * row, 2.72 * col + 0.05))
        })
        .collect()
}

/// Time `steps` navigator ticks for `agents` agents with `k` passes.
pub fn run_bench(agents: usize, k: usize, steps: usize, seed: u64) -> Result<BenchReport> {
    let cfg = NavigatorConfig {
        k_passes: k,
        total_steps: steps,
        ..NavigatorConfig::default()
    };
    cfg.validate()?;
    if agents == 0 {
        return Err(Error::ConfigInvalid(vec!["bench needs at least one agent".into()]));
    }
    let margins = SafetyMargins::default();
    let field = FlowField::single(Obstacle::new(Vec2::zeros(), margins.padding(), &margins)?);
    let solver = SolverConfig {
        dt: cfg.dt,
        rng_seed: seed,
        ..SolverConfig::default()
    };
    let mut nav = CemNavigator::activate(&synthetic_formation(agents), field, cfg, solver)?;
    let mut runtimes = Vec::with_capacity(steps);
    for _ in 0..steps {
        runtimes.push(nav.step()?.step_runtime_ns);
    }
    let deadline_ns = Duration::from_secs_f64(cfg.dt).as_nanos() as u64;
    Ok(BenchReport {
        agents,
        k,
        steps,
        deadline_ns,
        deadline_misses: runtimes.iter().filter(|&&r| r > deadline_ns).count(),
        stats: RuntimeStats::from_ns(&runtimes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_use_nearest_rank() {
        let v: Vec<u64> = (1..=100).collect();
        let s = RuntimeStats::from_ns(&v);
        assert_eq!((s.p50_ns, s.p99_ns, s.max_ns, s.count), (50, 99, 100, 100));
        assert_eq!(s.mean_ns, 50.5);
        assert_eq!(RuntimeStats::from_ns(&[7]).p99_ns, 7);
    }

    #[test]
    fn empty_sample_is_all_zero() {
        assert_eq!(RuntimeStats::from_ns(&[]), RuntimeStats::default());
    }

    #[test]
    fn zero_steps_gives_an_empty_report() {
        let r = run_bench(6, 2, 0, 0).unwrap();
        assert_eq!(r.stats.count, 0);
        assert_eq!(r.deadline_misses, 0);
    }

    #[test]
    fn synthetic_formation_is_clear_of_the_obstacle() {
        let f = synthetic_formation(10);
        assert_eq!(f.len(), 10);
        assert!(f.iter().all(|(_, p)| p.norm() > 1.36));
    }
}
