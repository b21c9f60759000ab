//! Mesh overhead and efficiency metrics for the decomposition.

use crate::error::{Error, Result};

/// Per-run scalability metrics relative to a baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    /// max over ranks of (held elements / owned elements)
    pub lambda_loc: f64,
    /// total held elements / total owned elements
    pub lambda_glob: f64,
    /// wall seconds per pipeline stage
    pub stage_seconds: Vec<(String, f64)>,
    /// retained records per rank (memory proxy, not OS allocation)
    pub memory_records: u64,
    /// generalized efficiency (1 = perfect scaling)
    pub eta: f64,
    /// memory efficiency
    pub mu: f64,
}

/// Generalized efficiency eta = (s/s0) / ((np/np0) * (t/t0)).
pub fn efficiency(s: f64, s0: f64, np: f64, np0: f64, t: f64, t0: f64) -> Result<f64> {
    if s0 <= 0.0 || np0 <= 0.0 || t0 <= 0.0 {
        return Err(Error::config("efficiency baseline must be positive".to_string()));
    }
    Ok((s / s0) / ((np / np0) * (t / t0)))
}

/// Memory efficiency mu = (s/s0) / (M/M0).
pub fn memory_efficiency(s: f64, s0: f64, m: f64, m0: f64) -> Result<f64> {
    if s0 <= 0.0 || m0 <= 0.0 {
        return Err(Error::config("memory baseline must be positive".to_string()));
    }
    Ok((s / s0) / (m / m0))
}

impl OverheadReport {
    /// Build the report for a run against a recorded baseline run.
    pub fn against_baseline(
        stats: &crate::parallel::RunStats,
        baseline: &crate::parallel::RunStats,
    ) -> Result<OverheadReport> {
        let total = |s: &crate::parallel::RunStats| -> f64 {
            s.stage_seconds.iter().map(|(_, t)| t).sum()
        };
        let eta = efficiency(
            stats.problem_size as f64,
            baseline.problem_size as f64,
            stats.num_ranks as f64,
            baseline.num_ranks as f64,
            total(stats),
            total(baseline),
        )?;
        let mu = memory_efficiency(
            stats.problem_size as f64,
            baseline.problem_size as f64,
            stats.memory_records as f64,
            baseline.memory_records as f64,
        )?;
        Ok(OverheadReport {
            lambda_loc: stats.lambda_loc,
            lambda_glob: stats.lambda_glob,
            stage_seconds: stats.stage_seconds.clone(),
            memory_records: stats.memory_records,
            eta,
            mu,
        })
    }
}
