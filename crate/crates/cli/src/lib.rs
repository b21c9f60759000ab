//! Command line driver: configuration loading, the pipeline run per the
//! driver sequence, exporters, and the built-in experiments.

pub mod config;
pub mod export;

use config::RunConfig;
use cutmesh::error::{Error, Result};
use cutmesh::parallel::{run_pipeline, ParallelRun};
use cutmesh::verify::{
    run_brickwall_experiment_2d, run_ghost_offset_sweep, run_multibeam_experiment,
    BrickwallConfig, GhostSweepConfig, MultibeamConfig,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub ranks: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub export_mesh: Option<PathBuf>,
    pub export_clusters: Option<PathBuf>,
    pub dry_run: bool,
}

/// The stage plan printed by `--dry-run`, in driver order.
pub fn stage_plan(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "plan:");
    let _ = writeln!(
        out,
        "  1. build background mesh {:?} degree {} on {} rank(s)",
        &cfg.mesh.elements,
        cfg.mesh.degree,
        cfg.rank_grid().iter().product::<usize>()
    );
    let _ = writeln!(out, "  2. initialize foreground mesh");
    let _ = writeln!(out, "  3. regular subdivision of intersected elements");
    for (i, g) in cfg.geometries.iter().enumerate() {
        let _ = writeln!(out, "  4.{} templated subdivision for geometry {g:?}", i + 1);
    }
    let _ = writeln!(out, "  5. communicate foreground cell and vertex IDs");
    let _ = writeln!(out, "  6. apply material map");
    let _ = writeln!(out, "  7. facet connectivity and bg facet descendants");
    let _ = writeln!(out, "  8. generate subphases (+ IDs) and subphase graphs");
    let _ = writeln!(out, "  9. unzip background elements (+ enriched IDs)");
    let _ = writeln!(out, " 10. bulk, side/interface, and ghost clusters");
    let _ = writeln!(out, " 11. exchange IENs of referenced aura elements");
    let _ = writeln!(out, " 12. write exports");
    out
}

/// Execute a configured run and write the requested outputs. Returns the
/// stats table text.
pub fn execute(cfg: &RunConfig, base_dir: &Path, ov: &CliOverrides) -> Result<String> {
    let mut cfg = cfg.clone();
    if let Some(r) = &ov.ranks {
        cfg.run.ranks = r.clone();
    }
    if let Some(s) = ov.seed {
        cfg.run.seed = s;
    }
    if let Some(p) = &ov.export_mesh {
        cfg.output.mesh = Some(p.clone());
    }
    if let Some(p) = &ov.export_clusters {
        cfg.output.clusters = Some(p.clone());
    }

    if ov.dry_run {
        return Ok(stage_plan(&cfg));
    }

    let input = cfg.pipeline_input(base_dir)?;
    let run = run_pipeline(&input, cfg.rank_grid())?;
    write_outputs(&cfg, &run)?;
    Ok(export::stats_text(&run.stats))
}

fn write_outputs(cfg: &RunConfig, run: &ParallelRun) -> Result<()> {
    if let Some(path) = &cfg.output.mesh {
        std::fs::write(path, export::foreground_vtk(run)?)?;
    }
    if let Some(path) = &cfg.output.clusters {
        std::fs::write(path, export::clusters_text(run)?)?;
    }
    if let Some(path) = &cfg.output.stats {
        std::fs::write(path, export::stats_text(&run.stats))?;
    }
    if let Some(path) = &cfg.output.graphs {
        if run.ranks.len() != 1 {
            return Err(Error::config(
                "graph export is only available for single-rank runs",
            ));
        }
        std::fs::write(path, export::graphs_text(&run.ranks[0]))?;
    }
    Ok(())
}

/// Built-in experiments, reported as text tables.
pub fn run_experiment(name: &str, seed: u64) -> Result<String> {
    match name {
        "multibeam" => {
            let rep = run_multibeam_experiment(&MultibeamConfig::default())?;
            let mut out = String::from("# multibeam experiment\n");
            let _ = writeln!(out, "peak_sigma_yy_enriched    : {:.6e}", rep.peak_stress_enriched);
            let _ = writeln!(
                out,
                "peak_sigma_yy_single_level: {:.6e}",
                rep.peak_stress_single_level
            );
            let _ = writeln!(out, "stress_ratio              : {:.4}", rep.stress_ratio);
            let _ = writeln!(out, "dofs_enriched             : {}", rep.dofs_enriched);
            let _ = writeln!(out, "dofs_single_level         : {}", rep.dofs_single_level);
            Ok(out)
        }
        "brickwall" => {
            let rep = run_brickwall_experiment_2d(&BrickwallConfig {
                seed,
                ..Default::default()
            })?;
            let mut out = String::from("# brick wall experiment (stabilized)\n");
            let _ = writeln!(out, "aligned_log10_kappa: {:.3}", rep.aligned_log10_kappa);
            let _ = writeln!(out, "{:>10} {:>8} {:>8} {:>8} {:>8}", "delta/h", "samples", "min", "mean", "max");
            for r in &rep.rows {
                let _ = writeln!(
                    out,
                    "{:>10} {:>8} {:>8.3} {:>8.3} {:>8.3}",
                    r.delta_over_h, r.samples, r.log10_kappa_min, r.log10_kappa_mean,
                    r.log10_kappa_max
                );
            }
            let _ = writeln!(out, "failures: {}", rep.failures);
            Ok(out)
        }
        "ghost" => {
            let rep = run_ghost_offset_sweep(&GhostSweepConfig::default())?;
            let mut out = String::from("# ghost stabilization offset sweep\n");
            let _ = writeln!(out, "{:>10} {:>14} {:>14}", "offset", "kappa_ghost", "kappa_none");
            for (off, stab, unstab) in &rep.rows {
                let u = unstab.map_or("singular".to_string(), |k| format!("{k:.4e}"));
                let _ = writeln!(out, "{off:>10} {stab:>14.4e} {u:>14}");
            }
            Ok(out)
        }
        "scaling" => scaling_experiment(),
        other => Err(Error::config(format!(
            "unknown experiment '{other}' (multibeam | brickwall | ghost | scaling)"
        ))),
    }
}

/// Desk-scale time-complexity check: double the element count at fixed
/// geometry density and compare stage times and efficiency.
fn scaling_experiment() -> Result<String> {
    use cutmesh::bg_mesh::GridSpec;
    use cutmesh::geometry::{Geometry, GeometryKind, SampledLevelSet};
    use cutmesh::parallel::{OverheadReport, PipelineInput};

    let tiled = |nx: usize| -> Result<PipelineInput> {
        let h = 1.0 / 16.0;
        let spec = GridSpec::new(2, &[nx, 32], &[0.0, 0.0], &[h, h], 2)?;
        let (px, py) = (2 * nx + 1, 65);
        let (dx, dy) = (nx as f64 * h / (px - 1) as f64, 2.0 / (py - 1) as f64);
        let mut values = Vec::with_capacity(px * py);
        for j in 0..py {
            for i in 0..px {
                let (x, y) = (i as f64 * dx, j as f64 * dy);
                let mut phi = f64::MAX;
                for bx in 0..nx / 16 {
                    for by in 0..2 {
                        let d = ((x - bx as f64 - 0.5).powi(2)
                            + (y - by as f64 - 0.5).powi(2))
                        .sqrt()
                            - 0.35;
                        phi = phi.min(d);
                    }
                }
                values.push(phi);
            }
        }
        let ls = SampledLevelSet::new(2, &[px, py], &[0.0, 0.0], &[dx, dy], values)?;
        let g = Geometry::new(GeometryKind::Sampled(ls), 1e-6 * h);
        PipelineInput::new(spec, vec![g])
    };

    let mut out = String::from("# scaling experiment: 2x element count at fixed geometry density\n");
    let mut baseline: Option<cutmesh::parallel::RunStats> = None;
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>12} {:>8} {:>8} {:>8}",
        "elems", "seconds", "records", "eta", "mu", "l_loc"
    );
    for nx in [32usize, 64] {
        let input = tiled(nx)?;
        let mut runs = Vec::new();
        for _ in 0..3 {
            runs.push(run_pipeline(&input, [1, 1, 1])?);
        }
        // Median by total stage time.
        runs.sort_by(|a, b| {
            let t = |r: &ParallelRun| -> f64 {
                r.stats.stage_seconds.iter().map(|(_, s)| s).sum()
            };
            t(a).partial_cmp(&t(b)).unwrap()
        });
        let stats = runs.swap_remove(1).stats;
        let report = match &baseline {
            None => {
                let b = stats.clone();
                let r = OverheadReport::against_baseline(&stats, &b)?;
                baseline = Some(b);
                r
            }
            Some(b) => OverheadReport::against_baseline(&stats, b)?,
        };
        let total: f64 = report.stage_seconds.iter().map(|(_, s)| s).sum();
        let _ = writeln!(
            out,
            "{:>8} {:>10.4} {:>12} {:>8.3} {:>8.3} {:>8.3}",
            nx * 32,
            total,
            report.memory_records,
            report.eta,
            report.mu,
            report.lambda_loc
        );
    }
    out.push_str("# eta, mu relative to the first row; np fixed at 1\n");
    Ok(out)
}
