//! Desk-scale verification experiments: multi-beam cross-talk, ghost
//! conditioning under offsets, and the 2D brick-wall robustness sweep.

use super::assemble::{assemble, SurfaceSelector, VerifySetup};
use super::solve::solve_and_measure;
use super::{GhostParams, MaterialParams, NitscheParams, Physics};
use crate::bg_mesh::GridSpec;
use crate::enrichment::UnzipMode;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, MaterialMap};
use crate::parallel::{run_serial, PipelineInput, RankState};
use rand::Rng;
use std::collections::BTreeSet;

/// Standard-normal sample via Box-Muller.
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Pipeline invariants checked on every experiment sample: parametric
/// volume conservation, positive orientation, bulk coverage, pairing,
/// and subphase graph consistency.
pub fn check_pipeline_invariants(state: &RankState) -> Result<()> {
    let dim = state.fg.dim;
    let refvol = 2.0f64.powi(dim as i32);
    for e in 0..state.bg.num_elems() {
        let v = state.fg.child_mesh_param_volume(e);
        if (v - refvol).abs() > 1e-10 {
            return Err(Error::invariant(format!(
                "element {e}: child mesh volume {v} != {refvol}"
            )));
        }
    }
    state.fg.check_orientation()?;
    // Subphase graphs: symmetric, no self edges, materials consistent.
    let topo = &state.topo;
    for (s, nbrs) in topo.g_s.iter().enumerate() {
        for &t in nbrs {
            if s == t || !topo.g_s[t].contains(&s) {
                return Err(Error::invariant("g_s asymmetry or self edge".to_string()));
            }
            if topo.subphases[s].material != topo.subphases[t].material {
                return Err(Error::invariant("g_s edge with differing materials".to_string()));
            }
            if topo.subphases[s].bg_elem == topo.subphases[t].bg_elem {
                return Err(Error::invariant("g_s edge within one element".to_string()));
            }
        }
    }
    for (s, nbrs) in topo.g_i.iter().enumerate() {
        for &t in nbrs {
            if s == t || !topo.g_i[t].contains(&s) {
                return Err(Error::invariant("g_i asymmetry or self edge".to_string()));
            }
        }
    }
    // Every subphase in exactly one bulk cluster (serial run: all owned).
    let mut seen = vec![0usize; topo.subphases.len()];
    for cs in state.clusters.bulk.values() {
        for c in cs {
            let s = topo
                .subphases
                .iter()
                .position(|sp| sp.bg_elem == c.bg_elem && sp.local == c.u)
                .ok_or_else(|| Error::invariant("bulk cluster without subphase".to_string()))?;
            seen[s] += 1;
        }
    }
    if seen.iter().any(|&n| n != 1) {
        return Err(Error::invariant("bulk clusters do not cover subphases once".to_string()));
    }
    let hmin = state.bg.spec.h[0].min(state.bg.spec.h[1]);
    let perr = state.clusters.max_pairing_error(&state.bg);
    if perr > 1e-12 * hmin {
        return Err(Error::invariant(format!("pairing error {perr}")));
    }
    Ok(())
}

// ---- multi-beam ------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MultibeamConfig {
    pub num_beams: usize,
    /// Beam width, gap, and lattice offset in units of the element size.
    pub beam_width: f64,
    pub beam_gap: f64,
    pub offset: f64,
    pub height: usize,
    pub youngs: f64,
    pub poisson: f64,
    pub traction: [f64; 2],
    pub degree: usize,
    pub ghost: Option<GhostParams>,
}

impl Default for MultibeamConfig {
    fn default() -> Self {
        MultibeamConfig {
            num_beams: 5,
            beam_width: 1.0,
            beam_gap: 1.0,
            offset: 0.6,
            height: 6,
            youngs: 1000.0,
            poisson: 0.3,
            traction: [1.0, 0.0],
            degree: 2,
            ghost: Some(GhostParams::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultibeamReport {
    pub peak_stress_enriched: f64,
    pub peak_stress_single_level: f64,
    /// enriched / single-level peak |sigma_yy|.
    pub stress_ratio: f64,
    pub dofs_enriched: usize,
    pub dofs_single_level: usize,
}

/// Vertical cantilever beams clamped at the bottom with a horizontal
/// traction on their top faces. Without per-support enrichment, basis
/// functions bridge the gaps and the beams respond like one stiff block,
/// underpredicting the bending stress.
pub fn run_multibeam_experiment(cfg: &MultibeamConfig) -> Result<MultibeamReport> {
    let (state_e, peak_e, dofs_e) = multibeam_solve(cfg, UnzipMode::Enriched)?;
    let (_, peak_s, dofs_s) = multibeam_solve(cfg, UnzipMode::SingleLevel)?;
    let _ = state_e;
    Ok(MultibeamReport {
        peak_stress_enriched: peak_e,
        peak_stress_single_level: peak_s,
        stress_ratio: peak_e / peak_s,
        dofs_enriched: dofs_e,
        dofs_single_level: dofs_s,
    })
}

/// Pipeline input for the multi-beam lattice (domain padded so common
/// rank grids divide it).
pub fn multibeam_input(cfg: &MultibeamConfig, mode: UnzipMode) -> Result<PipelineInput> {
    let pitch = cfg.beam_width + cfg.beam_gap;
    let extent = cfg.offset + cfg.num_beams as f64 * pitch;
    let width = (extent.ceil() as usize).next_multiple_of(4);
    let spec = GridSpec::new(
        2,
        &[width, cfg.height],
        &[0.0, 0.0],
        &[1.0, 1.0],
        cfg.degree,
    )?;
    let snap = 1e-6;
    let mut geoms = Vec::new();
    for k in 0..cfg.num_beams {
        let x0 = cfg.offset + k as f64 * pitch;
        geoms.push(Geometry::plane([1.0, 0.0, 0.0], x0, snap));
        geoms.push(Geometry::plane([1.0, 0.0, 0.0], x0 + cfg.beam_width, snap));
    }
    let ng = geoms.len();
    let mut table = vec![1u32; 1 << ng];
    for (raw, entry) in table.iter_mut().enumerate() {
        let bit = |g: usize| raw >> (ng - 1 - g) & 1 == 1;
        let inside = (0..cfg.num_beams).any(|k| bit(2 * k) && !bit(2 * k + 1));
        *entry = if inside { 0 } else { 1 };
    }
    let mut input = PipelineInput::new(spec, geoms)?;
    input.material_map = MaterialMap::from_table(table, ng)?;
    input.void = BTreeSet::from([1]);
    input.unzip_mode = mode;
    Ok(input)
}

fn multibeam_solve(cfg: &MultibeamConfig, mode: UnzipMode) -> Result<(RankState, f64, usize)> {
    let input = multibeam_input(cfg, mode)?;
    let state = run_serial(&input)?;
    let zero = |_: &[f64; 3]| [0.0, 0.0];
    let t = cfg.traction;
    let pull = move |_: &[f64; 3]| t;
    let setup = VerifySetup {
        physics: Physics::PlaneStress,
        materials: vec![
            MaterialParams::solid(cfg.youngs, cfg.poisson),
            MaterialParams::void(),
        ],
        nitsche: NitscheParams::for_degree(cfg.degree),
        ghost: cfg.ghost,
        dirichlet: vec![(SurfaceSelector::domain(&[2]), &zero)],
        neumann: vec![(SurfaceSelector::domain(&[3]), &pull)],
        source: None,
    };
    let system = assemble(&state, &setup)?;
    let report = solve_and_measure(&system, false)?;
    let mp = setup.materials[0];
    let mut peak: f64 = 0.0;
    for cl in state.clusters.bulk.get(&0).into_iter().flatten() {
        for p in &cl.points {
            let s = super::assemble::eval_stress(&state, cl, p, &report.solution, &mp)?;
            peak = peak.max(s[1].abs());
        }
    }
    Ok((state, peak, report.active_dofs))
}

// ---- ghost offset sweep ----------------------------------------------------

#[derive(Debug, Clone)]
pub struct GhostSweepConfig {
    pub offsets: Vec<f64>,
    pub beam_width: f64,
    pub beam_gap: f64,
    pub num_beams: usize,
    pub height: usize,
    pub degree: usize,
    pub youngs: f64,
    pub ghost_coeff: f64,
}

impl Default for GhostSweepConfig {
    fn default() -> Self {
        GhostSweepConfig {
            offsets: vec![0.5, 0.7, 0.9, 0.95, 0.99, 0.999],
            beam_width: 1.4,
            beam_gap: 0.6,
            num_beams: 3,
            height: 4,
            degree: 2,
            youngs: 1000.0,
            ghost_coeff: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GhostSweepReport {
    /// (offset, stabilized kappa, unstabilized kappa or None if singular
    /// to working precision).
    pub rows: Vec<(f64, f64, Option<f64>)>,
}

impl GhostSweepReport {
    pub fn stabilized_spread(&self) -> f64 {
        let k: Vec<f64> = self.rows.iter().map(|r| r.1).collect();
        let max = k.iter().cloned().fold(f64::MIN, f64::max);
        let min = k.iter().cloned().fold(f64::MAX, f64::min);
        (max / min).log10()
    }

    pub fn worst_ratio(&self) -> f64 {
        let stab_max = self.rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
        self.rows
            .iter()
            .map(|r| r.2.unwrap_or(f64::INFINITY) / stab_max)
            .fold(0.0, f64::max)
    }
}

/// Sweep the beam lattice offset through pathological cut positions and
/// record the condition number with and without ghost stabilization.
pub fn run_ghost_offset_sweep(cfg: &GhostSweepConfig) -> Result<GhostSweepReport> {
    let mut rows = Vec::new();
    for &off in &cfg.offsets {
        let mb = MultibeamConfig {
            num_beams: cfg.num_beams,
            beam_width: cfg.beam_width,
            beam_gap: cfg.beam_gap,
            offset: off,
            height: cfg.height,
            youngs: cfg.youngs,
            poisson: 0.3,
            traction: [1.0, 0.0],
            degree: cfg.degree,
            ghost: Some(GhostParams {
                coeff: cfg.ghost_coeff,
            }),
        };
        let input = multibeam_input(&mb, UnzipMode::Enriched)?;
        let state = run_serial(&input)?;
        check_pipeline_invariants(&state)?;
        let zero = |_: &[f64; 3]| [0.0, 0.0];
        let mut kappa = [None, None];
        for (slot, ghost) in [
            Some(GhostParams {
                coeff: cfg.ghost_coeff,
            }),
            None,
        ]
        .into_iter()
        .enumerate()
        {
            let setup = VerifySetup {
                physics: Physics::PlaneStress,
                materials: vec![
                    MaterialParams::solid(cfg.youngs, 0.3),
                    MaterialParams::void(),
                ],
                nitsche: NitscheParams::for_degree(cfg.degree),
                ghost,
                dirichlet: vec![(SurfaceSelector::domain(&[2]), &zero)],
                neumann: vec![],
                source: None,
            };
            let system = assemble(&state, &setup)?;
            kappa[slot] = match solve_and_measure(&system, true) {
                Ok(rep) => rep.condition,
                Err(Error::Invariant(_)) => None, // singular to precision
                Err(e) => return Err(e),
            };
        }
        let stab = kappa[0].ok_or_else(|| {
            Error::invariant(format!("stabilized system singular at offset {off}"))
        })?;
        rows.push((off, stab, kappa[1]));
    }
    Ok(GhostSweepReport { rows })
}

// ---- brick wall ------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BrickwallConfig {
    /// delta values in units of h.
    pub deltas: Vec<f64>,
    pub samples_per_delta: usize,
    pub seed: u64,
    pub ghost_coeff: f64,
    /// Also assemble without ghost for comparison (slower).
    pub with_unstabilized: bool,
}

impl Default for BrickwallConfig {
    fn default() -> Self {
        BrickwallConfig {
            deltas: vec![0.0, 1e-4, 1e-2, 0.5, 1.0],
            samples_per_delta: 100,
            seed: 7,
            ghost_coeff: 0.01,
            with_unstabilized: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BrickwallDeltaRow {
    pub delta_over_h: f64,
    pub samples: usize,
    pub log10_kappa_min: f64,
    pub log10_kappa_max: f64,
    pub log10_kappa_mean: f64,
    pub log10_kappa_unstab_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BrickwallReport {
    pub aligned_log10_kappa: f64,
    pub rows: Vec<BrickwallDeltaRow>,
    pub failures: usize,
}

/// 2D brick wall: a 2x1 rectangle of bricks with interfaces that align
/// with mesh lines in the reference position, swept through vanishing
/// brick widths and randomly translated. Every sample runs the full
/// pipeline with invariant checks and a stabilized elasticity assembly.
pub fn run_brickwall_experiment_2d(cfg: &BrickwallConfig) -> Result<BrickwallReport> {
    let h = 0.25;
    let mut rng = crate::seeded_rng(cfg.seed);
    let aligned = brickwall_sample(1.0 * h, [0.0, 0.0], cfg.ghost_coeff, false, &mut rng)?;
    let aligned_log10 = aligned.0.log10();

    let mut rows = Vec::new();
    let failures = 0usize;
    for &d in &cfg.deltas {
        let delta = d * h;
        let mut logs = Vec::new();
        let mut unstab_max: Option<f64> = None;
        for _ in 0..cfg.samples_per_delta {
            let dx = [
                normal(&mut rng).signum() * 10f64.powf(-normal(&mut rng).abs()) * h,
                normal(&mut rng).signum() * 10f64.powf(-normal(&mut rng).abs()) * h,
            ];
            match brickwall_sample(delta, dx, cfg.ghost_coeff, cfg.with_unstabilized, &mut rng)
            {
                Ok((kappa, unstab)) => {
                    logs.push(kappa.log10());
                    if let Some(u) = unstab {
                        let lu = u.log10();
                        unstab_max = Some(unstab_max.map_or(lu, |m: f64| m.max(lu)));
                    }
                }
                Err(e) => {
                    return Err(Error::invariant(format!(
                        "brick wall sample failed at delta/h={d}: {e}"
                    )));
                }
            }
        }
        let n = logs.len() as f64;
        rows.push(BrickwallDeltaRow {
            delta_over_h: d,
            samples: logs.len(),
            log10_kappa_min: logs.iter().cloned().fold(f64::MAX, f64::min),
            log10_kappa_max: logs.iter().cloned().fold(f64::MIN, f64::max),
            log10_kappa_mean: logs.iter().sum::<f64>() / n,
            log10_kappa_unstab_max: unstab_max,
        });
    }
    Ok(BrickwallReport {
        aligned_log10_kappa: aligned_log10,
        rows,
        failures,
    })
}

/// The brick-wall mesh element size.
pub const BRICKWALL_H: f64 = 0.25;

/// Pipeline input for the 2D brick wall: a 2x1 wall of four masonry
/// bricks immersed in a 12x8 grid. The bottom row joint sits at
/// xm - delta, the top row joint at xm + delta; raw regions split by the
/// unused center plane and the opposite row's joint merge back into
/// their brick, so every thin stagger strip stays part of a fat brick.
/// At delta = 0 the two joints coincide.
pub fn brickwall_input(delta: f64, shift: [f64; 2]) -> Result<PipelineInput> {
    let h = BRICKWALL_H;
    let spec = GridSpec::new(2, &[12, 8], &[0.0, 0.0], &[h, h], 2)?;
    let snap = 1e-6 * h;
    let (x0, x1) = (0.5 + shift[0], 2.5 + shift[0]);
    let (y0, y1) = (0.5 + shift[1], 1.5 + shift[1]);
    let xm = 1.5 + shift[0];
    let ym = 1.0 + shift[1];
    let geoms = vec![
        Geometry::plane([1.0, 0.0, 0.0], x0, snap),
        Geometry::plane([1.0, 0.0, 0.0], x1, snap),
        Geometry::plane([0.0, 1.0, 0.0], y0, snap),
        Geometry::plane([0.0, 1.0, 0.0], y1, snap),
        Geometry::plane([0.0, 1.0, 0.0], ym, snap),
        Geometry::plane([1.0, 0.0, 0.0], xm, snap),
        Geometry::plane([1.0, 0.0, 0.0], xm - delta, snap),
        Geometry::plane([1.0, 0.0, 0.0], xm + delta, snap),
    ];
    let ng = geoms.len();
    let mut table = vec![0u32; 1 << ng];
    for (raw, entry) in table.iter_mut().enumerate() {
        let bit = |g: usize| raw >> (ng - 1 - g) & 1 == 1;
        let inside = bit(0) && !bit(1) && bit(2) && !bit(3);
        *entry = if !inside {
            4 // void
        } else if !bit(4) {
            if !bit(6) {
                0
            } else {
                1
            }
        } else if !bit(7) {
            2
        } else {
            3
        };
    }
    let mut input = PipelineInput::new(spec, geoms)?;
    input.material_map = MaterialMap::from_table(table, ng)?;
    input.void = BTreeSet::from([4]);
    Ok(input)
}

/// One brick-wall sample: returns (stabilized kappa, optional
/// unstabilized kappa).
fn brickwall_sample(
    delta: f64,
    shift: [f64; 2],
    ghost_coeff: f64,
    with_unstab: bool,
    rng: &mut impl Rng,
) -> Result<(f64, Option<f64>)> {
    let (x0, x1) = (0.5 + shift[0], 2.5 + shift[0]);
    let input = brickwall_input(delta, shift)?;
    let state = run_serial(&input)?;
    check_pipeline_invariants(&state)?;

    let mut materials = Vec::new();
    for _ in 0..4 {
        materials.push(MaterialParams::solid(
            rng.random_range(1.0..5.0),
            rng.random_range(0.25..0.35),
        ));
    }
    materials.push(MaterialParams::void());

    let zero = |_: &[f64; 3]| [0.0, 0.0];
    let pull = |_: &[f64; 3]| [1.0, 1.0];
    let clamp =
        SurfaceSelector::void_interface().within([x0 - 0.02, -9.0, 0.0], [x0 + 0.02, 9.0, 0.0]);
    let load =
        SurfaceSelector::void_interface().within([x1 - 0.02, -9.0, 0.0], [x1 + 0.02, 9.0, 0.0]);

    let run = |ghost: Option<GhostParams>| -> Result<f64> {
        let setup = VerifySetup {
            physics: Physics::PlaneStress,
            materials: materials.clone(),
            nitsche: NitscheParams::for_degree(2),
            ghost,
            dirichlet: vec![(clamp.clone(), &zero)],
            neumann: vec![(load.clone(), &pull)],
            source: None,
        };
        let system = assemble(&state, &setup)?;
        let rep = solve_and_measure(&system, true)?;
        rep.condition
            .ok_or_else(|| Error::invariant("condition not computed".to_string()))
    };
    let stab = run(Some(GhostParams { coeff: ghost_coeff }))?;
    let unstab = if with_unstab {
        match run(None) {
            Ok(k) => Some(k),
            Err(Error::Invariant(_)) => Some(f64::INFINITY),
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok((stab, unstab))
}
