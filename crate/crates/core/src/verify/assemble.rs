//! Dense assembly of the verification physics from cluster sets.

use super::{GhostParams, MaterialParams, NitscheParams, Physics};
use crate::clusters::{Cluster, QuadPoint};
use crate::error::{Error, Result};
use crate::parallel::RankState;
use nalgebra::{DMatrix, DVector};

/// Field value callback: returns up to two components.
pub type FieldFn<'a> = &'a dyn Fn(&[f64; 3]) -> [f64; 2];

/// Selects side clusters for boundary conditions: ambient domain sides
/// and/or solid-void interfaces, optionally restricted to a physical box.
#[derive(Debug, Clone, Default)]
pub struct SurfaceSelector {
    pub domain_sides: Vec<usize>,
    pub void_interfaces: bool,
    pub within: Option<([f64; 3], [f64; 3])>,
}

impl SurfaceSelector {
    pub fn domain(sides: &[usize]) -> Self {
        SurfaceSelector {
            domain_sides: sides.to_vec(),
            ..Default::default()
        }
    }

    pub fn void_interface() -> Self {
        SurfaceSelector {
            void_interfaces: true,
            ..Default::default()
        }
    }

    pub fn within(mut self, lo: [f64; 3], hi: [f64; 3]) -> Self {
        self.within = Some((lo, hi));
        self
    }

    fn accepts(&self, x: &[f64; 3]) -> bool {
        match &self.within {
            None => true,
            Some((lo, hi)) => (0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]),
        }
    }
}

pub struct VerifySetup<'a> {
    pub physics: Physics,
    pub materials: Vec<MaterialParams>,
    pub nitsche: NitscheParams,
    pub ghost: Option<GhostParams>,
    pub dirichlet: Vec<(SurfaceSelector, FieldFn<'a>)>,
    pub neumann: Vec<(SurfaceSelector, FieldFn<'a>)>,
    pub source: Option<FieldFn<'a>>,
}

pub struct AssembledSystem {
    pub a: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub components: usize,
    pub n_enriched: usize,
}

impl AssembledSystem {
    pub fn dof(&self, enriched: usize, comp: usize) -> usize {
        enriched * self.components + comp
    }
}

/// Basis data at one quadrature point in physical derivatives.
struct PointBasis {
    vals: Vec<f64>,
    grads: Vec<[f64; 2]>,
    hess: Vec<[[f64; 2]; 2]>,
}

fn point_basis(state: &RankState, e: usize, xi: [f64; 3], order: usize) -> Result<PointBasis> {
    let ev = state.bg.eval_basis(e, xi, order)?;
    let h = state.bg.spec.h;
    let n = ev.values.len();
    let mut grads = Vec::with_capacity(if order >= 1 { n } else { 0 });
    let mut hess = Vec::with_capacity(if order >= 2 { n } else { 0 });
    for j in 0..n {
        if order >= 1 {
            grads.push([
                ev.grad[j][0] * 2.0 / h[0],
                ev.grad[j][1] * 2.0 / h[1],
            ]);
        }
        if order >= 2 {
            let mut hm = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    hm[a][b] = ev.hess[j][a][b] * 4.0 / (h[a] * h[b]);
                }
            }
            hess.push(hm);
        }
    }
    Ok(PointBasis {
        vals: ev.values,
        grads,
        hess,
    })
}

/// Plane-stress constitutive matrix.
fn d_matrix(m: &MaterialParams) -> [[f64; 3]; 3] {
    let f = m.e / (1.0 - m.nu * m.nu);
    [
        [f, f * m.nu, 0.0],
        [f * m.nu, f, 0.0],
        [0.0, 0.0, f * (1.0 - m.nu) / 2.0],
    ]
}

/// Strain vector of basis function `j` acting on component `c`:
/// [e_xx, e_yy, gamma_xy].
fn strain(g: &[f64; 2], c: usize) -> [f64; 3] {
    if c == 0 {
        [g[0], 0.0, g[1]]
    } else {
        [0.0, g[1], g[0]]
    }
}

fn stress(d: &[[f64; 3]; 3], eps: &[f64; 3]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i] += d[i][j] * eps[j];
        }
    }
    s
}

/// Traction sigma . n of the stress vector [sxx, syy, txy].
fn traction(s: &[f64; 3], n: &[f64; 3]) -> [f64; 2] {
    [s[0] * n[0] + s[2] * n[1], s[2] * n[0] + s[1] * n[1]]
}

/// Flux-like boundary operator per basis function and component:
/// diffusion: k dN/dn (one component); elasticity: sigma(N e_c) . n.
fn flux_rows(
    physics: Physics,
    mat: &MaterialParams,
    pb: &PointBasis,
    n: &[f64; 3],
) -> Vec<Vec<f64>> {
    let nen = pb.vals.len();
    match physics {
        Physics::Diffusion => {
            let mut out = vec![vec![0.0; 1]; nen];
            for (j, row) in out.iter_mut().enumerate() {
                row[0] = mat.e * (pb.grads[j][0] * n[0] + pb.grads[j][1] * n[1]);
            }
            out
        }
        Physics::PlaneStress => {
            let d = d_matrix(mat);
            let mut out = vec![vec![0.0; 4]; nen];
            // out[j] packs traction of (j, c) for c = 0, 1 as 2x2.
            for (j, row) in out.iter_mut().enumerate() {
                for c in 0..2 {
                    let t = traction(&stress(&d, &strain(&pb.grads[j], c)), n);
                    row[2 * c] = t[0];
                    row[2 * c + 1] = t[1];
                }
            }
            out
        }
    }
}

struct Dofs {
    /// Global dof per (local slot, component).
    map: Vec<usize>,
    ncomp: usize,
}

impl Dofs {
    fn get(&self, slot: usize, c: usize) -> usize {
        self.map[slot] * self.ncomp + c
    }

    fn len_slots(&self) -> usize {
        self.map.len()
    }
}

fn cluster_dofs(state: &RankState, c: &Cluster, ncomp: usize) -> Result<Dofs> {
    Ok(Dofs {
        map: state.enr.local_ien(c.bg_elem, c.u)?,
        ncomp,
    })
}

/// Effective stiffness for penalty scaling at an interface.
fn harmonic(e1: f64, e2: f64) -> f64 {
    2.0 * e1 * e2 / (e1 + e2)
}

/// Assemble the full residual/tangent system from one rank's clusters.
pub fn assemble(state: &RankState, setup: &VerifySetup) -> Result<AssembledSystem> {
    let physics = setup.physics;
    let ncomp = physics.components();
    let n = state.enr.num_enriched() * ncomp;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let h = state.bg.spec.h;
    let hmin = h[0].min(h[1]);
    let jac: f64 = (0..state.bg.dim()).map(|k| 0.5 * h[k]).product();
    let degree = state.bg.degree();
    let mat = |m: u32| -> Result<&MaterialParams> {
        setup
            .materials
            .get(m as usize)
            .ok_or_else(|| Error::config(format!("no material parameters for material {m}")))
    };

    // Bulk + volumetric source.
    for (m, clusters) in &state.clusters.bulk {
        let mp = mat(*m)?;
        if mp.void {
            continue;
        }
        let d = d_matrix(mp);
        for cl in clusters {
            let dofs = cluster_dofs(state, cl, ncomp)?;
            for p in &cl.points {
                let pb = point_basis(state, cl.bg_elem, p.xi, 1)?;
                let wj = p.w * jac;
                match physics {
                    Physics::Diffusion => {
                        for i in 0..dofs.len_slots() {
                            for j in 0..dofs.len_slots() {
                                let v = mp.e
                                    * (pb.grads[i][0] * pb.grads[j][0]
                                        + pb.grads[i][1] * pb.grads[j][1]);
                                a[(dofs.get(i, 0), dofs.get(j, 0))] += v * wj;
                            }
                        }
                    }
                    Physics::PlaneStress => {
                        for i in 0..dofs.len_slots() {
                            for ci in 0..2 {
                                let ei = strain(&pb.grads[i], ci);
                                let si = stress(&d, &ei);
                                for j in 0..dofs.len_slots() {
                                    for cj in 0..2 {
                                        let ej = strain(&pb.grads[j], cj);
                                        let v = si[0] * ej[0] + si[1] * ej[1] + si[2] * ej[2];
                                        a[(dofs.get(i, ci), dofs.get(j, cj))] += v * wj;
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(f) = &setup.source {
                    let x = state.bg.interpolate_space(cl.bg_elem, p.xi);
                    let fv = f(&x);
                    for i in 0..dofs.len_slots() {
                        for c in 0..ncomp {
                            rhs[dofs.get(i, c)] += pb.vals[i] * fv[c] * wj;
                        }
                    }
                }
            }
        }
    }

    // Gather boundary-condition surfaces: ambient boundary clusters plus
    // solid-void interface sides.
    let surface_clusters = |sel: &SurfaceSelector| -> Vec<(u32, &Cluster)> {
        let mut out = Vec::new();
        for (&(m, side), cs) in &state.clusters.boundary {
            if sel.domain_sides.contains(&side) {
                for c in cs {
                    out.push((m, c));
                }
            }
        }
        if sel.void_interfaces {
            let n_m = state.clusters.num_materials;
            for (&k, cs) in &state.clusters.side {
                let (mi, mj) = ((k - 1) / n_m, (k - 1) % n_m);
                let vi = setup.materials.get(mi as usize).map(|m| m.void);
                let vj = setup.materials.get(mj as usize).map(|m| m.void);
                if vi == Some(false) && vj == Some(true) {
                    for c in cs {
                        out.push((mi, c));
                    }
                }
            }
        }
        out
    };

    // Neumann tractions.
    for (sel, t) in &setup.neumann {
        for (m, cl) in surface_clusters(sel) {
            if mat(m)?.void {
                continue;
            }
            let dofs = cluster_dofs(state, cl, ncomp)?;
            for p in &cl.points {
                let x = state.bg.interpolate_space(cl.bg_elem, p.xi);
                if !sel.accepts(&x) {
                    continue;
                }
                let pb = point_basis(state, cl.bg_elem, p.xi, 0)?;
                let tv = t(&x);
                for i in 0..dofs.len_slots() {
                    for c in 0..ncomp {
                        rhs[dofs.get(i, c)] += pb.vals[i] * tv[c] * p.w;
                    }
                }
            }
        }
    }

    // Dirichlet via Nitsche.
    let sym = if setup.nitsche.symmetric { 1.0 } else { -1.0 };
    for (sel, u0) in &setup.dirichlet {
        for (m, cl) in surface_clusters(sel) {
            let mp = mat(m)?;
            if mp.void {
                continue;
            }
            let gamma = setup.nitsche.beta * mp.e / hmin;
            let dofs = cluster_dofs(state, cl, ncomp)?;
            for p in &cl.points {
                let x = state.bg.interpolate_space(cl.bg_elem, p.xi);
                if !sel.accepts(&x) {
                    continue;
                }
                let nrm = p.n.ok_or_else(|| {
                    Error::invariant("boundary point without a normal".to_string())
                })?;
                let pb = point_basis(state, cl.bg_elem, p.xi, 1)?;
                let flux = flux_rows(physics, mp, &pb, &nrm);
                let uv = u0(&x);
                for i in 0..dofs.len_slots() {
                    for ci in 0..ncomp {
                        let di = dofs.get(i, ci);
                        for j in 0..dofs.len_slots() {
                            for cj in 0..ncomp {
                                let dj = dofs.get(j, cj);
                                // -v (flux u) - sym (flux v) u + gamma v u
                                let consistency = pb.vals[i]
                                    * flux[j][cj * ncomp + ci]
                                    + sym * flux[i][ci * ncomp + cj] * pb.vals[j];
                                a[(di, dj)] -= consistency * p.w;
                                if ci == cj {
                                    a[(di, dj)] += gamma * pb.vals[i] * pb.vals[j] * p.w;
                                }
                            }
                        }
                        let mut r = gamma * pb.vals[i] * uv[ci];
                        for cj in 0..ncomp {
                            r -= sym * flux[i][ci * ncomp + cj] * uv[cj];
                        }
                        rhs[di] += r * p.w;
                    }
                }
            }
        }
    }

    // Interface Nitsche on mirrored pairs; each undirected pair once.
    for pairs in state.clusters.interface.values() {
        for pair in pairs {
            let s_lead = cluster_subphase(state, &pair.leader)?;
            let s_fol = cluster_subphase(state, &pair.follower)?;
            let (m1, m2) = (
                state.topo.subphases[s_lead].material,
                state.topo.subphases[s_fol].material,
            );
            if m1 >= m2 {
                continue; // mirrored duplicate
            }
            let (p1, p2) = (mat(m1)?, mat(m2)?);
            if p1.void || p2.void {
                continue;
            }
            let (w1, w2) = (p2.e / (p1.e + p2.e), p1.e / (p1.e + p2.e));
            let gamma = setup.nitsche.beta * harmonic(p1.e, p2.e) / hmin;
            let d1 = cluster_dofs(state, &pair.leader, ncomp)?;
            let d2 = cluster_dofs(state, &pair.follower, ncomp)?;
            let nen = d1.len_slots();
            for (pl, pf) in pair.leader.points.iter().zip(&pair.follower.points) {
                let nrm = pl.n.unwrap();
                let pbl = point_basis(state, pair.leader.bg_elem, pl.xi, 1)?;
                let pbf = point_basis(state, pair.follower.bg_elem, pf.xi, 1)?;
                let fl = flux_rows(physics, p1, &pbl, &nrm);
                let ff = flux_rows(physics, p2, &pbf, &nrm);
                // Jump rows: [v] = v1 - v2; average flux {f} = w1 f1 + w2 f2.
                // Combined index: side 0 = leader, side 1 = follower.
                let side = |s: usize, i: usize, c: usize| -> usize {
                    if s == 0 {
                        d1.get(i, c)
                    } else {
                        d2.get(i, c)
                    }
                };
                let jump_sgn = [1.0, -1.0];
                let wgt = [w1, w2];
                let val = |s: usize, i: usize| -> &Vec<f64> {
                    if s == 0 {
                        &fl[i]
                    } else {
                        &ff[i]
                    }
                };
                let basis_val = |s: usize, i: usize| -> f64 {
                    if s == 0 {
                        pbl.vals[i]
                    } else {
                        pbf.vals[i]
                    }
                };
                for si in 0..2 {
                    for i in 0..nen {
                        for ci in 0..ncomp {
                            let di = side(si, i, ci);
                            for sj in 0..2 {
                                for j in 0..nen {
                                    for cj in 0..ncomp {
                                        let dj = side(sj, j, cj);
                                        let mut v = 0.0;
                                        // -[v] . {flux(u)}
                                        v -= jump_sgn[si]
                                            * basis_val(si, i)
                                            * wgt[sj]
                                            * val(sj, j)[cj * ncomp + ci];
                                        // -sym {flux(v)} . [u]
                                        v -= sym
                                            * wgt[si]
                                            * val(si, i)[ci * ncomp + cj]
                                            * jump_sgn[sj]
                                            * basis_val(sj, j);
                                        // + gamma [v].[u]
                                        if ci == cj {
                                            v += gamma
                                                * jump_sgn[si]
                                                * basis_val(si, i)
                                                * jump_sgn[sj]
                                                * basis_val(sj, j);
                                        }
                                        a[(di, dj)] += v * pl.w;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // Ghost penalties on normal-derivative jumps up to the degree.
    if let Some(g) = &setup.ghost {
        for (m, pairs) in &state.clusters.ghost {
            let mp = mat(*m)?;
            if mp.void {
                continue;
            }
            for pair in pairs {
                let d1 = cluster_dofs(state, &pair.leader, ncomp)?;
                let d2 = cluster_dofs(state, &pair.follower, ncomp)?;
                let nen = d1.len_slots();
                for (pl, pf) in pair.leader.points.iter().zip(&pair.follower.points) {
                    let nrm = pl.n.unwrap();
                    let pbl = point_basis(state, pair.leader.bg_elem, pl.xi, 2)?;
                    let pbf = point_basis(state, pair.follower.bg_elem, pf.xi, 2)?;
                    for k in 1..=degree.min(2) {
                        let gamma = g.coeff * mp.e * hmin.powi(2 * k as i32 - 1);
                        // k-th normal derivative of each basis function.
                        let dn = |pb: &PointBasis, j: usize| -> f64 {
                            if k == 1 {
                                pb.grads[j][0] * nrm[0] + pb.grads[j][1] * nrm[1]
                            } else {
                                let hh = &pb.hess[j];
                                nrm[0] * nrm[0] * hh[0][0]
                                    + 2.0 * nrm[0] * nrm[1] * hh[0][1]
                                    + nrm[1] * nrm[1] * hh[1][1]
                            }
                        };
                        for i in 0..nen {
                            let ji = [dn(&pbl, i), -dn(&pbf, i)];
                            for j in 0..nen {
                                let jj = [dn(&pbl, j), -dn(&pbf, j)];
                                for si in 0..2 {
                                    for sj in 0..2 {
                                        for c in 0..ncomp {
                                            let di = if si == 0 {
                                                d1.get(i, c)
                                            } else {
                                                d2.get(i, c)
                                            };
                                            let dj = if sj == 0 {
                                                d1.get(j, c)
                                            } else {
                                                d2.get(j, c)
                                            };
                                            a[(di, dj)] += gamma * ji[si] * jj[sj] * pl.w;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(AssembledSystem {
        a,
        rhs,
        components: ncomp,
        n_enriched: state.enr.num_enriched(),
    })
}

fn cluster_subphase(state: &RankState, c: &Cluster) -> Result<usize> {
    state
        .topo
        .subphases
        .iter()
        .position(|s| s.bg_elem == c.bg_elem && s.local == c.u)
        .ok_or_else(|| {
            Error::invariant(format!(
                "cluster references unknown subphase ({}, {})",
                c.bg_elem, c.u
            ))
        })
}

/// Evaluate the discrete solution at a cluster quadrature point.
pub fn eval_solution(
    state: &RankState,
    cl: &Cluster,
    p: &QuadPoint,
    u: &DVector<f64>,
    ncomp: usize,
) -> Result<Vec<f64>> {
    let dofs = cluster_dofs(state, cl, ncomp)?;
    let pb = point_basis(state, cl.bg_elem, p.xi, 0)?;
    let mut out = vec![0.0; ncomp];
    for i in 0..dofs.len_slots() {
        for (c, val) in out.iter_mut().enumerate() {
            *val += pb.vals[i] * u[dofs.get(i, c)];
        }
    }
    Ok(out)
}

/// Evaluate the solution gradient (per component) at a cluster point.
pub fn eval_solution_grad(
    state: &RankState,
    cl: &Cluster,
    p: &QuadPoint,
    u: &DVector<f64>,
    ncomp: usize,
) -> Result<Vec<[f64; 2]>> {
    let dofs = cluster_dofs(state, cl, ncomp)?;
    let pb = point_basis(state, cl.bg_elem, p.xi, 1)?;
    let mut out = vec![[0.0; 2]; ncomp];
    for i in 0..dofs.len_slots() {
        for (c, val) in out.iter_mut().enumerate() {
            val[0] += pb.grads[i][0] * u[dofs.get(i, c)];
            val[1] += pb.grads[i][1] * u[dofs.get(i, c)];
        }
    }
    Ok(out)
}

/// Plane-stress stress vector [sxx, syy, txy] at a cluster point.
pub fn eval_stress(
    state: &RankState,
    cl: &Cluster,
    p: &QuadPoint,
    u: &DVector<f64>,
    mp: &MaterialParams,
) -> Result<[f64; 3]> {
    let g = eval_solution_grad(state, cl, p, u, 2)?;
    let eps = [g[0][0], g[1][1], g[0][1] + g[1][0]];
    Ok(stress(&d_matrix(mp), &eps))
}
