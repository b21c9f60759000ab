//! Integration clusters: unzipped background elements paired with custom
//! quadrature rules.
//!
//! Bulk clusters carry one rule per subphase, mapped from simplex Gauss
//! rules on the foreground cells into the background element's reference
//! space; their weights are parametric measure (multiply by the element
//! Jacobian to integrate physically). Side, interface, and ghost points
//! carry physical surface measure and a unit normal in physical space.
//! Interface and ghost clusters come in mirrored pairs: the q-th points
//! of leader and follower coincide physically and the normals are
//! opposite, so jump terms need no extra bookkeeping.

use crate::bg_mesh::BackgroundMesh;
use crate::error::{Error, Result};
use crate::quadrature::{box_rule, gauss_legendre, ref_simplex_measure, simplex_rule, Rule};
use crate::tessellation::{simplex_signed_measure, ForegroundMesh};
use crate::topology::Topology;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct QuadPoint {
    /// Coordinates in the background element's reference space.
    pub xi: [f64; 3],
    pub w: f64,
    /// Unit normal in physical space (side/interface/ghost points only).
    pub n: Option<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub bg_elem: usize,
    /// Subphase copy index `u` of the unzipped element.
    pub u: usize,
    pub points: Vec<QuadPoint>,
    /// Source foreground facets (side clusters).
    pub facets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ClusterPair {
    pub leader: Cluster,
    pub follower: Cluster,
    /// Ghost pairs record the background facet they integrate over.
    pub bg_facet: Option<usize>,
}

/// Quadrature orders; defaults are exact for degree-2p mass-matrix-like
/// integrands, with p+1 tensor Gauss points per direction on ghost facets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub bulk_order: usize,
    pub facet_order: usize,
    pub ghost_points: usize,
}

impl QuadratureSpec {
    pub fn for_degree(p: usize) -> Self {
        QuadratureSpec {
            bulk_order: 2 * p,
            facet_order: 2 * p,
            ghost_points: p + 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClusterSet {
    /// material -> bulk clusters
    pub bulk: BTreeMap<u32, Vec<Cluster>>,
    /// raveled material pair key -> single-sided clusters
    pub side: BTreeMap<u32, Vec<Cluster>>,
    /// raveled material pair key -> mirrored pairs (non-void pairs only)
    pub interface: BTreeMap<u32, Vec<ClusterPair>>,
    /// shared material -> ghost pairs
    pub ghost: BTreeMap<u32, Vec<ClusterPair>>,
    /// (material, domain side 0..2dim) -> ambient boundary clusters
    pub boundary: BTreeMap<(u32, usize), Vec<Cluster>>,
    pub num_materials: u32,
}

/// Ravel a material pair into the bucket key `m_i * n_m + m_j + 1`.
pub fn ravel_pair(m_i: u32, m_j: u32, n_m: u32) -> u32 {
    m_i * n_m + m_j + 1
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn scale3(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Map a reference-simplex rule through the affine map defined by a
/// cell's parametric vertex coordinates. Weights scale with the cell's
/// parametric measure over the reference measure.
pub fn map_param_gauss_points(
    dim: usize,
    cell_param: &[[f64; 3]],
    rule: &Rule,
) -> Vec<QuadPoint> {
    let v0 = cell_param[0];
    let factor = simplex_signed_measure(dim, cell_param) / ref_simplex_measure(dim);
    debug_assert!(factor > 0.0);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            let mut xi = v0;
            for k in 0..dim {
                for (j, cp) in cell_param.iter().enumerate().skip(1) {
                    xi[k] += p[j - 1] * (cp[k] - v0[k]);
                }
            }
            QuadPoint {
                xi,
                w: w * factor,
                n: None,
            }
        })
        .collect()
}

fn box_points(dim: usize, order: usize) -> Vec<QuadPoint> {
    let n = order / 2 + 1;
    let r = box_rule(dim, n);
    r.points
        .iter()
        .zip(&r.weights)
        .map(|(p, w)| QuadPoint {
            xi: *p,
            w: *w,
            n: None,
        })
        .collect()
}

/// One bulk cluster per owned subphase, grouped by material.
pub fn create_bulk_clusters(
    bg: &BackgroundMesh,
    fg: &ForegroundMesh,
    topo: &Topology,
    quad: &QuadratureSpec,
) -> Result<BTreeMap<u32, Vec<Cluster>>> {
    let dim = fg.dim;
    let srule = simplex_rule(dim, quad.bulk_order);
    let mut out: BTreeMap<u32, Vec<Cluster>> = BTreeMap::new();
    for sp in &topo.subphases {
        if !bg.is_owned(sp.bg_elem) {
            continue;
        }
        let mut points = Vec::new();
        for &c in &sp.cells {
            let ty = fg.cell_type(c);
            if ty.is_simplex() {
                let coords = fg.cell_param_coords(c);
                points.extend(map_param_gauss_points(dim, &coords, &srule));
            } else {
                // Untouched element: the cell spans the full box.
                points.extend(box_points(dim, quad.bulk_order));
            }
        }
        if points.iter().any(|p| p.w <= 0.0) {
            return Err(Error::invariant(format!(
                "degenerate cell in subphase of element {}",
                sp.bg_elem
            )));
        }
        out.entry(sp.material).or_default().push(Cluster {
            bg_elem: sp.bg_elem,
            u: sp.local,
            points,
            facets: Vec::new(),
        });
    }
    Ok(out)
}

/// Quadrature on one foreground facet as seen from `cell`: points in the
/// cell's element reference space, physical-measure weights, outward
/// physical unit normal.
fn facet_quadrature(
    fg: &ForegroundMesh,
    topo: &Topology,
    facet: usize,
    cell: usize,
    order: usize,
) -> Result<(Vec<QuadPoint>, [f64; 3])> {
    let dim = fg.dim;
    let e = fg.cells[cell].bg_elem;
    let cm = &fg.child_meshes[e];
    let ty = fg.cell_type(cell);
    let ordinal = topo.facets.cte[cell]
        .iter()
        .position(|&f| f == facet)
        .ok_or_else(|| Error::invariant(format!("facet {facet} not on cell {cell}")))?;
    let fverts: Vec<usize> = ty
        .facet_verts(ordinal)
        .iter()
        .map(|&l| fg.cells[cell].verts[l])
        .collect();
    let param: Vec<[f64; 3]> = fverts
        .iter()
        .map(|&v| {
            cm.param_of(v)
                .ok_or_else(|| Error::invariant(format!("vertex {v} missing from child mesh")))
        })
        .collect::<Result<_>>()?;
    let phys: Vec<[f64; 3]> = fverts.iter().map(|&v| fg.verts[v].x).collect();

    let mut points = Vec::new();
    let normal;
    if dim == 2 {
        // Oriented edge (a,b): outward normal is the CCW boundary rotated.
        let d = sub3(&phys[1], &phys[0]);
        let len = norm3(&d);
        normal = scale3(&[d[1], -d[0], 0.0], 1.0 / len);
        let n = order / 2 + 1;
        for (t, w) in gauss_legendre(n) {
            let s = 0.5 * (t + 1.0);
            let xi = [
                param[0][0] + s * (param[1][0] - param[0][0]),
                param[0][1] + s * (param[1][1] - param[0][1]),
                0.0,
            ];
            points.push(QuadPoint {
                xi,
                w: w * 0.5 * len,
                n: Some(normal),
            });
        }
    } else if fverts.len() == 3 {
        let c = cross3(&sub3(&phys[1], &phys[0]), &sub3(&phys[2], &phys[0]));
        let area = 0.5 * norm3(&c);
        normal = scale3(&c, 0.5 / area);
        let rule = simplex_rule(2, order);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mut xi = param[0];
            for k in 0..3 {
                xi[k] += p[0] * (param[1][k] - param[0][k]) + p[1] * (param[2][k] - param[0][k]);
            }
            points.push(QuadPoint {
                xi,
                w: w / 0.5 * area,
                n: Some(normal),
            });
        }
    } else {
        // Quad facet of an untouched hex (axis-aligned rectangle).
        let c = cross3(&sub3(&phys[1], &phys[0]), &sub3(&phys[3], &phys[0]));
        let area = norm3(&c);
        normal = scale3(&c, 1.0 / area);
        let n = order / 2 + 1;
        let r = box_rule(2, n);
        for (p, w) in r.points.iter().zip(&r.weights) {
            let (a, b) = (0.5 * (p[0] + 1.0), 0.5 * (p[1] + 1.0));
            let mut xi = [0.0; 3];
            for k in 0..3 {
                // Bilinear interpolation over the rectangle corners.
                xi[k] = (1.0 - a) * (1.0 - b) * param[0][k]
                    + a * (1.0 - b) * param[1][k]
                    + a * b * param[2][k]
                    + (1.0 - a) * b * param[3][k];
            }
            points.push(QuadPoint {
                xi,
                w: w / 4.0 * area,
                n: Some(normal),
            });
        }
    }
    Ok((points, normal))
}

/// Express leader-side points in the follower element's reference space,
/// flipping the normal.
fn mirror_points(
    bg: &BackgroundMesh,
    leader_elem: usize,
    follower_elem: usize,
    points: &[QuadPoint],
) -> Vec<QuadPoint> {
    points
        .iter()
        .map(|p| {
            let x = bg.interpolate_space(leader_elem, p.xi);
            let xi = bg.physical_to_param(follower_elem, x);
            QuadPoint {
                xi,
                w: p.w,
                n: p.n.map(|n| scale3(&n, -1.0)),
            }
        })
        .collect()
}

/// Side clusters and mirrored interface pairs from the `g_i` graph, plus
/// ambient-boundary side clusters from the boundary descendants.
#[allow(clippy::type_complexity)]
pub fn create_side_clusters(
    bg: &BackgroundMesh,
    fg: &ForegroundMesh,
    topo: &Topology,
    quad: &QuadratureSpec,
    void: &BTreeSet<u32>,
    n_m: u32,
) -> Result<(
    BTreeMap<u32, Vec<Cluster>>,
    BTreeMap<u32, Vec<ClusterPair>>,
    BTreeMap<(u32, usize), Vec<Cluster>>,
)> {
    let mut side: BTreeMap<u32, Vec<Cluster>> = BTreeMap::new();
    let mut interface: BTreeMap<u32, Vec<ClusterPair>> = BTreeMap::new();

    for s1 in 0..topo.subphases.len() {
        for &s2 in &topo.g_i[s1] {
            // Each undirected pair once, built by the rank owning the
            // higher-ID side.
            if topo.subphases[s1].id <= topo.subphases[s2].id {
                continue;
            }
            if !bg.is_owned(topo.subphases[s1].bg_elem) {
                continue;
            }
            let conn = topo.connecting_facets(fg, s1, s2);
            if conn.is_empty() {
                return Err(Error::invariant(format!(
                    "g_i pair ({s1},{s2}) has no connecting facets"
                )));
            }
            let (e1, e2) = (topo.subphases[s1].bg_elem, topo.subphases[s2].bg_elem);
            let mut lpoints = Vec::new();
            let mut facets = Vec::new();
            for &(f, c1, _c2) in &conn {
                let (pts, _) = facet_quadrature(fg, topo, f, c1, quad.facet_order)?;
                lpoints.extend(pts);
                facets.push(f);
            }
            let fpoints = mirror_points(bg, e1, e2, &lpoints);
            let leader = Cluster {
                bg_elem: e1,
                u: topo.subphases[s1].local,
                points: lpoints,
                facets: facets.clone(),
            };
            let follower = Cluster {
                bg_elem: e2,
                u: topo.subphases[s2].local,
                points: fpoints,
                facets,
            };
            let (m1, m2) = (topo.subphases[s1].material, topo.subphases[s2].material);
            let k1 = ravel_pair(m1, m2, n_m);
            let k2 = ravel_pair(m2, m1, n_m);
            side.entry(k1).or_default().push(leader.clone());
            side.entry(k2).or_default().push(follower.clone());
            if !void.contains(&m1) && !void.contains(&m2) {
                interface.entry(k1).or_default().push(ClusterPair {
                    leader: leader.clone(),
                    follower: follower.clone(),
                    bg_facet: None,
                });
                interface.entry(k2).or_default().push(ClusterPair {
                    leader: follower,
                    follower: leader,
                    bg_facet: None,
                });
            }
        }
    }

    // Ambient boundary: group descendant facets by (subphase, bg facet).
    let mut boundary: BTreeMap<(u32, usize), Vec<Cluster>> = BTreeMap::new();
    let bg_facets = bg.entity_conn(fg.dim - 1);
    for (bf, dlist) in topo.boundary_descendants.iter().enumerate() {
        if dlist.is_empty() {
            continue;
        }
        let e = bg_facets.etc[bf][0];
        if !bg.is_owned(e) {
            continue;
        }
        let side_index = domain_side(bg, bf)?;
        let mut by_subphase: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for &ff in dlist {
            let c = topo.facets.etc[ff][0];
            by_subphase
                .entry(fg.cells[c].subphase)
                .or_default()
                .push((ff, c));
        }
        for (s, items) in by_subphase {
            let mut points = Vec::new();
            let mut facets = Vec::new();
            for (f, c) in items {
                let (pts, _) = facet_quadrature(fg, topo, f, c, quad.facet_order)?;
                points.extend(pts);
                facets.push(f);
            }
            let sp = &topo.subphases[s];
            boundary
                .entry((sp.material, side_index))
                .or_default()
                .push(Cluster {
                    bg_elem: sp.bg_elem,
                    u: sp.local,
                    points,
                    facets,
                });
        }
    }
    Ok((side, interface, boundary))
}

/// Domain side index of an exterior background facet: `2k` at the low
/// end of axis `k`, `2k + 1` at the high end.
fn domain_side(bg: &BackgroundMesh, bf: usize) -> Result<usize> {
    let dim = bg.dim();
    let conn = bg.entity_conn(dim - 1);
    let verts = &conn.entity_verts[bf];
    let coords: Vec<[usize; 3]> = verts.iter().map(|&v| bg.vert_global(v)).collect();
    for k in 0..dim {
        let c0 = coords[0][k];
        if coords.iter().all(|c| c[k] == c0) {
            if c0 == 0 {
                return Ok(2 * k);
            }
            if c0 == bg.spec.elems[k] {
                return Ok(2 * k + 1);
            }
        }
    }
    Err(Error::invariant(format!(
        "facet {bf} is not on the domain boundary"
    )))
}

/// Ghost side-cluster pairs: one per `g_s` edge whose elements contain at
/// least one cut side, with tensor Gauss points on the whole background
/// facet, mirrored across it.
pub fn generate_ghost_clusters(
    bg: &BackgroundMesh,
    fg: &ForegroundMesh,
    topo: &Topology,
    quad: &QuadratureSpec,
) -> Result<BTreeMap<u32, Vec<ClusterPair>>> {
    let dim = fg.dim;
    let bg_facets = bg.entity_conn(dim - 1);
    let g = gauss_legendre(quad.ghost_points);
    let mut out: BTreeMap<u32, Vec<ClusterPair>> = BTreeMap::new();

    for s1 in 0..topo.subphases.len() {
        for &s2 in &topo.g_s[s1] {
            let (e1, e2) = (topo.subphases[s1].bg_elem, topo.subphases[s2].bg_elem);
            // Cut guard and once-only/ownership guards.
            if !(topo.n_u[e1] > 1 || topo.n_u[e2] > 1) {
                continue;
            }
            if topo.subphases[s1].id <= topo.subphases[s2].id {
                continue;
            }
            if !bg.is_owned(e1) {
                continue;
            }
            let shared: Vec<usize> = bg_facets.cte[e1]
                .iter()
                .filter(|f| bg_facets.cte[e2].contains(f))
                .copied()
                .collect();
            if shared.len() != 1 {
                return Err(Error::invariant(format!(
                    "ghost pair ({s1},{s2}): elements {e1},{e2} share {} facets",
                    shared.len()
                )));
            }
            let bf = shared[0];
            let (g1, g2) = (bg.elements[e1].global, bg.elements[e2].global);
            let axis = (0..dim)
                .find(|&k| g1[k] != g2[k])
                .ok_or_else(|| Error::invariant("ghost elements coincide".to_string()))?;
            let sign = if g2[axis] > g1[axis] { 1.0 } else { -1.0 };
            let mut normal = [0.0; 3];
            normal[axis] = sign;

            // Physical facet measure factor per tangent direction.
            let mut lpoints = Vec::new();
            let tangents: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
            let mut idx = vec![0usize; tangents.len()];
            loop {
                let mut xi = [0.0; 3];
                xi[axis] = sign;
                let mut w = 1.0;
                for (t, &k) in tangents.iter().enumerate() {
                    xi[k] = g[idx[t]].0;
                    w *= g[idx[t]].1 * 0.5 * bg.spec.h[k];
                }
                lpoints.push(QuadPoint {
                    xi,
                    w,
                    n: Some(normal),
                });
                // Advance the tensor index.
                let mut t = 0;
                loop {
                    if t == tangents.len() {
                        break;
                    }
                    idx[t] += 1;
                    if idx[t] < g.len() {
                        break;
                    }
                    idx[t] = 0;
                    t += 1;
                }
                if t == tangents.len() {
                    break;
                }
            }
            let fpoints = mirror_points(bg, e1, e2, &lpoints);
            let m = topo.subphases[s1].material;
            debug_assert_eq!(m, topo.subphases[s2].material);
            out.entry(m).or_default().push(ClusterPair {
                leader: Cluster {
                    bg_elem: e1,
                    u: topo.subphases[s1].local,
                    points: lpoints,
                    facets: Vec::new(),
                },
                follower: Cluster {
                    bg_elem: e2,
                    u: topo.subphases[s2].local,
                    points: fpoints,
                    facets: Vec::new(),
                },
                bg_facet: Some(bf),
            });
        }
    }
    Ok(out)
}

impl ClusterSet {
    pub fn generate(
        bg: &BackgroundMesh,
        fg: &ForegroundMesh,
        topo: &Topology,
        quad: &QuadratureSpec,
        void: &BTreeSet<u32>,
        n_m: u32,
    ) -> Result<ClusterSet> {
        let bulk = create_bulk_clusters(bg, fg, topo, quad)?;
        let (side, interface, boundary) = create_side_clusters(bg, fg, topo, quad, void, n_m)?;
        let ghost = generate_ghost_clusters(bg, fg, topo, quad)?;
        Ok(ClusterSet {
            bulk,
            side,
            interface,
            ghost,
            boundary,
            num_materials: n_m,
        })
    }

    /// Max physical mismatch between paired points, for the pairing
    /// invariant (must stay below 1e-12 times the element size).
    pub fn max_pairing_error(&self, bg: &BackgroundMesh) -> f64 {
        let mut worst: f64 = 0.0;
        for pairs in self.interface.values().chain(self.ghost.values()) {
            for p in pairs {
                assert_eq!(p.leader.points.len(), p.follower.points.len());
                for (a, b) in p.leader.points.iter().zip(&p.follower.points) {
                    let xa = bg.interpolate_space(p.leader.bg_elem, a.xi);
                    let xb = bg.interpolate_space(p.follower.bg_elem, b.xi);
                    worst = worst.max(norm3(&sub3(&xa, &xb)));
                    // Normals must be antiparallel.
                    let (na, nb) = (a.n.unwrap(), b.n.unwrap());
                    let s = [na[0] + nb[0], na[1] + nb[1], na[2] + nb[2]];
                    worst = worst.max(norm3(&s) * bg.spec.h[0]);
                }
            }
        }
        worst
    }

    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        m.insert("bulk", self.bulk.values().map(Vec::len).sum());
        m.insert("side", self.side.values().map(Vec::len).sum());
        m.insert("interface", self.interface.values().map(Vec::len).sum());
        m.insert("ghost", self.ghost.values().map(Vec::len).sum());
        m.insert("boundary", self.boundary.values().map(Vec::len).sum());
        m
    }
}
