//! Interface-conforming foreground mesh generation.
//!
//! The foreground mesh starts as a copy of the background grid. Regular
//! subdivision replaces every element intersected by any geometry with
//! simplex cells; templated subdivision then cuts those simplices along
//! each geometry in turn, assigning materials by the recursive rule
//! `m <- 2m + (P > 0)`. New vertices are deduplicated through request
//! queues keyed by background entities (regular pass) or vertex pairs
//! (templated pass), never by coordinates.

mod ancestry;
mod queue;
mod templates;
#[cfg(test)]
mod tests;

pub use ancestry::find_common_ancestor;
pub use queue::RequestQueue;
pub use templates::{cell_param_measure, cut_simplex, simplex_signed_measure, RegularTemplate};

use crate::bg_mesh::{BackgroundMesh, CellType};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Proximity};
use std::collections::HashMap;

pub const UNSET_SUBPHASE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct FgVertex {
    pub x: [f64; 3],
    /// Lowest-rank background entity containing the vertex: (rank, index).
    /// Rank `dim` means the interior of background element `index`.
    pub ancestry: (u8, usize),
    /// Parallel consistent ID; 0 until communicated.
    pub id: u64,
}

#[derive(Debug, Clone)]
pub struct FgCell {
    /// Tri3/Tet4 for subdivided regions, Quad4/Hex8 for untouched elements.
    pub verts: Vec<usize>,
    pub bg_elem: usize,
    pub material: u32,
    pub subphase: usize,
    pub id: u64,
}

/// Foreground cells and vertices generated inside one background element,
/// with vertex coordinates in the element's reference space.
#[derive(Debug, Clone)]
pub struct ChildMesh {
    pub bg_elem: usize,
    pub verts: Vec<usize>,
    pub param: Vec<[f64; 3]>,
    pub cells: Vec<usize>,
    vert_pos: HashMap<usize, usize>,
}

impl ChildMesh {
    fn new(bg_elem: usize) -> Self {
        ChildMesh {
            bg_elem,
            verts: Vec::new(),
            param: Vec::new(),
            cells: Vec::new(),
            vert_pos: HashMap::new(),
        }
    }

    pub fn add_vertex(&mut self, v: usize, param: [f64; 3]) {
        debug_assert!(!self.vert_pos.contains_key(&v));
        self.vert_pos.insert(v, self.verts.len());
        self.verts.push(v);
        self.param.push(param);
    }

    pub fn add_vertex_if_not_found(&mut self, v: usize, param: [f64; 3]) {
        if !self.vert_pos.contains_key(&v) {
            self.add_vertex(v, param);
        }
    }

    pub fn param_of(&self, v: usize) -> Option<[f64; 3]> {
        self.vert_pos.get(&v).map(|&p| self.param[p])
    }

    /// Position of a cell in this child mesh (its parallel-stable local index).
    pub fn cell_local_index(&self, c: usize) -> Option<usize> {
        self.cells.iter().position(|&x| x == c)
    }
}

#[derive(Debug, Clone)]
pub struct ForegroundMesh {
    pub dim: usize,
    pub verts: Vec<FgVertex>,
    pub cells: Vec<FgCell>,
    pub child_meshes: Vec<ChildMesh>,
    /// Per background element: intersected by any geometry (regular pass).
    pub intersected: Vec<bool>,
}

struct QueuedVertex {
    x: [f64; 3],
    ancestry: (u8, usize),
    /// Canonical edge endpoints (coordinate-lexicographic order) and cut
    /// parameter, for reproducing parametric coordinates in any child mesh.
    edge: Option<(usize, usize, f64)>,
}

/// Majority sign of a set of proximities, ignoring zeros. Mixed strict
/// signs or an all-zero set violate the template contract.
pub fn vote(proxs: impl IntoIterator<Item = Proximity>) -> Result<Proximity> {
    let mut seen: Option<Proximity> = None;
    for p in proxs {
        if p.is_strict() {
            match seen {
                None => seen = Some(p),
                Some(s) if s == p => {}
                Some(_) => {
                    return Err(Error::invariant(
                        "vote over conflicting strict proximities".to_string(),
                    ))
                }
            }
        }
    }
    seen.ok_or_else(|| Error::invariant("vote over all-zero proximities".to_string()))
}

/// Recursive material assignment: one bit per applied geometry.
pub fn advance_material(m: u32, p: Proximity) -> u32 {
    2 * m + (p == Proximity::Pos) as u32
}

fn lex_less(a: &[f64; 3], b: &[f64; 3]) -> bool {
    for k in 0..3 {
        if a[k] < b[k] {
            return true;
        }
        if a[k] > b[k] {
            return false;
        }
    }
    false
}

fn lerp(a: &[f64; 3], b: &[f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

/// Canonical center of a background entity, computed from global grid
/// coordinates so that every rank produces bitwise identical values.
fn entity_center(bg: &BackgroundMesh, rank: u8, a: usize, elem: usize) -> [f64; 3] {
    let dim = bg.dim();
    let spec = &bg.spec;
    if rank as usize == dim {
        return spec.elem_center(bg.elements[elem].global);
    }
    let verts = &bg.entity_conn(rank as usize).entity_verts[a];
    let mut gmin = [usize::MAX; 3];
    let mut gmax = [0usize; 3];
    for &v in verts {
        let g = bg.vert_global(v);
        for k in 0..dim {
            gmin[k] = gmin[k].min(g[k]);
            gmax[k] = gmax[k].max(g[k]);
        }
    }
    let mut x = [0.0; 3];
    for k in 0..dim {
        x[k] = spec.origin[k] + (gmin[k] as f64 + 0.5 * (gmax[k] - gmin[k]) as f64) * spec.h[k];
    }
    x
}

impl ForegroundMesh {
    /// Copy the background grid: one vertex per grid point, one box cell
    /// per element, trivial ancestry.
    pub fn initialize(bg: &BackgroundMesh) -> Self {
        let dim = bg.dim();
        let verts = (0..bg.num_verts())
            .map(|v| FgVertex {
                x: bg.vert_coord(v),
                ancestry: (0, v),
                id: 0,
            })
            .collect();
        let mut cells = Vec::with_capacity(bg.num_elems());
        let mut child_meshes = Vec::with_capacity(bg.num_elems());
        for (e, el) in bg.elements.iter().enumerate() {
            cells.push(FgCell {
                verts: el.verts.clone(),
                bg_elem: e,
                material: 0,
                subphase: UNSET_SUBPHASE,
                id: 0,
            });
            let mut cm = ChildMesh::new(e);
            let ty = CellType::from_dim_and_len(dim, el.verts.len());
            for (o, &v) in el.verts.iter().enumerate() {
                cm.add_vertex(v, box_ref_coord(ty, o));
            }
            cm.cells.push(e);
            child_meshes.push(cm);
        }
        ForegroundMesh {
            dim,
            verts,
            cells,
            child_meshes,
            intersected: vec![false; bg.num_elems()],
        }
    }

    pub fn num_verts(&self) -> usize {
        self.verts.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_type(&self, c: usize) -> CellType {
        CellType::from_dim_and_len(self.dim, self.cells[c].verts.len())
    }

    /// Parametric coordinates of cell `c`'s vertices in its child mesh.
    pub fn cell_param_coords(&self, c: usize) -> Vec<[f64; 3]> {
        let cm = &self.child_meshes[self.cells[c].bg_elem];
        self.cells[c]
            .verts
            .iter()
            .map(|&v| cm.param_of(v).expect("cell vertex missing from child mesh"))
            .collect()
    }

    /// Sum of parametric cell measures of one child mesh.
    pub fn child_mesh_param_volume(&self, e: usize) -> f64 {
        self.child_meshes[e]
            .cells
            .iter()
            .map(|&c| {
                cell_param_measure(self.dim, self.cell_type(c), &self.cell_param_coords(c))
            })
            .sum()
    }

    /// Replace every intersected background element by the regular
    /// subdivision template. New vertices are unique per background
    /// entity; the first template child overwrites the parent cell.
    pub fn regular_subdivision(
        &mut self,
        bg: &BackgroundMesh,
        geometries: &[Geometry],
    ) -> Result<()> {
        let dim = self.dim;
        let template = RegularTemplate::for_dim(dim);
        let mut flagged = vec![false; bg.num_elems()];
        for e in 0..bg.num_elems() {
            let (lo, hi) = bg.elem_bbox(e);
            for g in geometries {
                if g.is_box_intersected(&lo, &hi, dim)? {
                    flagged[e] = true;
                    break;
                }
            }
        }
        self.intersected = flagged;

        let mut vq: RequestQueue<(u8, usize), QueuedVertex> =
            RequestQueue::new(self.verts.len());
        let mut pending: Vec<FgCell> = Vec::new();
        let cell_base = self.cells.len();

        for e in 0..bg.num_elems() {
            if !self.intersected[e] {
                continue;
            }
            let mut nvi = Vec::with_capacity(template.new_verts.len());
            for tv in &template.new_verts {
                let entity = if tv.rank as usize == dim {
                    e
                } else {
                    bg.get_entities_on_element(e, tv.rank as usize)?[tv.ordinal]
                };
                let idx = vq.get_or_queue((tv.rank, entity), || QueuedVertex {
                    x: entity_center(bg, tv.rank, entity, e),
                    ancestry: (tv.rank, entity),
                    edge: None,
                });
                self.child_meshes[e].add_vertex_if_not_found(idx, tv.xi);
                nvi.push(idx);
            }
            let existing = self.cells[e].verts.clone();
            let children = template.generate_cells(&existing, &nvi);
            for (i, ch) in children.into_iter().enumerate() {
                if i == 0 {
                    self.cells[e].verts = ch;
                } else {
                    let idx = cell_base + pending.len();
                    pending.push(FgCell {
                        verts: ch,
                        bg_elem: e,
                        material: 0,
                        subphase: UNSET_SUBPHASE,
                        id: 0,
                    });
                    self.child_meshes[e].cells.push(idx);
                }
            }
        }
        self.flush(vq, pending);
        Ok(())
    }

    /// Cut the simplices of intersected elements along one geometry and
    /// update every cell's material by the recursive rule. The last
    /// template child overwrites the subdivided cell.
    pub fn templated_subdivision(&mut self, bg: &BackgroundMesh, g: &Geometry) -> Result<()> {
        let dim = self.dim;
        let np = self.verts.len();
        let mut prox = Vec::with_capacity(np);
        for v in &self.verts {
            prox.push(g.compute_proximity(&v.x)?);
        }

        let mut vq: RequestQueue<(usize, usize), QueuedVertex> = RequestQueue::new(np);
        let mut pending: Vec<FgCell> = Vec::new();
        let cell_base = self.cells.len();

        for e in 0..bg.num_elems() {
            let (lo, hi) = bg.elem_bbox(e);
            if !g.is_box_intersected(&lo, &hi, dim)? {
                // Uncut element: all cells move to the same side.
                let p = vote(self.child_meshes[e].verts.iter().map(|&v| prox[v]))
                    .map_err(|err| {
                        Error::invariant(format!("uncut element {e}: {err}"))
                    })?;
                for &c in &self.child_meshes[e].cells {
                    self.cells[c].material = advance_material(self.cells[c].material, p);
                }
                continue;
            }

            let snapshot = self.child_meshes[e].cells.clone();
            for c in snapshot {
                let cverts = self.cells[c].verts.clone();
                let ty = CellType::from_dim_and_len(dim, cverts.len());
                if !ty.is_simplex() {
                    return Err(Error::invariant(format!(
                        "intersected element {e} holds an unsubdivided cell {c}"
                    )));
                }
                let edges = ty.edges();
                let mut v_new: Vec<Option<usize>> = vec![None; edges.len()];
                let mut any_cut = false;
                for (eo, &[la, lb]) in edges.iter().enumerate() {
                    let (va, vb) = (cverts[la], cverts[lb]);
                    let (pa, pb) = (prox[va], prox[vb]);
                    let cut = matches!(
                        (pa, pb),
                        (Proximity::Pos, Proximity::Neg) | (Proximity::Neg, Proximity::Pos)
                    );
                    if !cut {
                        continue;
                    }
                    any_cut = true;
                    let key = (va.min(vb), va.max(vb));
                    let idx = match vq.get(&key) {
                        Some(idx) => idx,
                        None => {
                            let (vlo, vhi) =
                                if lex_less(&self.verts[va].x, &self.verts[vb].x) {
                                    (va, vb)
                                } else {
                                    (vb, va)
                                };
                            let t =
                                g.find_interface(&self.verts[vlo].x, &self.verts[vhi].x)?;
                            let x = lerp(&self.verts[vlo].x, &self.verts[vhi].x, t);
                            let anc = find_common_ancestor(
                                bg,
                                e,
                                self.verts[va].ancestry,
                                self.verts[vb].ancestry,
                            );
                            vq.queue(
                                key,
                                QueuedVertex {
                                    x,
                                    ancestry: anc,
                                    edge: Some((vlo, vhi, t)),
                                },
                            )
                        }
                    };
                    let (vlo, vhi, t) = vq.peek(idx).unwrap().edge.unwrap();
                    let cm = &mut self.child_meshes[e];
                    let plo = cm.param_of(vlo).expect("edge endpoint in child mesh");
                    let phi = cm.param_of(vhi).expect("edge endpoint in child mesh");
                    cm.add_vertex_if_not_found(idx, lerp(&plo, &phi, t));
                    v_new[eo] = Some(idx);
                }

                let m0 = self.cells[c].material;
                if !any_cut {
                    let p = vote(cverts.iter().map(|&v| prox[v])).map_err(|err| {
                        Error::invariant(format!("cell {c} in element {e}: {err}"))
                    })?;
                    self.cells[c].material = advance_material(m0, p);
                    continue;
                }

                let sign = |v: usize| -> i8 {
                    if v >= np {
                        0
                    } else {
                        match prox[v] {
                            Proximity::Pos => 1,
                            Proximity::Zero => 0,
                            Proximity::Neg => -1,
                        }
                    }
                };
                let coord = |v: usize| -> [f64; 3] {
                    if v < np {
                        self.verts[v].x
                    } else {
                        vq.peek(v).expect("queued vertex").x
                    }
                };
                let children = cut_simplex(dim, &cverts, &sign, &v_new, &coord)
                    .map_err(|err| {
                        Error::invariant(format!("cell {c} in element {e}: {err}"))
                    })?;
                debug_assert!(children.len() >= 2);
                let last = children.len() - 1;
                for (i, ch) in children.into_iter().enumerate() {
                    let p = vote(ch.iter().filter(|&&v| v < np).map(|&v| prox[v]))
                        .map_err(|err| {
                            Error::invariant(format!("child of cell {c} in element {e}: {err}"))
                        })?;
                    let m = advance_material(m0, p);
                    if i == last {
                        self.cells[c].verts = ch;
                        self.cells[c].material = m;
                    } else {
                        let idx = cell_base + pending.len();
                        pending.push(FgCell {
                            verts: ch,
                            bg_elem: e,
                            material: m,
                            subphase: UNSET_SUBPHASE,
                            id: 0,
                        });
                        self.child_meshes[e].cells.push(idx);
                    }
                }
            }
        }
        self.flush(vq, pending);
        Ok(())
    }

    fn flush<K: Eq + std::hash::Hash + Clone>(
        &mut self,
        vq: RequestQueue<K, QueuedVertex>,
        cells: Vec<FgCell>,
    ) {
        self.verts.extend(vq.into_items().into_iter().map(|q| FgVertex {
            x: q.x,
            ancestry: q.ancestry,
            id: 0,
        }));
        self.cells.extend(cells);
    }

    /// Apply the user material map to every cell.
    pub fn apply_material_map(&mut self, map: &crate::geometry::MaterialMap) -> Result<()> {
        for c in &mut self.cells {
            c.material = map.apply(c.material)?;
        }
        Ok(())
    }

    /// Every cell must have positive parametric measure.
    pub fn check_orientation(&self) -> Result<()> {
        for c in 0..self.num_cells() {
            let m = cell_param_measure(self.dim, self.cell_type(c), &self.cell_param_coords(c));
            if m <= 0.0 {
                return Err(Error::invariant(format!(
                    "cell {c} has non-positive parametric measure {m}"
                )));
            }
        }
        Ok(())
    }
}

fn box_ref_coord(ty: CellType, ordinal: usize) -> [f64; 3] {
    match ty {
        CellType::Quad4 => {
            const Q: [[f64; 3]; 4] = [
                [-1.0, -1.0, 0.0],
                [1.0, -1.0, 0.0],
                [1.0, 1.0, 0.0],
                [-1.0, 1.0, 0.0],
            ];
            Q[ordinal]
        }
        CellType::Hex8 => {
            const H: [[f64; 3]; 8] = [
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [1.0, 1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
                [1.0, -1.0, 1.0],
                [1.0, 1.0, 1.0],
                [-1.0, 1.0, 1.0],
            ];
            H[ordinal]
        }
        _ => panic!("reference coordinates only defined for box cells"),
    }
}
