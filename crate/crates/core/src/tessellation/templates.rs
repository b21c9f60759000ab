//! Subdivision templates.
//!
//! Regular subdivision replaces a Quad4 by 4 Tri3 (center vertex) or a
//! Hex8 by 24 Tet4 (6 face centers + body center). These templates never
//! split background edges and are symmetric about every axis.
//!
//! Templated subdivision cuts a simplex cell along a geometry interface.
//! The cut is built combinatorially from the vertex proximities: each
//! facet of the cell is split by a boundary walk, the interface polygon
//! is chained from the facet cut segments, and each side is then
//! tetrahedralized by a fan from its lexicographically smallest vertex.
//! Quad faces are always split by the diagonal through their smallest
//! vertex, which makes the triangulation agree between neighboring cells
//! and across ranks (vertex coordinates are bitwise identical there).

use crate::bg_mesh::entity::CellType;
use crate::error::{Error, Result};

/// New-vertex description of a regular subdivision template:
/// reference coordinates plus the (rank, ordinal) of the background
/// entity the vertex sits on.
pub struct RegularVertex {
    pub xi: [f64; 3],
    pub rank: u8,
    pub ordinal: usize,
}

pub struct RegularTemplate {
    pub new_verts: Vec<RegularVertex>,
    dim: usize,
}

impl RegularTemplate {
    pub fn for_dim(dim: usize) -> Self {
        let mut new_verts = Vec::new();
        if dim == 2 {
            new_verts.push(RegularVertex {
                xi: [0.0, 0.0, 0.0],
                rank: 2,
                ordinal: 0,
            });
        } else {
            // Face centers in face-ordinal order (z- z+ y- x+ y+ x-),
            // then the body center.
            let normals = [
                [0.0, 0.0, -1.0],
                [0.0, 0.0, 1.0],
                [0.0, -1.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [-1.0, 0.0, 0.0],
            ];
            for (o, n) in normals.iter().enumerate() {
                new_verts.push(RegularVertex {
                    xi: *n,
                    rank: 2,
                    ordinal: o,
                });
            }
            new_verts.push(RegularVertex {
                xi: [0.0, 0.0, 0.0],
                rank: 3,
                ordinal: 0,
            });
        }
        RegularTemplate { new_verts, dim }
    }

    /// Cell-vertex connectivity of the child simplices, expressed with
    /// global indices. `existing` are the box cell's vertices in local
    /// order, `new` the created vertices in template order.
    pub fn generate_cells(&self, existing: &[usize], new: &[usize]) -> Vec<Vec<usize>> {
        if self.dim == 2 {
            let c = new[0];
            CellType::Quad4
                .edges()
                .iter()
                .map(|&[a, b]| vec![existing[a], existing[b], c])
                .collect()
        } else {
            let bc = new[6];
            let mut cells = Vec::with_capacity(24);
            for (fo, _) in self.new_verts[..6].iter().enumerate() {
                let fc = new[fo];
                let fv = CellType::Hex8.facet_verts(fo);
                for i in 0..4 {
                    // Outward face cycle + interior apexes: swap the first
                    // two vertices for positive orientation.
                    let a = existing[fv[i]];
                    let b = existing[fv[(i + 1) % 4]];
                    cells.push(vec![b, a, fc, bc]);
                }
            }
            cells
        }
    }
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

/// Index of the lexicographically smallest coordinate among `verts`.
fn lex_min_vertex(verts: &[usize], coord_of: &impl Fn(usize) -> [f64; 3]) -> usize {
    let mut best = verts[0];
    for &v in &verts[1..] {
        if lex_less(&coord_of(v), &coord_of(best)) {
            best = v;
        }
    }
    best
}

/// Triangulate a convex polygon face (3 or 4 vertices) preserving its
/// orientation; quads split by the diagonal through their smallest vertex.
fn triangulate_face(
    poly: &[usize],
    coord_of: &impl Fn(usize) -> [f64; 3],
    out: &mut Vec<[usize; 3]>,
) {
    match poly.len() {
        3 => out.push([poly[0], poly[1], poly[2]]),
        4 => {
            let m = lex_min_vertex(poly, coord_of);
            let s = poly.iter().position(|&v| v == m).unwrap();
            let at = |i: usize| poly[(s + i) % 4];
            out.push([at(0), at(1), at(2)]);
            out.push([at(0), at(2), at(3)]);
        }
        n => unreachable!("face with {n} vertices"),
    }
}

/// Split walk of one outward-oriented triangle facet. Returns the
/// plus-side and minus-side sub-polygons (orientation inherited) and, per
/// side, the directed polygon edge lying on the interface, if any.
#[allow(clippy::type_complexity)]
fn clip_facet(
    fverts: [usize; 3],
    sign: &impl Fn(usize) -> i8,
    cut: &impl Fn(usize, usize) -> Option<usize>,
) -> Result<([Vec<usize>; 2], [Option<(usize, usize)>; 2])> {
    let mut polys = [Vec::new(), Vec::new()];
    for i in 0..3 {
        let v = fverts[i];
        let w = fverts[(i + 1) % 3];
        let (sv, sw) = (sign(v), sign(w));
        if sv >= 0 {
            polys[0].push(v);
        }
        if sv <= 0 {
            polys[1].push(v);
        }
        if sv * sw == -1 {
            let q = cut(v, w).ok_or_else(|| {
                Error::invariant(format!(
                    "intersected edge ({v},{w}) has no cut vertex: unsupported pattern"
                ))
            })?;
            polys[0].push(q);
            polys[1].push(q);
        }
    }
    let mut segs = [None, None];
    for (side, poly) in polys.iter().enumerate() {
        if poly.len() < 3 {
            continue;
        }
        let mut found = None;
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            if sign(a) == 0 && sign(b) == 0 {
                if found.is_some() {
                    return Err(Error::invariant(
                        "facet with more than one interface edge",
                    ));
                }
                found = Some((a, b));
            }
        }
        segs[side] = found;
    }
    Ok((polys, segs))
}

/// Chain directed segments into a single closed cycle.
fn chain_cycle(segs: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut next = std::collections::HashMap::new();
    for &(a, b) in segs {
        if next.insert(a, b).is_some() {
            return Err(Error::invariant("interface segments do not form a cycle"));
        }
    }
    let start = segs[0].0;
    let mut cycle = vec![start];
    let mut cur = segs[0].1;
    while cur != start {
        cycle.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| Error::invariant("open interface segment chain"))?;
        if cycle.len() > segs.len() {
            return Err(Error::invariant("interface segment chain has a sub-cycle"));
        }
    }
    if cycle.len() != segs.len() {
        return Err(Error::invariant("interface segments form multiple cycles"));
    }
    Ok(cycle)
}

/// Subdivide one simplex cell that is intersected by a geometry.
///
/// `sign` gives the proximity of original vertices (+1/0/-1); vertices
/// created by this pass must report 0. `cut_on_edge` holds the cut
/// vertex per cell edge ordinal. Children are emitted plus side first,
/// each positively oriented.
pub fn cut_simplex(
    dim: usize,
    cell_verts: &[usize],
    sign: &impl Fn(usize) -> i8,
    cut_on_edge: &[Option<usize>],
    coord_of: &impl Fn(usize) -> [f64; 3],
) -> Result<Vec<Vec<usize>>> {
    let ty = CellType::from_dim_and_len(dim, cell_verts.len());
    debug_assert!(ty.is_simplex());
    let edge_cut = |a: usize, b: usize| -> Option<usize> {
        for (eo, e) in ty.edges().iter().enumerate() {
            let (u, v) = (cell_verts[e[0]], cell_verts[e[1]]);
            if (u == a && v == b) || (u == b && v == a) {
                return cut_on_edge[eo];
            }
        }
        None
    };

    if dim == 2 {
        let fverts = [cell_verts[0], cell_verts[1], cell_verts[2]];
        let (polys, _) = clip_facet(fverts, sign, &edge_cut)?;
        let mut children = Vec::new();
        for poly in &polys {
            if poly.len() < 3 {
                continue;
            }
            let m = lex_min_vertex(poly, coord_of);
            let s = poly.iter().position(|&v| v == m).unwrap();
            for i in 1..poly.len() - 1 {
                let a = poly[(s + i) % poly.len()];
                let b = poly[(s + i + 1) % poly.len()];
                children.push(vec![m, a, b]);
            }
        }
        return Ok(children);
    }

    // 3D: clip the four outward facets, collect sub-polygons and the
    // interface cycle per side, then fan each side from its smallest
    // vertex.
    let mut side_faces: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
    let mut side_segs: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
    for fo in 0..4 {
        let fl = CellType::Tet4.facet_verts(fo);
        let fverts = [cell_verts[fl[0]], cell_verts[fl[1]], cell_verts[fl[2]]];
        let (polys, segs) = clip_facet(fverts, sign, &edge_cut)?;
        for side in 0..2 {
            if polys[side].len() >= 3 {
                side_faces[side].push(polys[side].clone());
            }
            if let Some((a, b)) = segs[side] {
                // The interface polygon traverses shared edges opposite
                // to the facet sub-polygons (outward surface closure).
                side_segs[side].push((b, a));
            }
        }
    }

    let mut children = Vec::new();
    for side in 0..2 {
        let mut faces = std::mem::take(&mut side_faces[side]);
        if faces.is_empty() {
            continue;
        }
        if !side_segs[side].is_empty() {
            faces.push(chain_cycle(&side_segs[side])?);
        }
        let mut region_verts: Vec<usize> = faces.iter().flatten().copied().collect();
        region_verts.sort_unstable();
        region_verts.dedup();
        let vstar = lex_min_vertex(&region_verts, coord_of);
        let mut tris = Vec::new();
        for face in &faces {
            if face.contains(&vstar) {
                continue;
            }
            triangulate_face(face, coord_of, &mut tris);
        }
        for [a, b, c] in tris {
            // Outward face + interior apex: swap two vertices to keep
            // the child positively oriented.
            children.push(vec![a, c, b, vstar]);
        }
    }
    Ok(children)
}

/// Signed measure of a simplex given its vertex coordinates
/// (area in 2D, volume in 3D).
pub fn simplex_signed_measure(dim: usize, coords: &[[f64; 3]]) -> f64 {
    if dim == 2 {
        let [a, b, c] = [coords[0], coords[1], coords[2]];
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    } else {
        let [a, b, c, d] = [coords[0], coords[1], coords[2], coords[3]];
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
        let cx = u[1] * v[2] - u[2] * v[1];
        let cy = u[2] * v[0] - u[0] * v[2];
        let cz = u[0] * v[1] - u[1] * v[0];
        (cx * w[0] + cy * w[1] + cz * w[2]) / 6.0
    }
}

/// Measure of a box or simplex cell from its parametric coordinates.
pub fn cell_param_measure(dim: usize, ty: CellType, coords: &[[f64; 3]]) -> f64 {
    if ty.is_simplex() {
        simplex_signed_measure(dim, coords)
    } else {
        // Axis-aligned box in reference space.
        let mut m = 1.0;
        for k in 0..dim {
            let lo = coords.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
            let hi = coords.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
            m *= hi - lo;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_2d_produces_four_positive_tris() {
        let t = RegularTemplate::for_dim(2);
        assert_eq!(t.new_verts.len(), 1);
        assert_eq!(t.new_verts[0].rank, 2);
        let existing = [0, 1, 2, 3];
        let cells = t.generate_cells(&existing, &[4]);
        assert_eq!(cells.len(), 4);
        let coords = [
            [-1.0, -1.0, 0.0],
            [1.0, -1.0, 0.0],
            [1.0, 1.0, 0.0],
            [-1.0, 1.0, 0.0],
            [0.0, 0.0, 0.0],
        ];
        let mut total = 0.0;
        for c in &cells {
            let cc: Vec<_> = c.iter().map(|&v| coords[v]).collect();
            let m = simplex_signed_measure(2, &cc);
            assert!(m > 0.0);
            total += m;
        }
        assert!((total - 4.0).abs() < 1e-14);
    }

    #[test]
    fn regular_3d_produces_24_positive_tets() {
        let t = RegularTemplate::for_dim(3);
        assert_eq!(t.new_verts.len(), 7);
        let existing: Vec<usize> = (0..8).collect();
        let new: Vec<usize> = (8..15).collect();
        let cells = t.generate_cells(&existing, &new);
        assert_eq!(cells.len(), 24);
        let mut coords = vec![
            [-1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0],
        ];
        for v in &t.new_verts {
            coords.push(v.xi);
        }
        let mut total = 0.0;
        for c in &cells {
            let cc: Vec<_> = c.iter().map(|&v| coords[v]).collect();
            let m = simplex_signed_measure(3, &cc);
            assert!(m > 0.0, "negative tet {c:?}");
            total += m;
        }
        assert!((total - 8.0).abs() < 1e-13);
    }

    // Exhaustive checks of the cut templates live in the tessellation
    // module tests, where cut vertices carry real coordinates.
}
