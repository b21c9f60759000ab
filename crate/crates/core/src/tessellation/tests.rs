use super::*;
use crate::bg_mesh::BackgroundMesh;
use crate::geometry::{Geometry, Proximity};
use rand::Rng;

fn unit_bg(dim: usize, n: usize, p: usize) -> BackgroundMesh {
    BackgroundMesh::cartesian(dim, &vec![n; dim], &vec![0.0; dim], &vec![1.0 / n as f64; dim], p)
        .unwrap()
}

pub fn tessellate(bg: &BackgroundMesh, geoms: &[Geometry]) -> ForegroundMesh {
    let mut fg = ForegroundMesh::initialize(bg);
    fg.regular_subdivision(bg, geoms).unwrap();
    for g in geoms {
        fg.templated_subdivision(bg, g).unwrap();
    }
    fg
}

#[test]
fn vote_rules() {
    use Proximity::*;
    assert_eq!(vote([Pos, Zero, Pos]).unwrap(), Pos);
    assert_eq!(vote([Zero, Zero, Neg]).unwrap(), Neg);
    assert!(vote([Pos, Neg, Zero]).is_err());
    assert!(vote([Zero, Zero]).is_err());
}

#[test]
fn material_rule() {
    use Proximity::*;
    assert_eq!(advance_material(0, Pos), 1);
    assert_eq!(advance_material(1, Neg), 2);
    // Two geometries applied from scratch: (+, -) -> 2.
    assert_eq!(advance_material(advance_material(0, Pos), Neg), 2);
}

// ---- direct cut template checks -----------------------------------------

struct CutFixture {
    coords: Vec<[f64; 3]>,
    signs: Vec<i8>,
    verts: Vec<usize>,
    cut_on_edge: Vec<Option<usize>>,
}

impl CutFixture {
    fn new(dim: usize, corner_coords: &[[f64; 3]], signs: &[i8], rng: &mut impl Rng) -> Self {
        let ty = CellType::from_dim_and_len(dim, corner_coords.len());
        let mut coords = corner_coords.to_vec();
        let verts: Vec<usize> = (0..corner_coords.len()).collect();
        let mut cut_on_edge = vec![None; ty.edges().len()];
        for (eo, &[a, b]) in ty.edges().iter().enumerate() {
            if signs[a] * signs[b] == -1 {
                let t = rng.random_range(0.15..0.85);
                let q = coords.len();
                coords.push([
                    corner_coords[a][0] + t * (corner_coords[b][0] - corner_coords[a][0]),
                    corner_coords[a][1] + t * (corner_coords[b][1] - corner_coords[a][1]),
                    corner_coords[a][2] + t * (corner_coords[b][2] - corner_coords[a][2]),
                ]);
                cut_on_edge[eo] = Some(q);
            }
        }
        CutFixture {
            coords,
            signs: signs.to_vec(),
            verts,
            cut_on_edge,
        }
    }

    fn run(&self, dim: usize) -> Vec<Vec<usize>> {
        let sign = |v: usize| -> i8 {
            if v < self.signs.len() {
                self.signs[v]
            } else {
                0
            }
        };
        let coord = |v: usize| self.coords[v];
        cut_simplex(dim, &self.verts, &sign, &self.cut_on_edge, &coord).unwrap()
    }
}

fn check_children(
    dim: usize,
    fixture: &CutFixture,
    children: &[Vec<usize>],
    parent_measure: f64,
) {
    let mut total = 0.0;
    for ch in children {
        let cc: Vec<_> = ch.iter().map(|&v| fixture.coords[v]).collect();
        let m = simplex_signed_measure(dim, &cc);
        assert!(m > 1e-12, "child {ch:?} has measure {m}");
        total += m;
    }
    assert!(
        (total - parent_measure).abs() < 1e-12 * parent_measure.abs().max(1.0),
        "measure mismatch: {total} vs {parent_measure}"
    );
    // Interior faces shared by exactly two children.
    use std::collections::HashMap;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for ch in children {
        let ty = CellType::from_dim_and_len(dim, ch.len());
        for fo in 0..ty.num_facets() {
            let mut key: Vec<usize> = ty.facet_verts(fo).iter().map(|&l| ch[l]).collect();
            key.sort_unstable();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    for (k, n) in counts {
        assert!(n <= 2, "facet {k:?} shared by {n} children");
    }
}

#[test]
fn tri_cut_all_sign_patterns() {
    let corners = [[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.3, 0.9, 0.0]];
    let area = simplex_signed_measure(2, &corners);
    let mut rng = crate::seeded_rng(3);
    for s0 in [-1i8, 0, 1] {
        for s1 in [-1i8, 0, 1] {
            for s2 in [-1i8, 0, 1] {
                let signs = [s0, s1, s2];
                let np = signs.iter().filter(|&&s| s > 0).count();
                let nm = signs.iter().filter(|&&s| s < 0).count();
                if np == 0 || nm == 0 {
                    continue;
                }
                let fx = CutFixture::new(2, &corners, &signs, &mut rng);
                let children = fx.run(2);
                let expect = match (np, nm) {
                    (1, 1) => 2,
                    _ => 3,
                };
                assert_eq!(children.len(), expect, "signs {signs:?}");
                check_children(2, &fx, &children, area);
            }
        }
    }
}

#[test]
fn tri_case_counts_by_side() {
    // Two cut edges: one child on the lone-vertex side, two on the other.
    let corners = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let mut rng = crate::seeded_rng(4);
    let fx = CutFixture::new(2, &corners, &[1, -1, -1], &mut rng);
    let children = fx.run(2);
    assert_eq!(children.len(), 3);
    let lone: Vec<_> = children.iter().filter(|ch| ch.contains(&0)).collect();
    assert_eq!(lone.len(), 1);
}

#[test]
fn tet_cut_all_sign_patterns() {
    let corners = [
        [0.0, 0.0, 0.0],
        [1.0, 0.05, 0.0],
        [0.2, 1.0, 0.1],
        [0.4, 0.3, 1.0],
    ];
    let vol = simplex_signed_measure(3, &corners);
    assert!(vol > 0.0);
    let mut rng = crate::seeded_rng(5);
    for pattern in 0..81usize {
        let signs: Vec<i8> = (0..4).map(|k| (pattern / 3usize.pow(k)) as i8 % 3 - 1).collect();
        let np = signs.iter().filter(|&&s| s > 0).count();
        let nm = signs.iter().filter(|&&s| s < 0).count();
        if np == 0 || nm == 0 {
            continue;
        }
        for _ in 0..3 {
            let fx = CutFixture::new(3, &corners, &signs, &mut rng);
            let children = fx.run(3);
            let expect = match (np, nm) {
                (1, 1) => 2,
                (1, 2) | (2, 1) => 3,
                (1, 3) | (3, 1) => 4,
                (2, 2) => 6,
                _ => unreachable!(),
            };
            assert_eq!(children.len(), expect, "signs {signs:?}");
            check_children(3, &fx, &children, vol);
        }
    }
}

#[test]
fn tet_three_cut_edges_gives_one_plus_prism() {
    let corners = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    let mut rng = crate::seeded_rng(6);
    let fx = CutFixture::new(3, &corners, &[1, -1, -1, -1], &mut rng);
    let children = fx.run(3);
    assert_eq!(children.len(), 4);
    let lone: Vec<_> = children.iter().filter(|ch| ch.contains(&0)).collect();
    assert_eq!(lone.len(), 1, "one child on the lone vertex side");
}

#[test]
fn neighboring_tets_split_shared_quad_identically() {
    // Two tets share face (0,1,2); signs make that face carry a cut quad.
    let coords = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.4, 1.0, 0.0],
        [0.3, 0.3, 1.0],
        [0.5, 0.3, -1.0],
    ];
    let signs = [1i8, 1, -1, -1, -1];
    let mut rng = crate::seeded_rng(7);
    let t1 = [0usize, 1, 2, 3];
    let t2 = [1usize, 0, 2, 4];
    let mut all_coords = coords.clone();
    let mut cut_of_pair: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    let mut build = |verts: &[usize; 4], all: &mut Vec<[f64; 3]>| -> CutFixture {
        let ty = CellType::Tet4;
        let mut cut = vec![None; 6];
        for (eo, &[a, b]) in ty.edges().iter().enumerate() {
            let (va, vb) = (verts[a], verts[b]);
            if signs[va] * signs[vb] == -1 {
                let key = (va.min(vb), va.max(vb));
                let q = *cut_of_pair.entry(key).or_insert_with(|| {
                    let t = rng.random_range(0.2..0.8);
                    let idx = all.len();
                    let (ca, cb) = (coords[va], coords[vb]);
                    all.push([
                        ca[0] + t * (cb[0] - ca[0]),
                        ca[1] + t * (cb[1] - ca[1]),
                        ca[2] + t * (cb[2] - ca[2]),
                    ]);
                    idx
                });
                cut[eo] = Some(q);
            }
        }
        CutFixture {
            coords: all.clone(),
            signs: signs.to_vec(),
            verts: verts.to_vec(),
            cut_on_edge: cut,
        }
    };
    let fx1 = build(&t1, &mut all_coords);
    let mut fx1 = fx1;
    let fx2 = build(&t2, &mut all_coords);
    fx1.coords = all_coords.clone();
    let ch1 = fx1.run(3);
    let ch2 = fx2.run(3);
    // Collect child faces lying on the shared plane z=0 from both sides.
    let faces_on_shared = |children: &[Vec<usize>]| -> std::collections::BTreeSet<Vec<usize>> {
        let mut set = std::collections::BTreeSet::new();
        for ch in children {
            for fo in 0..4 {
                let mut f: Vec<usize> = CellType::Tet4
                    .facet_verts(fo)
                    .iter()
                    .map(|&l| ch[l])
                    .collect();
                if f.iter().all(|&v| all_coords[v][2].abs() < 1e-12) {
                    f.sort_unstable();
                    set.insert(f);
                }
            }
        }
        set
    };
    assert_eq!(faces_on_shared(&ch1), faces_on_shared(&ch2));
}

// ---- pass-level checks ----------------------------------------------------

#[test]
fn regular_2d_center_vertex_and_four_tris() {
    let bg = unit_bg(2, 1, 1);
    let g = Geometry::plane([1.0, 0.0, 0.0], 0.5, 1e-8);
    let mut fg = ForegroundMesh::initialize(&bg);
    fg.regular_subdivision(&bg, std::slice::from_ref(&g)).unwrap();
    assert_eq!(fg.num_verts(), 5);
    assert_eq!(fg.verts[4].ancestry, (2, 0));
    assert_eq!(fg.num_cells(), 4);
    for c in 0..4 {
        assert_eq!(fg.cell_type(c), CellType::Tri3);
    }
    assert!((fg.child_mesh_param_volume(0) - 4.0).abs() < 1e-12);
}

#[test]
fn regular_3d_face_and_body_vertices() {
    let bg = unit_bg(3, 1, 1);
    let g = Geometry::plane([1.0, 0.0, 0.0], 0.5, 1e-8);
    let mut fg = ForegroundMesh::initialize(&bg);
    fg.regular_subdivision(&bg, std::slice::from_ref(&g)).unwrap();
    assert_eq!(fg.num_verts(), 8 + 7);
    let face_verts = fg.verts[8..14]
        .iter()
        .filter(|v| v.ancestry.0 == 2)
        .count();
    assert_eq!(face_verts, 6);
    assert_eq!(fg.verts[14].ancestry, (3, 0));
    assert_eq!(fg.num_cells(), 24);
    assert!((fg.child_mesh_param_volume(0) - 8.0).abs() < 1e-12);
}

#[test]
fn adjacent_hexes_share_face_center() {
    let bg =
        BackgroundMesh::cartesian(3, &[2, 1, 1], &[0.0; 3], &[1.0; 3], 1).unwrap();
    let g = Geometry::plane([0.0, 1.0, 0.0], 0.5, 1e-8);
    let mut fg = ForegroundMesh::initialize(&bg);
    fg.regular_subdivision(&bg, std::slice::from_ref(&g)).unwrap();
    // 7 new vertices per hex minus the shared face center.
    assert_eq!(fg.num_verts(), 12 + 13);
    assert_eq!(fg.num_cells(), 48);
}

#[test]
fn plane_cut_quad_mesh_conserves_volume() {
    let bg = unit_bg(2, 2, 1);
    let g = Geometry::plane([1.0, 0.0, 0.0], 0.31, 1e-7);
    let fg = tessellate(&bg, &[g.clone()]);
    for e in 0..4 {
        assert!(
            (fg.child_mesh_param_volume(e) - 4.0).abs() < 1e-10,
            "element {e}"
        );
    }
    fg.check_orientation().unwrap();
    // Materials: 0 inside (phi < 0), 1 outside.
    let mats: std::collections::BTreeSet<u32> =
        fg.cells.iter().map(|c| c.material).collect();
    assert_eq!(mats.into_iter().collect::<Vec<_>>(), vec![0, 1]);
    // Interface fidelity.
    for v in fg.verts.iter() {
        if v.ancestry.0 > 0 && (v.x[0] - 0.31).abs() < 0.25 {
            // vertices created on the interface
            if v.x[0] != 0.0 && v.x[0] != 0.5 && v.x[0] != 1.0 && v.x[0] != 0.25 {
                assert!(g.eval(&v.x).unwrap().abs() < 1e-10);
            }
        }
    }
}

#[test]
fn geometry_through_corner_votes_zero_cells() {
    // Plane x + y = 1 passes exactly through two corners of the quad.
    let bg = unit_bg(2, 1, 1);
    let s = 1.0 / 2f64.sqrt();
    let g = Geometry::plane([s, s, 0.0], s, 1e-8);
    let fg = tessellate(&bg, &[g]);
    assert_eq!(fg.num_verts(), 5); // center only, no cut vertices
    assert!((fg.child_mesh_param_volume(0) - 4.0).abs() < 1e-12);
    let mats: std::collections::BTreeSet<u32> =
        fg.cells.iter().map(|c| c.material).collect();
    assert_eq!(mats.len(), 2);
}

#[test]
fn circle_tessellation_2d_invariants() {
    let bg = unit_bg(2, 4, 1);
    let g = Geometry::sphere([0.5, 0.5, 0.0], 0.3, 1e-7 * 0.25);
    let fg = tessellate(&bg, &[g.clone()]);
    fg.check_orientation().unwrap();
    for e in 0..bg.num_elems() {
        assert!((fg.child_mesh_param_volume(e) - 4.0).abs() < 1e-10);
    }
    // Every vertex created by the templated pass sits on the interface.
    let base = 25 + fg.intersected.iter().filter(|&&i| i).count(); // grid + centers
    for v in fg.verts[base..].iter() {
        assert!(g.eval(&v.x).unwrap().abs() < 1e-10);
    }
    // Parametric uniqueness inside each child mesh.
    for cm in &fg.child_meshes {
        for i in 0..cm.param.len() {
            for j in i + 1..cm.param.len() {
                let d: f64 = (0..3)
                    .map(|k| (cm.param[i][k] - cm.param[j][k]).abs())
                    .fold(0.0, f64::max);
                assert!(d > 1e-12, "duplicate parametric coords in element {}", cm.bg_elem);
            }
        }
    }
}

#[test]
fn plane_cut_hex_mesh_3d_conserves_volume() {
    let bg = unit_bg(3, 2, 1);
    let g = Geometry::plane([0.6, 0.64, 0.48], 0.21, 1e-7);
    let fg = tessellate(&bg, &[g.clone()]);
    fg.check_orientation().unwrap();
    for e in 0..bg.num_elems() {
        assert!(
            (fg.child_mesh_param_volume(e) - 8.0).abs() < 1e-9,
            "element {e}: {}",
            fg.child_mesh_param_volume(e)
        );
    }
    for v in fg.verts.iter().filter(|v| v.id == 0) {
        // interface vertices: rank>0 ancestry and not a template center
        if v.ancestry.0 > 0 {
            let phi = g.eval(&v.x).unwrap();
            let is_center = phi.abs() > 1e-6;
            if !is_center {
                assert!(phi.abs() < 1e-10);
            }
        }
    }
}

#[test]
fn two_geometries_make_four_materials() {
    let bg = unit_bg(2, 2, 1);
    let g1 = Geometry::plane([1.0, 0.0, 0.0], 0.43, 1e-8);
    let g2 = Geometry::plane([0.0, 1.0, 0.0], 0.57, 1e-8);
    let fg = tessellate(&bg, &[g1, g2]);
    let mats: std::collections::BTreeSet<u32> =
        fg.cells.iter().map(|c| c.material).collect();
    assert_eq!(mats.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    fg.check_orientation().unwrap();
    for e in 0..bg.num_elems() {
        assert!((fg.child_mesh_param_volume(e) - 4.0).abs() < 1e-10);
    }
}

#[test]
fn tessellation_is_deterministic() {
    let bg = unit_bg(2, 3, 1);
    let g = Geometry::sphere([0.52, 0.49, 0.0], 0.31, 1e-7 / 3.0);
    let a = tessellate(&bg, std::slice::from_ref(&g));
    let b = tessellate(&bg, std::slice::from_ref(&g));
    assert_eq!(a.num_verts(), b.num_verts());
    assert_eq!(a.num_cells(), b.num_cells());
    for (va, vb) in a.verts.iter().zip(&b.verts) {
        assert_eq!(va.x, vb.x);
        assert_eq!(va.ancestry, vb.ancestry);
    }
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        assert_eq!(ca.verts, cb.verts);
        assert_eq!(ca.material, cb.material);
    }
}

#[test]
fn interior_child_mesh_facets_are_shared_by_two_cells() {
    let bg = unit_bg(2, 2, 1);
    let g = Geometry::sphere([0.45, 0.55, 0.0], 0.3, 1e-8);
    let fg = tessellate(&bg, std::slice::from_ref(&g));
    for cm in &fg.child_meshes {
        let mut counts: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for &c in &cm.cells {
            let verts = &fg.cells[c].verts;
            let ty = CellType::from_dim_and_len(2, verts.len());
            for o in 0..ty.num_facets() {
                let f = ty.facet_verts(o);
                let (a, b) = (verts[f[0]], verts[f[1]]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        for ((a, b), n) in counts {
            assert!(n <= 2, "facet ({a},{b}) shared by {n} cells");
            if n == 1 {
                // Boundary facets lie on the element's closure: both
                // vertices have ancestry of rank < dim.
                let (ra, rb) = (fg.verts[a].ancestry.0, fg.verts[b].ancestry.0);
                assert!(ra < 2 && rb < 2, "dangling interior facet ({a},{b})");
            }
        }
    }
}

#[test]
fn double_crossing_edge_keeps_protrusion_uncut() {
    // A thin circle slab crossing a single background edge twice is not
    // detected on that edge: both endpoints lie on the same side.
    let bg = unit_bg(2, 1, 1);
    let g = Geometry::sphere([0.5, 0.0, 0.0], 0.2, 1e-8);
    let fg = tessellate(&bg, std::slice::from_ref(&g));
    fg.check_orientation().unwrap();
    // The bottom edge midpoint is inside the circle but the edge is uncut;
    // cuts only appear on edges of the regular-subdivision triangles.
    assert!((fg.child_mesh_param_volume(0) - 4.0).abs() < 1e-10);
}
