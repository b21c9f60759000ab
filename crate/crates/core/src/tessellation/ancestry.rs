//! Background ancestry of foreground vertices.
//!
//! The ancestor of a foreground entity is the lowest-rank background
//! entity whose closure fully contains it. A vertex created on an
//! intersected edge inherits the lowest-rank background entity common to
//! the closures of both edge endpoints; the search is purely integer
//! (entity connectivity and vertex sets), no floating point.

use crate::bg_mesh::BackgroundMesh;

pub type Ancestry = (u8, usize);

/// True if background entity `(re, ae)` contains background entity
/// `(rv, av)` in its closure (vertex-set inclusion).
fn contains(bg: &BackgroundMesh, re: usize, ae: usize, rv: usize, av: usize) -> bool {
    if re == rv {
        return ae == av;
    }
    let ev = &bg.entity_conn(re).entity_verts[ae];
    if rv == 0 {
        return ev.contains(&av);
    }
    bg.entity_conn(rv).entity_verts[av]
        .iter()
        .all(|v| ev.contains(v))
}

/// Common background ancestor of two vertices joined by an intersected
/// edge inside background element `e`.
pub fn find_common_ancestor(
    bg: &BackgroundMesh,
    e: usize,
    a1: Ancestry,
    a2: Ancestry,
) -> Ancestry {
    let dim = bg.dim();
    if a1.0 as usize == dim || a2.0 as usize == dim {
        return (dim as u8, e);
    }
    // Candidates: entities of e with rank >= max(rank1, rank2), lowest
    // rank wins. Both vertices lie in e's closure by construction.
    let lo = (a1.0.max(a2.0)) as usize;
    for r in lo.max(1)..dim {
        let entities = bg
            .get_entities_on_element(e, r)
            .expect("rank checked against dim");
        for &a in entities {
            if contains(bg, r, a, a1.0 as usize, a1.1) && contains(bg, r, a, a2.0 as usize, a2.1)
            {
                return (r as u8, a);
            }
        }
    }
    (dim as u8, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bg_mesh::BackgroundMesh;

    fn hex_mesh() -> BackgroundMesh {
        BackgroundMesh::cartesian(3, &[2, 2, 2], &[0.0; 3], &[1.0; 3], 1).unwrap()
    }

    #[test]
    fn same_face_ancestors_stay_on_face() {
        let bg = hex_mesh();
        let faces = bg.get_entities_on_element(0, 2).unwrap().to_vec();
        let f = faces[4];
        assert_eq!(find_common_ancestor(&bg, 0, (2, f), (2, f)), (2, f));
    }

    #[test]
    fn two_vertices_on_an_edge_resolve_to_that_edge() {
        let bg = hex_mesh();
        // Element 0 vertices, local edge 0 connects local verts 0 and 1.
        let verts = &bg.elements[0].verts;
        let edges = bg.get_entities_on_element(0, 1).unwrap().to_vec();
        let anc = find_common_ancestor(&bg, 0, (0, verts[0]), (0, verts[1]));
        assert_eq!(anc, (1, edges[0]));
    }

    #[test]
    fn different_faces_fall_into_the_element() {
        let bg = hex_mesh();
        let faces = bg.get_entities_on_element(0, 2).unwrap().to_vec();
        let anc = find_common_ancestor(&bg, 0, (2, faces[3]), (2, faces[5]));
        assert_eq!(anc, (3, 0));
    }

    #[test]
    fn vertex_and_face_resolve_to_face() {
        let bg = hex_mesh();
        let verts = &bg.elements[0].verts;
        let faces = bg.get_entities_on_element(0, 2).unwrap().to_vec();
        // Local vertex 0 lies on the z- face (ordinal 0).
        let anc = find_common_ancestor(&bg, 0, (0, verts[0]), (2, faces[0]));
        assert_eq!(anc, (2, faces[0]));
    }

    #[test]
    fn interior_vertex_forces_element() {
        let bg = hex_mesh();
        let verts = &bg.elements[0].verts;
        assert_eq!(
            find_common_ancestor(&bg, 0, (3, 0), (0, verts[0])),
            (3, 0)
        );
    }

    #[test]
    fn face_diagonal_vertices_resolve_to_face() {
        let bg = hex_mesh();
        let verts = &bg.elements[0].verts;
        let faces = bg.get_entities_on_element(0, 2).unwrap().to_vec();
        // Local verts 0 and 2 are a diagonal of the z- face.
        let anc = find_common_ancestor(&bg, 0, (0, verts[0]), (0, verts[2]));
        assert_eq!(anc, (2, faces[0]));
    }

    #[test]
    fn body_diagonal_resolves_to_element() {
        let bg = hex_mesh();
        let verts = &bg.elements[0].verts;
        let anc = find_common_ancestor(&bg, 0, (0, verts[0]), (0, verts[6]));
        assert_eq!(anc, (3, 0));
    }
}
