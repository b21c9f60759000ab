//! Mesh entity types, local numbering conventions, and entity connectivity.
//!
//! The local vertex/edge/face numbering is fixed globally for the whole
//! crate (the tables below are the single source of truth):
//!
//! | cell  | vertices (reference coords)                  | edges                                   | faces (outward)            |
//! |-------|----------------------------------------------|-----------------------------------------|----------------------------|
//! | Quad4 | (-1,-1) (1,-1) (1,1) (-1,1)                  | (0,1) (1,2) (2,3) (3,0)                 | —                          |
//! | Hex8  | bottom z=-1 CCW: 0..3, top z=+1 CCW: 4..7    | 4 bottom, 4 top, 4 vertical (0,4)..(3,7)| z- z+ y- x+ y+ x-          |
//! | Tri3  | 0 1 2 (CCW)                                  | (0,1) (1,2) (2,0)                       | —                          |
//! | Tet4  | 0 1 2 3 (positive orientation)               | (0,1) (1,2) (2,0) (0,3) (1,3) (2,3)     | (0,2,1) (0,1,3) (1,2,3) (2,0,3) |
//!
//! In 2D the facets of a cell are its edges; in 3D its faces.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellType {
    Tri3,
    Quad4,
    Tet4,
    Hex8,
}

const QUAD_EDGES: [[usize; 2]; 4] = [[0, 1], [1, 2], [2, 3], [3, 0]];
const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];
const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [2, 0], [0, 3], [1, 3], [2, 3]];
const TET_FACES: [[usize; 3]; 4] = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]];
const HEX_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];
const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1], // z-
    [4, 5, 6, 7], // z+
    [0, 1, 5, 4], // y-
    [1, 2, 6, 5], // x+
    [2, 3, 7, 6], // y+
    [3, 0, 4, 7], // x-
];

impl CellType {
    pub fn from_dim_and_len(dim: usize, num_verts: usize) -> CellType {
        match (dim, num_verts) {
            (2, 3) => CellType::Tri3,
            (2, 4) => CellType::Quad4,
            (3, 4) => CellType::Tet4,
            (3, 8) => CellType::Hex8,
            _ => panic!("no cell type with {num_verts} vertices in {dim}D"),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            CellType::Tri3 | CellType::Quad4 => 2,
            CellType::Tet4 | CellType::Hex8 => 3,
        }
    }

    pub fn num_verts(self) -> usize {
        match self {
            CellType::Tri3 => 3,
            CellType::Quad4 | CellType::Tet4 => 4,
            CellType::Hex8 => 8,
        }
    }

    pub fn is_simplex(self) -> bool {
        matches!(self, CellType::Tri3 | CellType::Tet4)
    }

    pub fn num_entities(self, rank: usize) -> usize {
        match (self, rank) {
            (t, 0) => t.num_verts(),
            (CellType::Tri3, 1) => 3,
            (CellType::Quad4, 1) => 4,
            (CellType::Tet4, 1) => 6,
            (CellType::Tet4, 2) => 4,
            (CellType::Hex8, 1) => 12,
            (CellType::Hex8, 2) => 6,
            _ => panic!("rank {rank} invalid for {self:?}"),
        }
    }

    /// Local vertex ordinals of entity `(rank, ordinal)`.
    pub fn entity_verts(self, rank: usize, ordinal: usize) -> &'static [usize] {
        const SELF0: [[usize; 1]; 8] =
            [[0], [1], [2], [3], [4], [5], [6], [7]];
        match (self, rank) {
            (_, 0) => &SELF0[ordinal],
            (CellType::Tri3, 1) => &TRI_EDGES[ordinal],
            (CellType::Quad4, 1) => &QUAD_EDGES[ordinal],
            (CellType::Tet4, 1) => &TET_EDGES[ordinal],
            (CellType::Tet4, 2) => &TET_FACES[ordinal],
            (CellType::Hex8, 1) => &HEX_EDGES[ordinal],
            (CellType::Hex8, 2) => &HEX_FACES[ordinal],
            _ => panic!("rank {rank} invalid for {self:?}"),
        }
    }

    /// Edge list of the cell (rank-1 entities), as local vertex pairs.
    pub fn edges(self) -> &'static [[usize; 2]] {
        match self {
            CellType::Tri3 => &TRI_EDGES,
            CellType::Quad4 => &QUAD_EDGES,
            CellType::Tet4 => &TET_EDGES,
            CellType::Hex8 => &HEX_EDGES,
        }
    }

    /// Number of facets ((d-1)-dimensional entities).
    pub fn num_facets(self) -> usize {
        self.num_entities(self.dim() - 1)
    }

    /// Local vertex ordinals of a facet, oriented outward (3D) or along
    /// the CCW boundary (2D).
    pub fn facet_verts(self, ordinal: usize) -> &'static [usize] {
        self.entity_verts(self.dim() - 1, ordinal)
    }
}

/// Two dual maps expressing which cells touch an entity and which
/// entities belong to a cell (in ordinal order).
#[derive(Debug, Clone, Default)]
pub struct EntityConnectivity {
    /// entity index -> indices of cells attached to it
    pub etc: Vec<Vec<usize>>,
    /// cell index -> entity indices, ordered by the cell-local ordinal
    pub cte: Vec<Vec<usize>>,
    /// entity index -> global vertex indices (orientation of first encounter)
    pub entity_verts: Vec<Vec<usize>>,
}

impl EntityConnectivity {
    pub fn num_entities(&self) -> usize {
        self.etc.len()
    }
}

/// Identify the unique rank-`r` entities of a conformal mesh given its
/// cell-vertex connectivity. Entities are keyed by their sorted vertex
/// tuple; indices are assigned in order of first encounter, so the
/// result is deterministic.
pub fn compute_entity_connectivity<'a, I>(cells: I, dim: usize, rank: usize) -> EntityConnectivity
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut conn = EntityConnectivity::default();
    let mut by_key: HashMap<Vec<usize>, usize> = HashMap::new();

    for (c, verts) in cells.into_iter().enumerate() {
        let ty = CellType::from_dim_and_len(dim, verts.len());
        let n = ty.num_entities(rank);
        let mut cte = Vec::with_capacity(n);
        for o in 0..n {
            let mut key: Vec<usize> = ty
                .entity_verts(rank, o)
                .iter()
                .map(|&lv| verts[lv])
                .collect();
            let oriented = key.clone();
            key.sort_unstable();
            let e = match by_key.get(&key) {
                Some(&e) => {
                    conn.etc[e].push(c);
                    e
                }
                None => {
                    let e = conn.etc.len();
                    by_key.insert(key, e);
                    conn.etc.push(vec![c]);
                    conn.entity_verts.push(oriented);
                    e
                }
            };
            cte.push(e);
        }
        conn.cte.push(cte);
    }
    conn
}
