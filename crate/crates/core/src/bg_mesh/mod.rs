//! Structured background mesh with a tensor-product B-spline basis.
//!
//! The mesh is a Cartesian grid of Quad4/Hex8 elements. Each rank of a
//! distributed run holds a rectangular window of the global grid (its
//! owned block plus an aura of width `degree`); the serial mesh is the
//! degenerate case of one rank owning the full grid. All coordinates,
//! element IDs, and basis identities derive from global grid formulas,
//! so every rank computes bit-identical data for shared entities.

mod bspline;
pub mod entity;

pub use bspline::UniformClampedBasis;
pub use entity::{compute_entity_connectivity, CellType, EntityConnectivity};

use crate::error::{Error, Result};

/// Description of the global structured grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// Elements per axis; unused trailing axes are 1.
    pub elems: [usize; 3],
    pub origin: [f64; 3],
    /// Element edge length per axis.
    pub h: [f64; 3],
    /// Polynomial degree of the B-spline basis.
    pub degree: usize,
}

impl GridSpec {
    pub fn new(
        dim: usize,
        elems: &[usize],
        origin: &[f64],
        h: &[f64],
        degree: usize,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::config(format!("dim must be 2 or 3, got {dim}")));
        }
        if degree < 1 {
            return Err(Error::config("degree must be at least 1"));
        }
        if elems.len() != dim || origin.len() != dim || h.len() != dim {
            return Err(Error::config("mesh parameter arrays must have length dim"));
        }
        let mut e = [1usize; 3];
        let mut o = [0.0; 3];
        let mut hh = [1.0; 3];
        for k in 0..dim {
            if elems[k] == 0 {
                return Err(Error::config("elems_per_axis must be positive"));
            }
            if !(h[k] > 0.0) {
                return Err(Error::config("element size h must be positive"));
            }
            e[k] = elems[k];
            o[k] = origin[k];
            hh[k] = h[k];
        }
        Ok(GridSpec {
            dim,
            elems: e,
            origin: o,
            h: hh,
            degree,
        })
    }

    pub fn num_elems_total(&self) -> usize {
        self.elems[0] * self.elems[1] * self.elems[2]
    }

    /// Basis functions per axis: `n_e + p` (open uniform knots).
    pub fn basis_per_axis(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.elems[axis] + self.degree
        } else {
            1
        }
    }

    pub fn num_basis_total(&self) -> usize {
        (0..3).map(|k| self.basis_per_axis(k)).product()
    }

    pub fn elem_flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.elems[0] * (c[1] + self.elems[1] * c[2])
    }

    pub fn basis_flat(&self, b: [usize; 3]) -> usize {
        b[0] + self.basis_per_axis(0) * (b[1] + self.basis_per_axis(1) * b[2])
    }

    /// Globally unique element ID (1-based lexicographic).
    pub fn elem_id(&self, c: [usize; 3]) -> u64 {
        self.elem_flat(c) as u64 + 1
    }

    /// Physical coordinates of the global grid point `g`.
    pub fn point_coord(&self, g: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.origin[k] + g[k] as f64 * self.h[k];
        }
        x
    }

    pub fn elem_center(&self, c: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.origin[k] + (c[k] as f64 + 0.5) * self.h[k];
        }
        x
    }
}

/// Half-open box of global element coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElemBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl ElemBox {
    pub fn size(&self, k: usize) -> usize {
        self.hi[k] - self.lo[k]
    }

    pub fn count(&self) -> usize {
        (0..3).map(|k| self.size(k)).product()
    }

    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|k| c[k] >= self.lo[k] && c[k] < self.hi[k])
    }
}

/// Assignment of global elements to ranks: a regular block partition.
#[derive(Debug, Clone)]
pub struct Ownership {
    pub rank_grid: [usize; 3],
    elems: [usize; 3],
}

impl Ownership {
    pub fn serial(spec: &GridSpec) -> Self {
        Ownership {
            rank_grid: [1, 1, 1],
            elems: spec.elems,
        }
    }

    pub fn new(spec: &GridSpec, rank_grid: [usize; 3]) -> Result<Self> {
        for k in 0..3 {
            if rank_grid[k] == 0 || spec.elems[k] % rank_grid[k] != 0 {
                return Err(Error::config(format!(
                    "rank grid {:?} does not divide element grid {:?}",
                    rank_grid, spec.elems
                )));
            }
        }
        Ok(Ownership {
            rank_grid,
            elems: spec.elems,
        })
    }

    pub fn num_ranks(&self) -> usize {
        self.rank_grid.iter().product()
    }

    /// Owning rank of a global element (lexicographic rank numbering).
    pub fn owner(&self, c: [usize; 3]) -> u32 {
        let mut r = [0usize; 3];
        for k in 0..3 {
            r[k] = c[k] / (self.elems[k] / self.rank_grid[k]);
        }
        (r[0] + self.rank_grid[0] * (r[1] + self.rank_grid[1] * r[2])) as u32
    }

    /// Owned element box of rank `p`.
    pub fn owned_box(&self, p: u32) -> ElemBox {
        let p = p as usize;
        let r = [
            p % self.rank_grid[0],
            (p / self.rank_grid[0]) % self.rank_grid[1],
            p / (self.rank_grid[0] * self.rank_grid[1]),
        ];
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for k in 0..3 {
            let b = self.elems[k] / self.rank_grid[k];
            lo[k] = r[k] * b;
            hi[k] = lo[k] + b;
        }
        ElemBox { lo, hi }
    }
}

/// A background element of the local window.
#[derive(Debug, Clone)]
pub struct BgElement {
    /// Local vertex indices (window grid points), in Quad4/Hex8 order.
    pub verts: Vec<usize>,
    /// Local basis indices, lexicographic over the active functions.
    /// Empty on aura elements until communicated.
    pub ien: Vec<usize>,
    pub owner_rank: u32,
    /// Globally unique, parallel consistent ID.
    pub id: u64,
    /// Global grid coordinate of the element.
    pub global: [usize; 3],
}

/// Values and derivatives of all active basis functions of one element,
/// with respect to the element reference coordinates in `[-1,1]^dim`.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grad: Vec<[f64; 3]>,
    pub hess: Vec<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    pub spec: GridSpec,
    /// Element window held by this rank (owned plus aura).
    pub window: ElemBox,
    /// Owned sub-box.
    pub owned: ElemBox,
    pub my_rank: u32,
    pub elements: Vec<BgElement>,
    /// Global basis box held by this rank (bases partially supported on
    /// owned elements).
    basis_lo: [usize; 3],
    basis_hi: [usize; 3],
    /// local basis index -> local element indices of its support
    pub basis_supports: Vec<Vec<usize>>,
    /// Entity connectivity per rank 0..dim-1 over the window cells.
    conn: Vec<EntityConnectivity>,
    axis_basis: Vec<UniformClampedBasis>,
}

impl BackgroundMesh {
    /// Serial mesh: one rank owns the whole grid.
    pub fn build_cartesian(spec: GridSpec) -> Result<Self> {
        let own = Ownership::serial(&spec);
        let full = ElemBox {
            lo: [0, 0, 0],
            hi: spec.elems,
        };
        Self::build_window(spec, full, full, &own, 0)
    }

    /// Convenience constructor from raw parameters.
    pub fn cartesian(
        dim: usize,
        elems: &[usize],
        origin: &[f64],
        h: &[f64],
        degree: usize,
    ) -> Result<Self> {
        Self::build_cartesian(GridSpec::new(dim, elems, origin, h, degree)?)
    }

    /// Rank-local mesh over `window`, owning `owned`.
    pub fn build_window(
        spec: GridSpec,
        window: ElemBox,
        owned: ElemBox,
        ownership: &Ownership,
        my_rank: u32,
    ) -> Result<Self> {
        let dim = spec.dim;
        let axis_basis: Vec<UniformClampedBasis> = (0..dim)
            .map(|k| UniformClampedBasis::new(spec.degree, spec.elems[k]))
            .collect();

        // Local vertex grid: window corners inclusive.
        let npt = |k: usize| {
            if k < dim {
                window.size(k) + 1
            } else {
                1
            }
        };
        let vert_index = |g: [usize; 3]| -> usize {
            let l = [g[0] - window.lo[0], g[1] - window.lo[1], g[2] - window.lo[2]];
            l[0] + npt(0) * (l[1] + npt(1) * l[2])
        };

        // Basis box: functions partially supported on owned elements.
        let p = spec.degree;
        let mut basis_lo = [0usize; 3];
        let mut basis_hi = [1usize; 3];
        for k in 0..dim {
            basis_lo[k] = owned.lo[k];
            basis_hi[k] = owned.hi[k] + p;
        }
        let nb = |k: usize| basis_hi[k] - basis_lo[k];
        let basis_index = |b: [usize; 3]| -> Option<usize> {
            for k in 0..dim {
                if b[k] < basis_lo[k] || b[k] >= basis_hi[k] {
                    return None;
                }
            }
            let l = [b[0] - basis_lo[0], b[1] - basis_lo[1], b[2] - basis_lo[2]];
            Some(l[0] + nb(0) * (l[1] + nb(1) * l[2]))
        };

        let mut elements = Vec::with_capacity(window.count());
        for cz in window.lo[2]..window.hi[2] {
            for cy in window.lo[1]..window.hi[1] {
                for cx in window.lo[0]..window.hi[0] {
                    let c = [cx, cy, cz];
                    let verts = if dim == 2 {
                        vec![
                            vert_index([cx, cy, 0]),
                            vert_index([cx + 1, cy, 0]),
                            vert_index([cx + 1, cy + 1, 0]),
                            vert_index([cx, cy + 1, 0]),
                        ]
                    } else {
                        vec![
                            vert_index([cx, cy, cz]),
                            vert_index([cx + 1, cy, cz]),
                            vert_index([cx + 1, cy + 1, cz]),
                            vert_index([cx, cy + 1, cz]),
                            vert_index([cx, cy, cz + 1]),
                            vert_index([cx + 1, cy, cz + 1]),
                            vert_index([cx + 1, cy + 1, cz + 1]),
                            vert_index([cx, cy + 1, cz + 1]),
                        ]
                    };
                    let is_owned = owned.contains(c);
                    let mut ien = Vec::new();
                    if is_owned {
                        ien.reserve((p + 1).pow(dim as u32));
                        let top = |k: usize| if k < dim { p } else { 0 };
                        for bz in 0..=top(2) {
                            for by in 0..=top(1) {
                                for bx in 0..=top(0) {
                                    let b = [cx + bx, cy + by, cz + bz];
                                    let li = basis_index(b).ok_or_else(|| {
                                        Error::invariant(
                                            "owned element references basis outside window",
                                        )
                                    })?;
                                    ien.push(li);
                                }
                            }
                        }
                    }
                    elements.push(BgElement {
                        verts,
                        ien,
                        owner_rank: ownership.owner(c),
                        id: spec.elem_id(c),
                        global: c,
                    });
                }
            }
        }

        // Basis supports clipped to the window (complete for every listed
        // basis because the aura width equals the degree).
        let num_basis: usize = (0..dim).map(nb).product();
        let mut basis_supports = vec![Vec::new(); num_basis];
        let elem_local = |c: [usize; 3]| -> usize {
            (c[0] - window.lo[0])
                + window.size(0)
                    * ((c[1] - window.lo[1]) + window.size(1) * (c[2] - window.lo[2]))
        };
        for bz in basis_lo[2]..basis_hi[2].max(1) {
            for by in basis_lo[1]..basis_hi[1] {
                for bx in basis_lo[0]..basis_hi[0] {
                    let b = [bx, by, bz.min(basis_hi[2].saturating_sub(1))];
                    let li = match basis_index(b) {
                        Some(li) => li,
                        None => continue,
                    };
                    let (lo0, hi0) = axis_basis[0].support(bx);
                    let (lo1, hi1) = axis_basis[1].support(by);
                    let (lo2, hi2) = if dim == 3 {
                        axis_basis[2].support(bz)
                    } else {
                        (0, 0)
                    };
                    for cz in lo2..=hi2 {
                        for cy in lo1..=hi1 {
                            for cx in lo0..=hi0 {
                                let c = [cx, cy, cz];
                                if window.contains(c) {
                                    basis_supports[li].push(elem_local(c));
                                }
                            }
                        }
                    }
                }
            }
            if dim == 2 {
                break;
            }
        }

        let cell_verts: Vec<&[usize]> = elements.iter().map(|e| e.verts.as_slice()).collect();
        let mut conn = Vec::new();
        for r in 0..dim {
            if r == 0 {
                let num_verts: usize = (0..dim).map(npt).product();
                let mut etc = vec![Vec::new(); num_verts];
                let mut cte = Vec::with_capacity(cell_verts.len());
                let mut entity_verts = Vec::with_capacity(num_verts);
                for v in 0..num_verts {
                    entity_verts.push(vec![v]);
                }
                for (c, verts) in cell_verts.iter().enumerate() {
                    for &v in *verts {
                        etc[v].push(c);
                    }
                    cte.push(verts.to_vec());
                }
                conn.push(EntityConnectivity {
                    etc,
                    cte,
                    entity_verts,
                });
            } else {
                conn.push(compute_entity_connectivity(
                    cell_verts.iter().copied(),
                    dim,
                    r,
                ));
            }
        }

        Ok(BackgroundMesh {
            spec,
            window,
            owned,
            my_rank,
            elements,
            basis_lo,
            basis_hi,
            basis_supports,
            conn,
            axis_basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    pub fn num_elems(&self) -> usize {
        self.elements.len()
    }

    pub fn num_basis(&self) -> usize {
        self.basis_supports.len()
    }

    pub fn is_owned(&self, e: usize) -> bool {
        self.owned.contains(self.elements[e].global)
    }

    /// Local element index from a global coordinate, if inside the window.
    pub fn elem_local(&self, c: [usize; 3]) -> Option<usize> {
        if !self.window.contains(c) {
            return None;
        }
        Some(
            (c[0] - self.window.lo[0])
                + self.window.size(0)
                    * ((c[1] - self.window.lo[1])
                        + self.window.size(1) * (c[2] - self.window.lo[2])),
        )
    }

    /// Global basis multi-index of a local basis index.
    pub fn basis_global(&self, li: usize) -> [usize; 3] {
        let nb0 = self.basis_hi[0] - self.basis_lo[0];
        let nb1 = self.basis_hi[1] - self.basis_lo[1];
        let l = [li % nb0, (li / nb0) % nb1, li / (nb0 * nb1)];
        [
            self.basis_lo[0] + l[0],
            self.basis_lo[1] + l[1],
            self.basis_lo[2] + l[2].min(self.basis_hi[2].saturating_sub(self.basis_lo[2] + 1)),
        ]
    }

    /// Globally unique basis key (lexicographic flatten of the global grid).
    pub fn basis_key(&self, li: usize) -> u64 {
        self.spec.basis_flat(self.basis_global(li)) as u64
    }

    /// Owning rank of a basis function: the owner of the lowest-indexed
    /// element in its support.
    pub fn basis_owner(&self, li: usize, ownership: &Ownership) -> u32 {
        let b = self.basis_global(li);
        let mut c = [0usize; 3];
        for k in 0..self.dim() {
            c[k] = self.axis_basis[k].support(b[k]).0;
        }
        ownership.owner(c)
    }

    /// Entity indices of element `e` at `rank`, in ordinal order.
    pub fn get_entities_on_element(&self, e: usize, rank: usize) -> Result<&[usize]> {
        if rank >= self.dim() {
            return Err(Error::config(format!(
                "entity rank {rank} invalid for dim {}",
                self.dim()
            )));
        }
        Ok(&self.conn[rank].cte[e])
    }

    /// Cells attached to entity `a` of `rank`. Rank `dim` refers to the
    /// element itself.
    pub fn cells_on_entity(&self, rank: usize, a: usize) -> Vec<usize> {
        if rank == self.dim() {
            vec![a]
        } else {
            self.conn[rank].etc[a].clone()
        }
    }

    pub fn entity_conn(&self, rank: usize) -> &EntityConnectivity {
        &self.conn[rank]
    }

    pub fn num_verts(&self) -> usize {
        self.conn[0].etc.len()
    }

    /// Global grid coordinate of local vertex `v`.
    pub fn vert_global(&self, v: usize) -> [usize; 3] {
        let npt0 = self.window.size(0) + 1;
        let npt1 = if self.dim() >= 2 {
            self.window.size(1) + 1
        } else {
            1
        };
        let l = [v % npt0, (v / npt0) % npt1, v / (npt0 * npt1)];
        [
            self.window.lo[0] + l[0],
            self.window.lo[1] + l[1],
            self.window.lo[2] + l[2],
        ]
    }

    /// Physical coordinates of local vertex `v`.
    pub fn vert_coord(&self, v: usize) -> [f64; 3] {
        self.spec.point_coord(self.vert_global(v))
    }

    /// Map reference coordinates `xi` in `[-1,1]^dim` to physical space.
    pub fn interpolate_space(&self, e: usize, xi: [f64; 3]) -> [f64; 3] {
        let c = self.elements[e].global;
        let center = self.spec.elem_center(c);
        let mut x = [0.0; 3];
        for k in 0..self.dim() {
            x[k] = center[k] + 0.5 * xi[k] * self.spec.h[k];
        }
        x
    }

    /// Inverse of `interpolate_space` (the element map is affine).
    pub fn physical_to_param(&self, e: usize, x: [f64; 3]) -> [f64; 3] {
        let c = self.elements[e].global;
        let center = self.spec.elem_center(c);
        let mut xi = [0.0; 3];
        for k in 0..self.dim() {
            xi[k] = (x[k] - center[k]) / (0.5 * self.spec.h[k]);
        }
        xi
    }

    /// Physical bounding box of element `e`.
    pub fn elem_bbox(&self, e: usize) -> ([f64; 3], [f64; 3]) {
        let c = self.elements[e].global;
        let lo = self.spec.point_coord(c);
        let mut hi = lo;
        for k in 0..self.dim() {
            hi[k] += self.spec.h[k];
        }
        (lo, hi)
    }

    /// Evaluate all `(degree+1)^dim` active basis functions of element `e`
    /// at reference point `xi`, with derivatives up to `order <= 2` taken
    /// with respect to `xi`. The ordering matches the element IEN.
    pub fn eval_basis(&self, e: usize, xi: [f64; 3], order: usize) -> Result<BasisEval> {
        let dim = self.dim();
        let p = self.degree();
        let mut xic = xi;
        for k in 0..dim {
            if xic[k].abs() > 1.0 + 1e-9 {
                return Err(Error::invariant(format!(
                    "reference point {xi:?} outside element {e}"
                )));
            }
            xic[k] = xic[k].clamp(-1.0, 1.0);
        }
        let c = self.elements[e].global;
        // Univariate values/derivatives per axis, chain rule dt/dxi = 1/2.
        let mut axis: Vec<Vec<Vec<f64>>> = Vec::with_capacity(dim);
        for k in 0..dim {
            let t = c[k] as f64 + 0.5 * (xic[k] + 1.0);
            let mut d = self.axis_basis[k].eval(c[k], t, order.min(2));
            for (kd, row) in d.iter_mut().enumerate() {
                let f = 0.5f64.powi(kd as i32);
                for v in row.iter_mut() {
                    *v *= f;
                }
            }
            axis.push(d);
        }

        let n = (p + 1).pow(dim as u32);
        let mut out = BasisEval {
            values: Vec::with_capacity(n),
            grad: if order >= 1 {
                Vec::with_capacity(n)
            } else {
                Vec::new()
            },
            hess: if order >= 2 {
                Vec::with_capacity(n)
            } else {
                Vec::new()
            },
        };
        let top = |k: usize| if k < dim { p } else { 0 };
        for bz in 0..=top(2) {
            for by in 0..=top(1) {
                for bx in 0..=top(0) {
                    let j = [bx, by, bz];
                    let uni = |k: usize, kd: usize| axis[k][kd][j[k]];
                    let mut val = 1.0;
                    for k in 0..dim {
                        val *= uni(k, 0);
                    }
                    out.values.push(val);
                    if order >= 1 {
                        let mut g = [0.0; 3];
                        for k in 0..dim {
                            let mut t = 1.0;
                            for m in 0..dim {
                                t *= if m == k { uni(m, 1) } else { uni(m, 0) };
                            }
                            g[k] = t;
                        }
                        out.grad.push(g);
                    }
                    if order >= 2 {
                        let mut hm = [[0.0; 3]; 3];
                        for k in 0..dim {
                            for l in k..dim {
                                let mut t = 1.0;
                                for m in 0..dim {
                                    let d = (m == k) as usize + (m == l) as usize;
                                    t *= uni(m, d);
                                }
                                hm[k][l] = t;
                                hm[l][k] = t;
                            }
                        }
                        out.hess.push(hm);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Cell-vertex connectivity of the window grid, consumed by the
    /// foreground mesh initialization.
    pub fn cell_vertex_conn(&self) -> Vec<Vec<usize>> {
        self.elements.iter().map(|e| e.verts.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mesh(dim: usize, n: usize, p: usize) -> BackgroundMesh {
        let elems = vec![n; dim];
        let origin = vec![0.0; dim];
        let h = vec![1.0; dim];
        BackgroundMesh::cartesian(dim, &elems, &origin, &h, p).unwrap()
    }

    #[test]
    fn single_bilinear_element() {
        let m = unit_mesh(2, 1, 1);
        assert_eq!(m.num_elems(), 1);
        assert_eq!(m.num_basis(), 4);
        assert_eq!(m.elements[0].ien.len(), 4);
    }

    #[test]
    fn quadratic_interior_support_is_3x3() {
        let m = unit_mesh(2, 4, 2);
        // Interior basis (3,3) of the 6x6 basis grid.
        let li = 3 + 6 * 3;
        assert_eq!(m.basis_global(li), [3, 3, 0]);
        assert_eq!(m.basis_supports[li].len(), 9);
    }

    #[test]
    fn trilinear_2x2x2_counts() {
        let m = unit_mesh(3, 2, 1);
        assert_eq!(m.num_basis(), 27);
        for e in &m.elements {
            assert_eq!(e.ien.len(), 8);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BackgroundMesh::cartesian(4, &[1; 4], &[0.0; 4], &[1.0; 4], 1).is_err());
        assert!(BackgroundMesh::cartesian(2, &[2, 2], &[0.0, 0.0], &[1.0, 1.0], 0).is_err());
        assert!(BackgroundMesh::cartesian(2, &[2, 2], &[0.0, 0.0], &[-1.0, 1.0], 1).is_err());
    }

    #[test]
    fn entity_counts_per_element() {
        let m2 = unit_mesh(2, 2, 1);
        assert_eq!(m2.get_entities_on_element(0, 0).unwrap().len(), 4);
        assert_eq!(m2.get_entities_on_element(0, 1).unwrap().len(), 4);
        assert!(m2.get_entities_on_element(0, 2).is_err());
        let m3 = unit_mesh(3, 2, 1);
        assert_eq!(m3.get_entities_on_element(0, 1).unwrap().len(), 12);
        assert_eq!(m3.get_entities_on_element(0, 2).unwrap().len(), 6);
    }

    #[test]
    fn bilinear_center_values() {
        let m = unit_mesh(2, 1, 1);
        let ev = m.eval_basis(0, [0.0, 0.0, 0.0], 0).unwrap();
        for v in &ev.values {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_of_unity_random() {
        use rand::Rng;
        let mut rng = crate::seeded_rng(7);
        for (dim, n, p) in [(2, 3, 2), (2, 2, 1), (3, 2, 2)] {
            let m = unit_mesh(dim, n, p);
            for _ in 0..200 {
                let e = rng.random_range(0..m.num_elems());
                let xi = [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    if dim == 3 {
                        rng.random_range(-1.0..1.0)
                    } else {
                        0.0
                    },
                ];
                let ev = m.eval_basis(e, xi, 1).unwrap();
                let s: f64 = ev.values.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                for k in 0..dim {
                    let gs: f64 = ev.grad.iter().map(|g| g[k]).sum();
                    assert!(gs.abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = unit_mesh(2, 4, 2);
        let e = 5; // interior
        let xi = [0.3, -0.42, 0.0];
        let ev = m.eval_basis(e, xi, 2).unwrap();
        let d = 1e-6;
        for k in 0..2 {
            let mut xp = xi;
            xp[k] += d;
            let mut xm = xi;
            xm[k] -= d;
            let evp = m.eval_basis(e, xp, 1).unwrap();
            let evm = m.eval_basis(e, xm, 1).unwrap();
            for j in 0..ev.values.len() {
                let fd = (evp.values[j] - evm.values[j]) / (2.0 * d);
                assert!(
                    (ev.grad[j][k] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                    "grad mismatch"
                );
                for l in 0..2 {
                    let fd2 = (evp.grad[j][l] - evm.grad[j][l]) / (2.0 * d);
                    assert!((ev.hess[j][k][l] - fd2).abs() < 1e-5 * (1.0 + fd2.abs()));
                }
            }
        }
    }

    #[test]
    fn supports_and_ien_are_dual() {
        for (dim, n, p) in [(2, 4, 2), (3, 2, 1)] {
            let m = unit_mesh(dim, n, p);
            for (b, sup) in m.basis_supports.iter().enumerate() {
                for &e in sup {
                    assert!(m.elements[e].ien.contains(&b));
                }
            }
            for (e, el) in m.elements.iter().enumerate() {
                for &b in &el.ien {
                    assert!(m.basis_supports[b].contains(&e));
                }
            }
        }
    }

    #[test]
    fn etc_cte_duality_exhaustive() {
        for dim in [2usize, 3] {
            let n = 8usize.min(if dim == 3 { 4 } else { 8 });
            let m = unit_mesh(dim, n, 1);
            for r in 0..dim {
                let conn = m.entity_conn(r);
                for (e, cs) in conn.etc.iter().enumerate() {
                    let mut seen = std::collections::HashSet::new();
                    for &c in cs {
                        assert!(seen.insert(c), "duplicate cell in EtC");
                        assert!(conn.cte[c].contains(&e));
                    }
                }
                for (c, es) in conn.cte.iter().enumerate() {
                    for &e in es {
                        assert!(conn.etc[e].contains(&c));
                    }
                }
            }
        }
    }

    #[test]
    fn basis_continuity_across_facets() {
        // Values and first derivative of a p=2 basis agree when evaluated
        // from the two elements sharing a facet.
        let m = unit_mesh(2, 3, 2);
        let (el, er) = (0usize, 1usize); // share facet x = 1
        for s in [-0.7, 0.0, 0.4, 0.9] {
            let evl = m.eval_basis(el, [1.0, s, 0.0], 1).unwrap();
            let evr = m.eval_basis(er, [-1.0, s, 0.0], 1).unwrap();
            // Overlapping functions: IEN intersection.
            let ienl = &m.elements[el].ien;
            let ienr = &m.elements[er].ien;
            let mut matched = 0;
            for (jl, b) in ienl.iter().enumerate() {
                if let Some(jr) = ienr.iter().position(|x| x == b) {
                    matched += 1;
                    assert!((evl.values[jl] - evr.values[jr]).abs() < 1e-10);
                    for k in 0..2 {
                        assert!((evl.grad[jl][k] - evr.grad[jr][k]).abs() < 1e-10);
                    }
                }
            }
            assert!(matched >= 6);
        }
    }
}
