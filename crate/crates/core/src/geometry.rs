//! Implicit geometry engine.
//!
//! A geometry answers three queries: the proximity of a point (outside,
//! inside, or on the interface within a snap tolerance), a conservative
//! element intersection test (false positives allowed, false negatives
//! not), and the location of the interface along a segment whose
//! endpoints lie strictly on opposite sides.

use crate::error::{Error, Result};
use std::fmt;

/// Classification of a point relative to a geometry's interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximity {
    /// Level set positive: outside.
    Pos,
    /// Within the snap band of the interface.
    Zero,
    /// Level set negative: inside.
    Neg,
}

impl Proximity {
    pub fn is_strict(self) -> bool {
        self != Proximity::Zero
    }
}

impl fmt::Display for Proximity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Proximity::Pos => "+",
            Proximity::Zero => "0",
            Proximity::Neg => "-",
        };
        write!(f, "{s}")
    }
}

/// Level-set field sampled on a regular grid, multilinearly interpolated.
#[derive(Debug, Clone)]
pub struct SampledLevelSet {
    dim: usize,
    n: [usize; 3],
    x0: [f64; 3],
    dx: [f64; 3],
    values: Vec<f64>,
}

impl SampledLevelSet {
    pub fn new(dim: usize, n: &[usize], x0: &[f64], dx: &[f64], values: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::config("sampled level set dim must be 2 or 3"));
        }
        let mut nn = [1usize; 3];
        let mut xx = [0.0; 3];
        let mut dd = [1.0; 3];
        for k in 0..dim {
            if n[k] < 2 {
                return Err(Error::config("sampled grid needs at least 2 points per axis"));
            }
            if !(dx[k] > 0.0) {
                return Err(Error::config("sampled grid spacing must be positive"));
            }
            nn[k] = n[k];
            xx[k] = x0[k];
            dd[k] = dx[k];
        }
        let expect = nn[0] * nn[1] * nn[2];
        if values.len() != expect {
            return Err(Error::config(format!(
                "sampled grid expects {expect} values, got {}",
                values.len()
            )));
        }
        Ok(SampledLevelSet {
            dim,
            n: nn,
            x0: xx,
            dx: dd,
            values,
        })
    }

    /// Parse the plain-text grid format: a header line
    /// `dim nx ny [nz] x0 y0 [z0] dx dy [dz]` followed by whitespace
    /// separated values in lexicographic order (x fastest).
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next_f = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| Error::config(format!("level set grid: missing {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::config(format!("level set grid: bad {what}: {e}")))
        };
        let dim = next_f("dim")? as usize;
        if dim != 2 && dim != 3 {
            return Err(Error::config("level set grid: dim must be 2 or 3"));
        }
        let mut n = [1usize; 3];
        for k in 0..dim {
            n[k] = next_f("grid size")? as usize;
        }
        let mut x0 = [0.0; 3];
        for k in 0..dim {
            x0[k] = next_f("origin")?;
        }
        let mut dx = [1.0; 3];
        for k in 0..dim {
            dx[k] = next_f("spacing")?;
        }
        let count = n[0] * n[1] * n[2];
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(next_f("value")?);
        }
        SampledLevelSet::new(dim, &n[..dim], &x0[..dim], &dx[..dim], values)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn node(&self, i: [usize; 3]) -> f64 {
        self.values[i[0] + self.n[0] * (i[1] + self.n[1] * i[2])]
    }

    fn locate(&self, x: &[f64; 3]) -> Result<([usize; 3], [f64; 3])> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..self.dim {
            let t = (x[k] - self.x0[k]) / self.dx[k];
            if t < -1e-12 || t > (self.n[k] - 1) as f64 + 1e-12 {
                return Err(Error::config(format!(
                    "point {x:?} outside sampled level set bounding box"
                )));
            }
            let c = (t.floor() as isize).clamp(0, self.n[k] as isize - 2) as usize;
            cell[k] = c;
            frac[k] = (t - c as f64).clamp(0.0, 1.0);
        }
        Ok((cell, frac))
    }

    pub fn eval(&self, x: &[f64; 3]) -> Result<f64> {
        let (c, f) = self.locate(x)?;
        let mut v = 0.0;
        let corners = 1usize << self.dim;
        for m in 0..corners {
            let mut w = 1.0;
            let mut idx = c;
            for k in 0..self.dim {
                if m >> k & 1 == 1 {
                    w *= f[k];
                    idx[k] += 1;
                } else {
                    w *= 1.0 - f[k];
                }
            }
            v += w * self.node(idx);
        }
        Ok(v)
    }

    /// Min/max of the nodal values over all grid cells overlapping the
    /// physical box. Bounds the multilinear interpolant on the box.
    fn range_on_box(&self, lo: &[f64; 3], hi: &[f64; 3]) -> Result<(f64, f64)> {
        let mut ilo = [0usize; 3];
        let mut ihi = [0usize; 3];
        for k in 0..self.dim {
            let tlo = (lo[k] - self.x0[k]) / self.dx[k];
            let thi = (hi[k] - self.x0[k]) / self.dx[k];
            if thi < -1e-12 || tlo > (self.n[k] - 1) as f64 + 1e-12 {
                return Err(Error::config(
                    "element outside sampled level set bounding box",
                ));
            }
            ilo[k] = (tlo.floor() as isize).clamp(0, self.n[k] as isize - 1) as usize;
            ihi[k] = (thi.ceil() as isize).clamp(0, self.n[k] as isize - 1) as usize;
        }
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for iz in ilo[2]..=ihi[2] {
            for iy in ilo[1]..=ihi[1] {
                for ix in ilo[0]..=ihi[0] {
                    let v = self.node([ix, iy, iz]);
                    vmin = vmin.min(v);
                    vmax = vmax.max(v);
                }
            }
        }
        Ok((vmin, vmax))
    }
}

#[derive(Debug, Clone)]
pub enum GeometryKind {
    /// phi(x) = n . x - offset, with |n| = 1.
    Plane { normal: [f64; 3], offset: f64 },
    /// phi(x) = |x - center| - radius (circle in 2D).
    Sphere { center: [f64; 3], radius: f64 },
    /// Multilinearly interpolated level-set samples.
    Sampled(SampledLevelSet),
}

/// An implicit geometry with its proximity snap tolerance (absolute,
/// typically `eps_p * h`).
#[derive(Debug, Clone)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub snap_tol: f64,
    /// Interface root tolerance in the edge parameter.
    pub root_tol: f64,
}

impl Geometry {
    pub fn new(kind: GeometryKind, snap_tol: f64) -> Self {
        let kind = match kind {
            GeometryKind::Plane { normal, offset } => {
                let len = (normal[0] * normal[0] + normal[1] * normal[1]
                    + normal[2] * normal[2])
                    .sqrt();
                GeometryKind::Plane {
                    normal: [normal[0] / len, normal[1] / len, normal[2] / len],
                    offset: offset / len,
                }
            }
            k => k,
        };
        Geometry {
            kind,
            snap_tol,
            root_tol: 1e-13,
        }
    }

    pub fn plane(normal: [f64; 3], offset: f64, snap_tol: f64) -> Self {
        Geometry::new(GeometryKind::Plane { normal, offset }, snap_tol)
    }

    pub fn sphere(center: [f64; 3], radius: f64, snap_tol: f64) -> Self {
        Geometry::new(GeometryKind::Sphere { center, radius }, snap_tol)
    }

    /// Level-set value at `x`.
    pub fn eval(&self, x: &[f64; 3]) -> Result<f64> {
        match &self.kind {
            GeometryKind::Plane { normal, offset } => {
                Ok(normal[0] * x[0] + normal[1] * x[1] + normal[2] * x[2] - offset)
            }
            GeometryKind::Sphere { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                Ok((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - radius)
            }
            GeometryKind::Sampled(g) => g.eval(x),
        }
    }

    pub fn compute_proximity(&self, x: &[f64; 3]) -> Result<Proximity> {
        let phi = self.eval(x)?;
        Ok(if phi.abs() <= self.snap_tol {
            Proximity::Zero
        } else if phi > 0.0 {
            Proximity::Pos
        } else {
            Proximity::Neg
        })
    }

    /// Conservative test whether the interface can intersect the closed
    /// axis-aligned box: never reports a false negative.
    pub fn is_box_intersected(&self, lo: &[f64; 3], hi: &[f64; 3], dim: usize) -> Result<bool> {
        let (pmin, pmax) = match &self.kind {
            GeometryKind::Plane { normal, offset } => {
                // Linear: extrema at corners.
                let mut pmin = -offset;
                let mut pmax = -offset;
                for k in 0..dim {
                    let a = normal[k] * lo[k];
                    let b = normal[k] * hi[k];
                    pmin += a.min(b);
                    pmax += a.max(b);
                }
                (pmin, pmax)
            }
            GeometryKind::Sphere { center, radius } => {
                let mut d2min = 0.0;
                let mut d2max = 0.0;
                for k in 0..dim {
                    let c = center[k];
                    let below = (lo[k] - c).max(0.0);
                    let above = (c - hi[k]).max(0.0);
                    let near = below.max(above);
                    d2min += near * near;
                    let far = (c - lo[k]).abs().max((hi[k] - c).abs());
                    d2max += far * far;
                }
                (d2min.sqrt() - radius, d2max.sqrt() - radius)
            }
            GeometryKind::Sampled(g) => g.range_on_box(lo, hi)?,
        };
        Ok(pmin <= self.snap_tol && pmax >= -self.snap_tol)
    }

    /// Location of the interface on the segment `x1 -> x2` as a parameter
    /// in (0,1). Requires strictly opposite proximities at the endpoints.
    pub fn find_interface(&self, x1: &[f64; 3], x2: &[f64; 3]) -> Result<f64> {
        let p1 = self.compute_proximity(x1)?;
        let p2 = self.compute_proximity(x2)?;
        match (p1, p2) {
            (Proximity::Pos, Proximity::Neg) | (Proximity::Neg, Proximity::Pos) => {}
            _ => {
                return Err(Error::invariant(format!(
                    "find_interface requires strictly opposite endpoint signs, got {p1}/{p2}"
                )));
            }
        }
        let at = |t: f64| -> [f64; 3] {
            [
                x1[0] + t * (x2[0] - x1[0]),
                x1[1] + t * (x2[1] - x1[1]),
                x1[2] + t * (x2[2] - x1[2]),
            ]
        };
        let f1 = self.eval(x1)?;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut sign_a = f1 > 0.0;
        while b - a > self.root_tol {
            let m = 0.5 * (a + b);
            let fm = self.eval(&at(m))?;
            if (fm > 0.0) == sign_a {
                a = m;
            } else {
                b = m;
                // sign at a unchanged
            }
            if fm == 0.0 {
                a = m;
                b = m;
                sign_a = f1 > 0.0;
            }
        }
        let t = 0.5 * (a + b);
        debug_assert!(t > 0.0 && t < 1.0);
        Ok(t)
    }
}

/// Total map from raw material indices (bit patterns over the applied
/// geometries) to final material indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMap {
    table: Vec<u32>,
    num_final: u32,
}

impl MaterialMap {
    /// Identity map over `2^num_geometries` raw indices.
    pub fn identity(num_geometries: usize) -> Result<Self> {
        Self::check_width(num_geometries)?;
        let n = 1usize << num_geometries;
        Ok(MaterialMap {
            table: (0..n as u32).collect(),
            num_final: n as u32,
        })
    }

    pub fn from_table(table: Vec<u32>, num_geometries: usize) -> Result<Self> {
        Self::check_width(num_geometries)?;
        let n = 1usize << num_geometries;
        if table.len() != n {
            return Err(Error::config(format!(
                "material map must list all {n} raw indices, got {}",
                table.len()
            )));
        }
        let max = *table.iter().max().unwrap();
        // Surjectivity onto 0..=max keeps the final index set dense.
        for m in 0..=max {
            if !table.contains(&m) {
                return Err(Error::config(format!(
                    "material map image is not dense: final material {m} missing"
                )));
            }
        }
        Ok(MaterialMap {
            table,
            num_final: max + 1,
        })
    }

    fn check_width(num_geometries: usize) -> Result<()> {
        if num_geometries > 16 {
            return Err(Error::config("at most 16 geometries are supported"));
        }
        Ok(())
    }

    pub fn apply(&self, m_raw: u32) -> Result<u32> {
        self.table
            .get(m_raw as usize)
            .copied()
            .ok_or_else(|| Error::config(format!("raw material index {m_raw} unmapped")))
    }

    pub fn num_final(&self) -> u32 {
        self.num_final
    }
}
