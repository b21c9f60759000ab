//! Gauss-Legendre quadrature on segments, boxes, and reference simplices.
//!
//! Simplex rules are built by collapsing a tensor-product Gauss rule
//! (Duffy transformation). They carry more points than symmetric rules
//! of equal order but are exact to any requested degree and trivially
//! robust. Reference domains: segment `[-1,1]`, box `[-1,1]^dim`,
//! triangle `(0,0),(1,0),(0,1)`, tetrahedron with the unit corners.

/// Nodes and weights of the n-point Gauss-Legendre rule on `[-1,1]`,
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1 && n <= 32);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w)); // ascending order
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Quadrature rule with points in up to three coordinates.
#[derive(Debug, Clone)]
pub struct Rule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Tensor-product rule on `[-1,1]^dim` with `n` points per axis.
pub fn box_rule(dim: usize, n: usize) -> Rule {
    let g = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let top = |k: usize| if k < dim { n } else { 1 };
    for iz in 0..top(2) {
        for iy in 0..top(1) {
            for ix in 0..top(0) {
                let idx = [ix, iy, iz];
                let mut p = [0.0; 3];
                let mut w = 1.0;
                for k in 0..dim {
                    p[k] = g[idx[k]].0;
                    w *= g[idx[k]].1;
                }
                points.push(p);
                weights.push(w);
            }
        }
    }
    Rule { points, weights }
}

/// Gauss points on `[0,1]`.
fn unit_gauss(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Rule on the reference triangle, exact for total degree `order`.
pub fn triangle_rule(order: usize) -> Rule {
    let nu = (order + 3) / 2;
    let nv = (order + 2) / 2;
    let gu = unit_gauss(nu.max(1));
    let gv = unit_gauss(nv.max(1));
    let mut points = Vec::with_capacity(gu.len() * gv.len());
    let mut weights = Vec::with_capacity(gu.len() * gv.len());
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            points.push([u, v * (1.0 - u), 0.0]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    Rule { points, weights }
}

/// Rule on the reference tetrahedron, exact for total degree `order`.
pub fn tet_rule(order: usize) -> Rule {
    let nu = (order + 4) / 2;
    let nv = (order + 3) / 2;
    let nw = (order + 2) / 2;
    let gu = unit_gauss(nu.max(1));
    let gv = unit_gauss(nv.max(1));
    let gw = unit_gauss(nw.max(1));
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            for &(w, ww) in &gw {
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                points.push([u, y, z]);
                weights.push(wu * wv * ww * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
        }
    }
    Rule { points, weights }
}

/// Simplex rule for the given dimension.
pub fn simplex_rule(dim: usize, order: usize) -> Rule {
    match dim {
        2 => triangle_rule(order),
        3 => tet_rule(order),
        _ => panic!("simplex rule for dim {dim}"),
    }
}

/// Measure of the reference simplex: 1/2 in 2D, 1/6 in 3D.
pub fn ref_simplex_measure(dim: usize) -> f64 {
    match dim {
        2 => 0.5,
        3 => 1.0 / 6.0,
        _ => panic!("reference simplex for dim {dim}"),
    }
}
