//! Univariate B-spline basis on an open (clamped) uniform knot vector.
//!
//! Knots are expressed in "element units": the breakpoints are the integers
//! `0..=num_elems`, with the first and last knot repeated `degree + 1` times.
//! Element `e` covers the knot interval `[e, e+1]` and carries exactly
//! `degree + 1` non-zero basis functions with indices `e..=e+degree`.

/// Open uniform B-spline basis along one axis.
#[derive(Debug, Clone)]
pub struct UniformClampedBasis {
    degree: usize,
    num_elems: usize,
}

impl UniformClampedBasis {
    pub fn new(degree: usize, num_elems: usize) -> Self {
        assert!(degree >= 1);
        assert!(num_elems >= 1);
        Self { degree, num_elems }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Total number of basis functions: `num_elems + degree`.
    pub fn num_funcs(&self) -> usize {
        self.num_elems + self.degree
    }

    /// Knot value at index `i` of the clamped knot vector.
    fn knot(&self, i: usize) -> f64 {
        let p = self.degree;
        if i <= p {
            0.0
        } else if i >= self.num_elems + p {
            self.num_elems as f64
        } else {
            (i - p) as f64
        }
    }

    /// Elements on which function `b` is non-zero, as an inclusive range.
    pub fn support(&self, b: usize) -> (usize, usize) {
        debug_assert!(b < self.num_funcs());
        let lo = b.saturating_sub(self.degree);
        let hi = b.min(self.num_elems - 1);
        (lo, hi)
    }

    /// Evaluate all `degree + 1` non-zero functions on element `elem` at
    /// local knot coordinate `t` (in `[elem, elem + 1]`), together with
    /// derivatives up to `order` with respect to `t`.
    ///
    /// Returns `ders[k][j]` = k-th derivative of function `elem + j`.
    pub fn eval(&self, elem: usize, t: f64, order: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        debug_assert!(elem < self.num_elems);
        let span = elem + p;

        // Triangular table of basis function values and knot differences.
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - self.knot(span + 1 - j);
            right[j] = self.knot(span + j) - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let n_ders = order.min(p);
        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }

        // Derivative recurrence over the knot-difference table.
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let mut s1 = 0;
            let mut s2 = 1;
            a[0][0] = 1.0;
            for k in 1..=n_ders {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    a[s2][j] =
                        (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][(rk + j as isize) as usize];
                    d += a[s2][j] * ndu[(rk + j as isize) as usize][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }

        // Multiply through by the factorial-style factors p!/(p-k)!.
        let mut factor = p as f64;
        for k in 1..=n_ders {
            for j in 0..=p {
                ders[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
        ders
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_hat_at_midpoint() {
        let b = UniformClampedBasis::new(1, 1);
        assert_eq!(b.num_funcs(), 2);
        let d = b.eval(0, 0.5, 0);
        assert!((d[0][0] - 0.5).abs() < 1e-15);
        assert!((d[0][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn partition_of_unity_random_points() {
        for p in 1..=3 {
            for ne in [1usize, 2, 5] {
                if ne + 1 <= p {
                    continue;
                }
                let b = UniformClampedBasis::new(p, ne);
                let mut x = 0.137_f64;
                for _ in 0..200 {
                    x = (x * 9301.0 + 0.7) % 1.0;
                    let e = ((x * ne as f64) as usize).min(ne - 1);
                    let t = e as f64 + x;
                    let d = b.eval(e, t.min(ne as f64), 1);
                    let sum: f64 = d[0].iter().sum();
                    let dsum: f64 = d[1].iter().sum();
                    assert!((sum - 1.0).abs() < 1e-13, "p={p} ne={ne} sum={sum}");
                    assert!(dsum.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = UniformClampedBasis::new(2, 4);
        let e = 1;
        let t = 1.63;
        let h = 1e-6;
        let d = b.eval(e, t, 2);
        let dp = b.eval(e, t + h, 1);
        let dm = b.eval(e, t - h, 1);
        for j in 0..=2 {
            let fd1 = (dp[0][j] - dm[0][j]) / (2.0 * h);
            let fd2 = (dp[1][j] - dm[1][j]) / (2.0 * h);
            assert!((d[1][j] - fd1).abs() < 1e-6 * (1.0 + fd1.abs()));
            assert!((d[2][j] - fd2).abs() < 1e-5 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn interior_quadratic_supports_three_elements() {
        let b = UniformClampedBasis::new(2, 4);
        // Function 3 of 6 is interior: support = elements 1..=3.
        assert_eq!(b.support(3), (1, 3));
        // Clamped end function touches only the first element.
        assert_eq!(b.support(0), (0, 0));
    }

    #[test]
    fn continuity_across_knot() {
        // C^{p-1}: values and first p-1 derivatives agree at shared knots.
        let b = UniformClampedBasis::new(2, 3);
        let left = b.eval(0, 1.0, 2);
        let right = b.eval(1, 1.0, 2);
        // Functions 1 and 2 are live on both sides (indices shift by one).
        for (jl, jr) in [(1usize, 0usize), (2, 1)] {
            assert!((left[0][jl] - right[0][jr]).abs() < 1e-13);
            assert!((left[1][jl] - right[1][jr]).abs() < 1e-13);
        }
    }
}
