//! Dense solve, condition estimation, and error norms.

use super::assemble::{eval_solution, eval_solution_grad, AssembledSystem};
use crate::error::{Error, Result};
use crate::parallel::RankState;
use nalgebra::{DMatrix, DVector};

#[derive(Debug)]
pub struct SolveReport {
    /// Solution on the full dof vector (inactive dofs zero).
    pub solution: DVector<f64>,
    /// Ratio of extreme singular values of the active submatrix.
    pub condition: Option<f64>,
    /// Dofs with a nonzero row (supported in non-void material).
    pub active_dofs: usize,
}

/// Solve the assembled system on its active dofs. Rows that are exactly
/// zero (basis functions supported only in void) are excluded. A singular
/// active block is reported as an error naming the zero-energy dofs.
pub fn solve_and_measure(
    system: &AssembledSystem,
    want_condition: bool,
) -> Result<SolveReport> {
    let n = system.a.nrows();
    let scale = system
        .a
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::invariant("assembled matrix is all zero".to_string()));
    }
    let active: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| system.a[(i, j)].abs() > 1e-14 * scale))
        .collect();
    if active.is_empty() {
        return Err(Error::invariant("no active dofs".to_string()));
    }
    let na = active.len();
    let mut aa = DMatrix::<f64>::zeros(na, na);
    let mut bb = DVector::<f64>::zeros(na);
    for (i, &gi) in active.iter().enumerate() {
        bb[i] = system.rhs[gi];
        for (j, &gj) in active.iter().enumerate() {
            aa[(i, j)] = system.a[(gi, gj)];
        }
    }

    let condition = if want_condition {
        let svd = aa.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-14 * smax {
            return Err(singular_error(&aa, &active));
        }
        Some(smax / smin)
    } else {
        None
    };

    let lu = aa.clone().lu();
    let x = lu
        .solve(&bb)
        .ok_or_else(|| singular_error(&aa, &active))?;
    // Residual check guards against a silently bad factorization.
    let res = (&aa * &x - &bb).amax();
    let bscale = bb.amax().max(scale);
    if !res.is_finite() || res > 1e-6 * bscale {
        return Err(singular_error(&aa, &active));
    }

    let mut solution = DVector::<f64>::zeros(n);
    for (i, &gi) in active.iter().enumerate() {
        solution[gi] = x[i];
    }
    Ok(SolveReport {
        solution,
        condition,
        active_dofs: na,
    })
}

/// Identify near-null-space dofs for the singular-system diagnostic.
fn singular_error(aa: &DMatrix<f64>, active: &[usize]) -> Error {
    let svd = aa.clone().svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut worst = Vec::new();
    if let Some(vt) = svd.v_t {
        let k = sv.imin();
        let row = vt.row(k);
        let mut entries: Vec<(f64, usize)> = row
            .iter()
            .enumerate()
            .map(|(i, v)| (v.abs(), active[i]))
            .collect();
        entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        worst = entries.into_iter().take(5).map(|(_, d)| d).collect();
    }
    Error::invariant(format!(
        "singular system (sigma_min/sigma_max = {:.3e}); zero-energy dofs near {:?}",
        sv.min() / smax,
        worst
    ))
}

/// L2 and H1-semi errors of a scalar solution against an exact field,
/// integrated over the bulk clusters of non-void materials. Returns
/// (l2_abs, l2_rel, h1_abs, h1_rel).
pub fn l2_h1_errors(
    state: &RankState,
    solution: &DVector<f64>,
    exact: &dyn Fn(&[f64; 3]) -> f64,
    exact_grad: &dyn Fn(&[f64; 3]) -> [f64; 2],
    void: &std::collections::BTreeSet<u32>,
) -> Result<(f64, f64, f64, f64)> {
    let jac: f64 = (0..state.bg.dim()).map(|k| 0.5 * state.bg.spec.h[k]).product();
    let (mut l2, mut l2x, mut h1, mut h1x) = (0.0, 0.0, 0.0, 0.0);
    for (m, clusters) in &state.clusters.bulk {
        if void.contains(m) {
            continue;
        }
        for cl in clusters {
            for p in &cl.points {
                let x = state.bg.interpolate_space(cl.bg_elem, p.xi);
                let w = p.w * jac;
                let uh = eval_solution(state, cl, p, solution, 1)?[0];
                let gh = eval_solution_grad(state, cl, p, solution, 1)?[0];
                let ue = exact(&x);
                let ge = exact_grad(&x);
                l2 += w * (uh - ue) * (uh - ue);
                l2x += w * ue * ue;
                let dx = [gh[0] - ge[0], gh[1] - ge[1]];
                h1 += w * (dx[0] * dx[0] + dx[1] * dx[1]);
                h1x += w * (ge[0] * ge[0] + ge[1] * ge[1]);
            }
        }
    }
    Ok((
        l2.sqrt(),
        (l2 / l2x.max(1e-300)).sqrt(),
        h1.sqrt(),
        (h1 / h1x.max(1e-300)).sqrt(),
    ))
}
