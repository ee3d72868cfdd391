//! Constrained least-squares block updates used to propose new H iterates.
//!
//! Each block solves `min ‖X − W H‖_F²` over one factor with the other held
//! fixed, by a few passes of accelerated projected gradient (FISTA with
//! gradient restart) warm-started from the current value.

use crate::matrix::{gemm, simplex::project_in_place, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowSet {
    /// Each row on the probability simplex.
    Simplex,
    /// Entries non-negative.
    NonNegative,
    /// Entries in [0, 1].
    UnitBox,
}

pub(crate) fn project(m: &mut DenseMatrix, set: RowSet) {
    match set {
        RowSet::Simplex => {
            for i in 0..m.rows() {
                project_in_place(m.row_mut(i));
            }
        }
        RowSet::NonNegative => {
            for v in m.as_mut_slice() {
                *v = v.max(0.0);
            }
        }
        RowSet::UnitBox => {
            for v in m.as_mut_slice() {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }
}

fn max_eigenvalue(gram: &DenseMatrix) -> f64 {
    gram.to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// FISTA on `½ tr(Zᵀ Z G) − tr(Zᵀ B)` style objectives where the gradient is
/// supplied by `grad(Y, out)`.
fn fista(
    start: &DenseMatrix,
    lipschitz: f64,
    iters: usize,
    set: RowSet,
    grad: impl Fn(&DenseMatrix, &mut DenseMatrix),
) -> DenseMatrix {
    if lipschitz.is_nan() || lipschitz <= 0.0 {
        return start.clone();
    }
    let step = 1.0 / lipschitz;
    let mut current = start.clone();
    project(&mut current, set);
    let mut y = current.clone();
    let mut next = current.clone();
    let mut g = DenseMatrix::zeros(start.rows(), start.cols());
    let mut t = 1.0f64;
    for _ in 0..iters {
        grad(&y, &mut g);
        for ((n, &yv), &gv) in next.as_mut_slice().iter_mut().zip(y.as_slice()).zip(g.as_slice()) {
            *n = yv - step * gv;
        }
        project(&mut next, set);
        // restart momentum when the step points against the previous move
        let restart: f64 = y
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .zip(current.as_slice())
            .map(|((yv, nv), cv)| (yv - nv) * (nv - cv))
            .sum();
        let t_next = if restart > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if restart > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for ((yv, &nv), &cv) in y.as_mut_slice().iter_mut().zip(next.as_slice()).zip(current.as_slice()) {
            *yv = nv + beta * (nv - cv);
        }
        std::mem::swap(&mut current, &mut next);
        t = t_next;
    }
    current
}

/// Rows of W with H fixed: gradient `W HHᵀ − X Hᵀ`.
pub(crate) fn update_w(x: &DenseMatrix, h: &DenseMatrix, w: &DenseMatrix, iters: usize, set: RowSet) -> DenseMatrix {
    let gram = h.dot_t(h);
    let xht = x.dot_t(h);
    let lip = max_eigenvalue(&gram);
    fista(w, lip, iters, set, |y, out| {
        out.as_mut_slice().copy_from_slice(xht.as_slice());
        gemm(1.0, y, false, &gram, false, -1.0, out);
    })
}

/// H with W fixed: gradient `WᵀW H − Wᵀ X`.
pub(crate) fn update_h(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, iters: usize, set: RowSet) -> DenseMatrix {
    let gram = w.t_dot(w);
    let wtx = w.t_dot(x);
    let lip = max_eigenvalue(&gram);
    fista(h, lip, iters, set, |y, out| {
        out.as_mut_slice().copy_from_slice(wtx.as_slice());
        gemm(1.0, &gram, false, y, false, -1.0, out);
    })
}
