//! Concentrated least-squares objective and its gradient.
//!
//! W is eliminated as `W = X H⁺`, so the objective is a function of H alone:
//!
//! ```text
//! f(H) = ‖X − X H⁺ H‖_F
//!      + λ₁ ‖X H⁺ 1 − 1‖₁            (when W is row-stochastic)
//!      + λ₁ ‖H 1 − 1‖₁               (when H is row-stochastic)
//!      + λ₂ Σ max(0, −X H⁺) + λ₂ Σ max(0, −H) + λ₂ Σ max(0, H − 1)
//! ```
//!
//! In projected mode `X H⁺` is first moved onto its feasible set (row simplex,
//! or the non-negative orthant), so the W penalties vanish and the residual is
//! that of an exactly feasible pair.

use crate::error::{Result, SmfError};
use crate::matrix::{frobenius_norm, gemm, pseudoinverse_with_rank, DenseMatrix, DEFAULT_RANK_TOL};

use super::{Mode, SolverConfig};
use crate::matrix::simplex::project_in_place;

/// Penalty weights and which adding-up terms are active.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weights {
    pub sum1: f64,
    pub nonneg: f64,
    pub w_rows: bool,
    pub h_rows: bool,
    pub project_w: bool,
}

impl From<&SolverConfig> for Weights {
    fn from(c: &SolverConfig) -> Self {
        Weights {
            sum1: c.penalty_sum1,
            nonneg: c.penalty_nonneg,
            w_rows: c.orientation.w_stochastic(),
            h_rows: c.orientation.h_stochastic(),
            project_w: c.mode == Mode::Projected,
        }
    }
}

/// Everything computed on the way to `f(H)`; reused by the gradient.
pub(crate) struct Evaluation {
    pub value: f64,
    pub residual_norm: f64,
    /// X H⁺ (N x R), projected onto its feasible set in projected mode
    pub w: DenseMatrix,
    /// H⁺ (M x R)
    pub pinv: DenseMatrix,
    /// X − X H⁺ H (N x M)
    pub residual: DenseMatrix,
}

fn checked_pinv(h: &DenseMatrix) -> Result<DenseMatrix> {
    let p = pseudoinverse_with_rank(h, DEFAULT_RANK_TOL)?;
    if p.rank < h.rows() {
        return Err(SmfError::RankDeficient {
            rank: p.rank,
            expected: h.rows(),
        });
    }
    Ok(p.inverse)
}

/// `X H⁺`: the mixing weights implied by H. Exact when `X = W H` and H has
/// full row rank.
pub fn concentrate_w(x: &DenseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != h.cols() {
        return Err(SmfError::shape(format!(
            "X has {} columns but H has {}",
            x.cols(),
            h.cols()
        )));
    }
    x.ensure_finite()?;
    let pinv = checked_pinv(h)?;
    Ok(x.dot(&pinv))
}

/// Penalized concentrated objective for H.
pub fn objective(x: &DenseMatrix, h: &DenseMatrix, config: &SolverConfig) -> Result<f64> {
    if x.cols() != h.cols() || h.rows() != config.rank {
        return Err(SmfError::shape(format!(
            "X is {}x{}, H is {}x{}, rank {}",
            x.rows(),
            x.cols(),
            h.rows(),
            h.cols(),
            config.rank
        )));
    }
    x.ensure_finite()?;
    h.ensure_finite()?;
    evaluate(x, h, Weights::from(config)).map(|e| e.value)
}

pub(crate) fn evaluate(x: &DenseMatrix, h: &DenseMatrix, wt: Weights) -> Result<Evaluation> {
    let pinv = checked_pinv(h)?;
    let mut w = x.dot(&pinv);
    if wt.project_w {
        for i in 0..w.rows() {
            let row = w.row_mut(i);
            if wt.w_rows {
                project_in_place(row);
            } else {
                row.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }
    let mut residual = x.clone();
    gemm(-1.0, &w, false, h, false, 1.0, &mut residual);
    let residual_norm = frobenius_norm(&residual);
    let value = residual_norm + penalties(&w, h, wt);
    Ok(Evaluation {
        value,
        residual_norm,
        w,
        pinv,
        residual,
    })
}

fn penalties(w: &DenseMatrix, h: &DenseMatrix, wt: Weights) -> f64 {
    let mut sum1 = 0.0;
    let mut neg = 0.0;
    for row in w.row_iter() {
        if wt.w_rows {
            sum1 += (row.iter().sum::<f64>() - 1.0).abs();
        }
        neg += row.iter().map(|&v| (-v).max(0.0)).sum::<f64>();
    }
    for row in h.row_iter() {
        if wt.h_rows {
            sum1 += (row.iter().sum::<f64>() - 1.0).abs();
        }
        neg += row.iter().map(|&v| (-v).max(0.0) + (v - 1.0).max(0.0)).sum::<f64>();
    }
    wt.sum1 * sum1 + wt.nonneg * neg
}

/// (Sub)gradient of the objective with respect to H, evaluated from a
/// finished [`Evaluation`].
///
/// The residual term uses the variable-projection identity: since `X H⁺` is
/// the unconstrained least-squares W, the derivative through W vanishes and
/// `∇ ‖X − X H⁺ H‖ = −(X H⁺)ᵀ E / ‖E‖`. Penalties on `X H⁺` are pulled back
/// through `d(H⁺) = (I − H⁺H) dHᵀ (HHᵀ)⁻¹ − H⁺ dH H⁺`.
///
/// In projected mode the returned direction holds the projected W fixed, so
/// it is a descent heuristic rather than the exact gradient.
pub(crate) fn gradient(h: &DenseMatrix, ev: &Evaluation, wt: Weights) -> DenseMatrix {
    let (n, r) = ev.w.shape();
    if wt.project_w {
        let mut grad = DenseMatrix::zeros(r, h.cols());
        if ev.residual_norm > 0.0 {
            gemm(
                -1.0 / ev.residual_norm,
                &ev.w,
                true,
                &ev.residual,
                false,
                0.0,
                &mut grad,
            );
        }
        add_h_penalty_gradient(h, wt, &mut grad);
        return grad;
    }

    // Γ = ∂(penalties)/∂W
    let mut gamma = DenseMatrix::zeros(n, r);
    for i in 0..n {
        let wrow = ev.w.row(i);
        let s = if wt.w_rows {
            wt.sum1 * sign(wrow.iter().sum::<f64>() - 1.0)
        } else {
            0.0
        };
        for (g, &v) in gamma.row_mut(i).iter_mut().zip(wrow) {
            *g = s - if v < 0.0 { wt.nonneg } else { 0.0 };
        }
    }

    // (HHᵀ)⁻¹ = H⁺ᵀ H⁺ for full row rank H
    let gram_inv = ev.pinv.t_dot(&ev.pinv);
    // left factor: (HHᵀ)⁻¹ Γᵀ − Wᵀ/‖E‖, applied to E in one pass
    let mut left = gram_inv.dot_t(&gamma);
    if ev.residual_norm > 0.0 {
        let inv = 1.0 / ev.residual_norm;
        for k in 0..r {
            for i in 0..n {
                left[(k, i)] -= ev.w[(i, k)] * inv;
            }
        }
    }
    let mut grad = left.dot(&ev.residual);

    // − Wᵀ Γ H⁺ᵀ
    let wtg = ev.w.t_dot(&gamma);
    gemm(-1.0, &wtg, false, &ev.pinv, true, 1.0, &mut grad);
    add_h_penalty_gradient(h, wt, &mut grad);
    grad
}

fn add_h_penalty_gradient(h: &DenseMatrix, wt: Weights, grad: &mut DenseMatrix) {
    for k in 0..h.rows() {
        let row_term = if wt.h_rows {
            wt.sum1 * sign(h.row(k).iter().sum::<f64>() - 1.0)
        } else {
            0.0
        };
        for j in 0..h.cols() {
            let v = h[(k, j)];
            let mut g = row_term;
            if v < 0.0 {
                g -= wt.nonneg;
            } else if v > 1.0 {
                g += wt.nonneg;
            }
            grad[(k, j)] += g;
        }
    }
}

/// Analytic gradient of [`objective`] with respect to H.
pub fn objective_gradient(x: &DenseMatrix, h: &DenseMatrix, config: &SolverConfig) -> Result<DenseMatrix> {
    objective(x, h, config)?;
    let wt = Weights::from(config);
    let ev = evaluate(x, h, wt)?;
    Ok(gradient(h, &ev, wt))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::Orientation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(rank: usize, o: Orientation) -> SolverConfig {
        SolverConfig::new(rank, o)
    }

    #[test]
    fn zero_at_exact_feasible_factorization() {
        let w = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.2, 0.8]]).unwrap();
        let h = DenseMatrix::from_rows(&[[0.6, 0.4, 0.0], [0.0, 0.3, 0.7]]).unwrap();
        let x = w.dot(&h);
        for o in [Orientation::WRowsSumTo1, Orientation::Both, Orientation::HRowsSumTo1] {
            assert!(objective(&x, &h, &cfg(2, o)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn two_by_two_identity_h() {
        let x = DenseMatrix::from_rows(&[[0.6, 0.4], [0.2, 0.8]]).unwrap();
        let h = DenseMatrix::identity(2);
        let f = objective(&x, &h, &cfg(2, Orientation::WRowsSumTo1)).unwrap();
        assert!(f.abs() < 1e-12, "{f}");
    }

    #[test]
    fn upper_bound_penalty_is_charged() {
        // H row 0 has an entry 1.2; W = I so X = H and the residual vanishes
        let h = DenseMatrix::from_rows(&[[1.2, 0.0, 0.0], [0.0, 0.5, 0.5]]).unwrap();
        let x = h.clone();
        let c = cfg(2, Orientation::WRowsSumTo1);
        let f = objective(&x, &h, &c).unwrap();
        assert!((f - c.penalty_nonneg * 0.2).abs() < 1e-10, "{f}");
    }

    #[test]
    fn concentrate_recovers_w() {
        let w = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]).unwrap();
        let h = DenseMatrix::from_rows(&[[0.6, 0.4, 0.0], [0.0, 0.3, 0.7]]).unwrap();
        let x = w.dot(&h);
        assert!(concentrate_w(&x, &h).unwrap().sub(&w).max_abs() < 1e-8);
        assert!(concentrate_w(&h, &h).unwrap().sub(&DenseMatrix::identity(2)).max_abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_h_is_rejected() {
        let h = DenseMatrix::from_rows(&[[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]]).unwrap();
        let x = DenseMatrix::filled(4, 3, 0.3);
        assert!(matches!(
            concentrate_w(&x, &h),
            Err(SmfError::RankDeficient { rank: 1, expected: 2 })
        ));
        assert!(matches!(
            objective(&x, &h, &cfg(2, Orientation::WRowsSumTo1)),
            Err(SmfError::RankDeficient { .. })
        ));
    }

    /// Central finite differences as an independent check on the analytic
    /// gradient, at a point away from the penalty kinks.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, m, r) = (40, 9, 3);
        let x = DenseMatrix::from_fn(n, m, |_, _| rng.random::<f64>());
        let h = DenseMatrix::from_fn(r, m, |_, _| rng.random_range(0.1..0.9));
        for o in [Orientation::WRowsSumTo1, Orientation::Both] {
            let c = cfg(r, o);
            let g = objective_gradient(&x, &h, &c).unwrap();
            let eps = 1e-7;
            let mut worst: f64 = 0.0;
            for k in 0..r {
                for j in 0..m {
                    let mut hp = h.clone();
                    hp[(k, j)] += eps;
                    let mut hm = h.clone();
                    hm[(k, j)] -= eps;
                    let fd = (objective(&x, &hp, &c).unwrap() - objective(&x, &hm, &c).unwrap()) / (2.0 * eps);
                    worst = worst.max((fd - g[(k, j)]).abs() / (1.0 + fd.abs()));
                }
            }
            assert!(worst < 1e-4, "{o:?}: worst relative gradient error {worst}");
        }
    }
}
