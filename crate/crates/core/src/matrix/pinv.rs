use super::DenseMatrix;
use crate::error::{Result, SmfError};

/// Default relative singular-value cutoff.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Moore-Penrose inverse together with the numerical rank used to build it.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    pub inverse: DenseMatrix,
    pub rank: usize,
}

/// Rotation threshold for the Jacobi sweeps, relative to the column norms.
const JACOBI_EPS: f64 = 1e-15;
/// Upper bound on sweeps; convergence is quadratic and typically takes < 10.
const MAX_SWEEPS: usize = 60;

/// Moore-Penrose pseudoinverse via a one-sided Jacobi SVD.
///
/// Singular values at or below `rank_tol * sigma_max` are treated as zero.
/// An all-zero input yields the zero matrix of transposed shape.
pub fn pseudoinverse(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    pseudoinverse_with_rank(m, rank_tol).map(|p| p.inverse)
}

pub fn pseudoinverse_with_rank(m: &DenseMatrix, rank_tol: f64) -> Result<Pseudoinverse> {
    if !rank_tol.is_finite() || rank_tol <= 0.0 {
        return Err(SmfError::invalid(format!("rank_tol must be positive, got {rank_tol}")));
    }
    m.ensure_finite()?;
    let (rows, cols) = m.shape();
    if m.is_empty() || m.max_abs() == 0.0 {
        return Ok(Pseudoinverse {
            inverse: DenseMatrix::zeros(cols, rows),
            rank: 0,
        });
    }

    // Orthogonalize the columns of G = M (or Mᵀ when M is wide), so G has
    // at least as many rows as columns. Columns are stored contiguously.
    let wide = rows < cols;
    let (p, q) = if wide { (cols, rows) } else { (rows, cols) };
    let mut g: Vec<Vec<f64>> = (0..q)
        .map(|k| if wide { m.row(k).to_vec() } else { m.col_to_vec(k) })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..q)
        .map(|k| {
            let mut e = vec![0.0; q];
            e[k] = 1.0;
            e
        })
        .collect();
    jacobi_sweeps(&mut g, &mut v);

    // G V = U Σ, so pinv(G) = V Σ⁻¹ Uᵀ = Σ_k v_k g_kᵀ / σ_k²
    let sigma: Vec<f64> = g.iter().map(|c| dot(c, c).sqrt()).collect();
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = rank_tol * sigma_max;
    let mut pinv_g = DenseMatrix::zeros(q, p);
    let mut rank = 0;
    for k in 0..q {
        if sigma[k] <= cutoff {
            continue;
        }
        rank += 1;
        let inv_sq = 1.0 / (sigma[k] * sigma[k]);
        for (i, &vk) in v[k].iter().enumerate() {
            let vik = vk * inv_sq;
            if vik == 0.0 {
                continue;
            }
            for (o, &gj) in pinv_g.row_mut(i).iter_mut().zip(&g[k]) {
                *o += vik * gj;
            }
        }
    }
    let inverse = if wide { pinv_g.transpose() } else { pinv_g };
    Ok(Pseudoinverse { inverse, rank })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hestenes one-sided Jacobi: rotates column pairs of `g` until all are
/// mutually orthogonal, accumulating the rotations in the columns of `v`.
fn jacobi_sweeps(g: &mut [Vec<f64>], v: &mut [Vec<f64>]) {
    let q = g.len();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = dot(&g[i], &g[i]);
                let beta = dot(&g[j], &g[j]);
                let gamma = dot(&g[i], &g[j]);
                if gamma.abs() <= JACOBI_EPS * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = g.split_at_mut(j);
                rotate(&mut left[i], &mut right[0], c, s);
                let (left, right) = v.split_at_mut(j);
                rotate(&mut left[i], &mut right[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Largest violation of the four Moore-Penrose conditions.
    fn mp_violation(m: &DenseMatrix, p: &DenseMatrix) -> f64 {
        let mpm = m.dot(p).dot(m).sub(m).max_abs();
        let pmp = p.dot(m).dot(p).sub(p).max_abs();
        let mp = m.dot(p);
        let pm = p.dot(m);
        let sym1 = mp.sub(&mp.transpose()).max_abs();
        let sym2 = pm.sub(&pm.transpose()).max_abs();
        mpm.max(pmp).max(sym1).max(sym2)
    }

    #[test]
    fn identity_is_its_own_inverse() {
        let i3 = DenseMatrix::identity(3);
        let p = pseudoinverse(&i3, DEFAULT_RANK_TOL).unwrap();
        assert!(p.sub(&i3).max_abs() < 1e-15);
    }

    #[test]
    fn row_of_ones() {
        let m = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let p = pseudoinverse(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.shape(), (2, 1));
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((p[(1, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let z = DenseMatrix::zeros(2, 5);
        let p = pseudoinverse_with_rank(&z, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.rank, 0);
        assert_eq!(p.inverse.shape(), (5, 2));
        assert_eq!(p.inverse.max_abs(), 0.0);
    }

    #[test]
    fn tall_full_column_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DenseMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let p = pseudoinverse_with_rank(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.rank, 2);
        assert!(m.dot(&p.inverse).dot(&m).sub(&m).max_abs() < 1e-10);
        assert!(mp_violation(&m, &p.inverse) < 1e-10);
    }

    #[test]
    fn full_row_rank_gives_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = DenseMatrix::from_fn(3, 11, |_, _| rng.random::<f64>());
        let p = pseudoinverse(&h, DEFAULT_RANK_TOL).unwrap();
        assert!(h.dot(&p).sub(&DenseMatrix::identity(3)).max_abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_is_detected() {
        let h = DenseMatrix::from_rows(&[[0.2, 0.3, 0.5], [0.2, 0.3, 0.5]]).unwrap();
        let p = pseudoinverse_with_rank(&h, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(p.rank, 1);
        assert!(mp_violation(&h, &p.inverse) < 1e-12);
    }

    #[test]
    fn low_rank_products_satisfy_all_four_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let rows = rng.random_range(1..=30);
            let cols = rng.random_range(1..=30);
            let k = rng.random_range(1..=rows.min(cols));
            let b = DenseMatrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..1.0));
            let c = DenseMatrix::from_fn(k, cols, |_, _| rng.random_range(-1.0..1.0));
            let m = b.dot(&c);
            let p = pseudoinverse_with_rank(&m, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(p.rank, k, "{rows}x{cols}");
            let scale = p.inverse.max_abs().max(1.0);
            assert!(mp_violation(&m, &p.inverse) < 1e-9 * scale, "{rows}x{cols} rank {k}");
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(pseudoinverse(&DenseMatrix::identity(2), 0.0).is_err());
        assert!(pseudoinverse(&DenseMatrix::identity(2), f64::NAN).is_err());
    }
}
