//! Uniqueness and natural bounds for stochastic factorizations.
//!
//! Any invertible `A` with `A 1 = 1` maps a factorization `(W, H)` to the
//! observationally equivalent `(W A, A⁻¹ H)`; only non-negativity limits the
//! choice. The factorization is unique up to relabeling iff no support set of
//! W (or of H) is contained in another. When that fails, the feasible `A`
//! along each coordinate axis `A = I + a (e_p e_qᵀ − e_p e_pᵀ)` form an
//! interval whose endpoints are minima of likelihood ratios.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmfError};
use crate::factors::FactorPair;
use crate::matrix::DenseMatrix;

/// Zero threshold for factors coming out of the estimator.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;
/// Random-walk step of the feasible-A sampler.
pub const DEFAULT_SAMPLER_STEP: f64 = 0.05;
/// Upper edges of the width histogram buckets; a final bucket collects the rest.
pub const WIDTH_BUCKET_EDGES: [f64; 5] = [0.0, 0.001, 0.01, 0.02, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SupportSets {
    /// `w[r]`: rows i with `|W_ir| > zero_tol`.
    pub w: Vec<Vec<usize>>,
    /// `h[r]`: columns j with `|H_rj| > zero_tol`.
    pub h: Vec<Vec<usize>>,
    pub zero_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    WSubset,
    HSubset,
}

/// Support of factor `r1` contained in that of `r2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub r1: usize,
    pub r2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub unique: bool,
    pub violations: Vec<Violation>,
    /// Rows of W whose support is exactly `{r}`.
    pub anchor_rows: Vec<Vec<usize>>,
    /// Columns of H whose support is exactly `{r}`.
    pub anchor_cols: Vec<Vec<usize>>,
}

impl UniquenessReport {
    /// Every factor has an anchor row and an anchor column.
    pub fn fully_anchored(&self) -> bool {
        self.anchor_rows.iter().all(|a| !a.is_empty()) && self.anchor_cols.iter().all(|a| !a.is_empty())
    }
}

/// Identified interval for the single free parameter on axis `(r1, r2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBound {
    pub r1: usize,
    pub r2: usize,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

impl AxisBound {
    pub fn contains(&self, a: f64, slack: f64) -> bool {
        a >= self.lower - slack && a <= self.upper + slack
    }
}

/// An R x R matrix with unit row sums relating equivalent factorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    a: DenseMatrix,
}

impl MixingMatrix {
    pub const ROW_SUM_TOL: f64 = 1e-10;

    pub fn new(a: DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(SmfError::shape(format!(
                "mixing matrix must be square, got {:?}",
                a.shape()
            )));
        }
        for (i, s) in a.row_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(SmfError::invalid(format!("row {i} of A sums to {s}")));
            }
        }
        if inverse(&a).is_none() {
            return Err(SmfError::RankDeficient {
                rank: a.rows().saturating_sub(1),
                expected: a.rows(),
            });
        }
        Ok(MixingMatrix { a })
    }

    pub fn identity(r: usize) -> Self {
        MixingMatrix {
            a: DenseMatrix::identity(r),
        }
    }

    /// `I + a (e_r1 e_r2ᵀ − e_r1 e_r1ᵀ)`: row r1 becomes `(1 − a)` on the
    /// diagonal and `a` in column r2.
    pub fn axis(r: usize, r1: usize, r2: usize, a: f64) -> Self {
        let mut m = DenseMatrix::identity(r);
        m[(r1, r1)] = 1.0 - a;
        m[(r1, r2)] = a;
        MixingMatrix { a: m }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn inverse(&self) -> Option<DenseMatrix> {
        inverse(&self.a)
    }

    /// The `(r1, r2, a)` parameter if exactly one off-diagonal entry is nonzero.
    pub fn single_axis(&self) -> Option<(usize, usize, f64)> {
        let r = self.a.rows();
        let mut found = None;
        for i in 0..r {
            for j in 0..r {
                if i != j && self.a[(i, j)] != 0.0 {
                    if found.is_some() {
                        return None;
                    }
                    found = Some((i, j, self.a[(i, j)]));
                }
            }
        }
        found
    }

    /// Largest entry of `|A − I|`.
    pub fn deviation_from_identity(&self) -> f64 {
        self.a.sub(&DenseMatrix::identity(self.a.rows())).max_abs()
    }

    /// Distance to the nearest permutation matrix in max-abs norm.
    pub fn deviation_from_permutation(&self) -> f64 {
        let r = self.a.rows();
        let cost: Vec<Vec<f64>> = (0..r).map(|i| (0..r).map(|j| -self.a[(i, j)]).collect()).collect();
        let assign = crate::synthetic::hungarian(&cost);
        let mut p = DenseMatrix::zeros(r, r);
        for (i, &j) in assign.iter().enumerate() {
            p[(i, j)] = 1.0;
        }
        self.a.sub(&p).max_abs()
    }
}

fn inverse(a: &DenseMatrix) -> Option<DenseMatrix> {
    let m = a.to_nalgebra();
    let lu = m.lu();
    if lu.determinant().abs() < 1e-12 {
        return None;
    }
    lu.try_inverse().map(|inv| DenseMatrix::from_nalgebra(&inv))
}

pub fn support_sets(factors: &FactorPair, zero_tol: f64) -> SupportSets {
    let (w, h) = (factors.w(), factors.h());
    let r = factors.rank();
    let w_sets = (0..r)
        .map(|k| (0..w.rows()).filter(|&i| w[(i, k)].abs() > zero_tol).collect())
        .collect();
    let h_sets = (0..r)
        .map(|k| (0..h.cols()).filter(|&j| h[(k, j)].abs() > zero_tol).collect())
        .collect();
    SupportSets {
        w: w_sets,
        h: h_sets,
        zero_tol,
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    // both sorted ascending
    let mut it = b.iter();
    a.iter().all(|x| it.by_ref().any(|y| y == x))
}

/// Support-set test: unique iff no `I_r1 ⊆ I_r2` and no `J_r1 ⊆ J_r2` for
/// `r1 ≠ r2`.
pub fn check_uniqueness(factors: &FactorPair, zero_tol: f64) -> UniquenessReport {
    let s = support_sets(factors, zero_tol);
    let r = factors.rank();
    let mut violations = Vec::new();
    for r1 in 0..r {
        for r2 in 0..r {
            if r1 == r2 {
                continue;
            }
            if is_subset(&s.w[r1], &s.w[r2]) {
                violations.push(Violation {
                    kind: ViolationKind::WSubset,
                    r1,
                    r2,
                });
            }
            if is_subset(&s.h[r1], &s.h[r2]) {
                violations.push(Violation {
                    kind: ViolationKind::HSubset,
                    r1,
                    r2,
                });
            }
        }
    }

    let (w, h) = (factors.w(), factors.h());
    let mut anchor_rows = vec![Vec::new(); r];
    for i in 0..w.rows() {
        let support: Vec<usize> = (0..r).filter(|&k| w[(i, k)].abs() > zero_tol).collect();
        if let [k] = support[..] {
            anchor_rows[k].push(i);
        }
    }
    let mut anchor_cols = vec![Vec::new(); r];
    for j in 0..h.cols() {
        let support: Vec<usize> = (0..r).filter(|&k| h[(k, j)].abs() > zero_tol).collect();
        if let [k] = support[..] {
            anchor_cols[k].push(j);
        }
    }

    UniquenessReport {
        unique: violations.is_empty(),
        violations,
        anchor_rows,
        anchor_cols,
    }
}

/// Interval of feasible `a` on every axis `(r1, r2)`, `r1 ≠ r2`, in
/// row-major order of the pair.
///
/// `lower = −min_i W_i,r2 / W_i,r1` over rows with `W_i,r1 > zero_tol`;
/// `upper = min_j H_r1,j / H_r2,j` over columns with `H_r2,j > zero_tol`.
/// A numerator at or below `zero_tol` pins that endpoint to 0.
pub fn natural_bounds(factors: &FactorPair, zero_tol: f64) -> Result<Vec<AxisBound>> {
    let (w, h) = (factors.w(), factors.h());
    let r = factors.rank();
    for k in 0..r {
        if (0..w.rows()).all(|i| w[(i, k)] <= zero_tol) {
            return Err(SmfError::DegenerateFactor { factor: k, side: "W" });
        }
        if (0..h.cols()).all(|j| h[(k, j)] <= zero_tol) {
            return Err(SmfError::DegenerateFactor { factor: k, side: "H" });
        }
    }

    let ratio = |num: f64, den: f64| if num <= zero_tol { 0.0 } else { num / den };
    let mut out = Vec::with_capacity(r * (r - 1));
    for r1 in 0..r {
        for r2 in 0..r {
            if r1 == r2 {
                continue;
            }
            let low = (0..w.rows())
                .filter(|&i| w[(i, r1)] > zero_tol)
                .map(|i| ratio(w[(i, r2)], w[(i, r1)]))
                .fold(f64::INFINITY, f64::min);
            let high = (0..h.cols())
                .filter(|&j| h[(r2, j)] > zero_tol)
                .map(|j| ratio(h[(r1, j)], h[(r2, j)]))
                .fold(f64::INFINITY, f64::min);
            let lower = -low;
            out.push(AxisBound {
                r1,
                r2,
                lower,
                upper: high,
                width: high - lower,
            });
        }
    }
    Ok(out)
}

/// `W A ≥ −zero_tol` and `A⁻¹ H ≥ −zero_tol` elementwise, with A invertible.
pub fn is_feasible_mixing(factors: &FactorPair, a: &DenseMatrix, zero_tol: f64) -> bool {
    let Some(inv) = inverse(a) else { return false };
    let wa = factors.w().dot(a);
    if wa.min_value() < -zero_tol {
        return false;
    }
    inv.dot(factors.h()).min_value() >= -zero_tol
}

/// Random-walk search over unit-row-sum matrices, keeping only feasible ones.
///
/// The walk starts at the identity. Each proposal perturbs either every
/// off-diagonal entry or a single one by `step · N(0, 1)` and re-balances the
/// diagonal so rows keep summing to one; infeasible proposals are rejected
/// and the walk stays put. With probability 0.1 the walk first returns to the
/// identity, so single-axis states recur. One state is recorded per draw, the
/// first being the identity itself.
pub fn sample_feasible_a(
    factors: &FactorPair,
    n_samples: usize,
    seed: u64,
    step: f64,
    zero_tol: f64,
) -> Vec<MixingMatrix> {
    let r = factors.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identity = DenseMatrix::identity(r);
    let mut state = identity.clone();
    let mut out = Vec::with_capacity(n_samples);
    if n_samples == 0 {
        return out;
    }
    out.push(MixingMatrix::identity(r));
    if r < 2 {
        out.resize(n_samples, MixingMatrix::identity(r));
        return out;
    }

    let axis_of = |m: &DenseMatrix| MixingMatrix { a: m.clone() }.single_axis();
    while out.len() < n_samples {
        if rng.random::<f64>() < 0.1 {
            state = identity.clone();
        }
        let mut proposal;
        if rng.random::<bool>() {
            let r1 = rng.random_range(0..r);
            let mut r2 = rng.random_range(0..r - 1);
            if r2 >= r1 {
                r2 += 1;
            }
            let on_axis = match axis_of(&state) {
                None => state == identity,
                Some((p, q, _)) => p == r1 && q == r2,
            };
            proposal = if on_axis { state.clone() } else { identity.clone() };
            let z: f64 = rng.sample(StandardNormal);
            proposal[(r1, r2)] += step * z;
        } else {
            proposal = state.clone();
            for i in 0..r {
                for j in 0..r {
                    if i != j {
                        let z: f64 = rng.sample(StandardNormal);
                        proposal[(i, j)] += step * z;
                    }
                }
            }
        }
        for i in 0..r {
            let off: f64 = (0..r).filter(|&j| j != i).map(|j| proposal[(i, j)]).sum();
            proposal[(i, i)] = 1.0 - off;
        }
        if is_feasible_mixing(factors, &proposal, zero_tol) {
            state = proposal;
        }
        out.push(MixingMatrix { a: state.clone() });
    }
    out
}

/// `‖x̄ − w̄ᵀ H‖_∞`, where `x̄` and `w̄` are the column means of X and W.
pub fn average_consistency_diagnostic(x: &DenseMatrix, factors: &FactorPair) -> Result<f64> {
    let (w, h) = (factors.w(), factors.h());
    if x.rows() != w.rows() || x.cols() != h.cols() {
        return Err(SmfError::shape(format!(
            "X is {:?} but W H is {}x{}",
            x.shape(),
            w.rows(),
            h.cols()
        )));
    }
    let x_bar = x.col_means();
    let w_bar = DenseMatrix::row_vector(&w.col_means());
    let implied = w_bar.dot(h);
    Ok(x_bar
        .iter()
        .zip(implied.as_slice())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthBucket {
    pub lower: f64,
    /// `None` for the open-ended last bucket.
    pub upper: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub max_width: f64,
    pub widths_histogram: Vec<WidthBucket>,
}

/// Empirical cross-check of the analytic bounds by the feasible-A sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    /// Samples that differ from the identity.
    pub moved: usize,
    pub max_deviation_from_identity: f64,
    pub single_axis_samples: usize,
    /// Single-axis samples lying outside their bound by more than `step`.
    pub single_axis_outside_bounds: usize,
    pub max_row_sum_error: f64,
}

/// Serialized uniqueness + bounds report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub unique: bool,
    pub violations: Vec<Violation>,
    /// Anchor rows of W per factor.
    pub anchors: BTreeMap<usize, Vec<usize>>,
    /// Anchor columns of H per factor.
    pub anchor_columns: BTreeMap<usize, Vec<usize>>,
    pub bounds: Vec<AxisBound>,
    pub summary: BoundsSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleSummary>,
}

pub fn summarize_bounds(bounds: &[AxisBound]) -> BoundsSummary {
    let max_width = bounds.iter().map(|b| b.width).fold(0.0, f64::max);
    let edges = WIDTH_BUCKET_EDGES;
    let mut buckets: Vec<WidthBucket> = edges
        .windows(2)
        .map(|e| WidthBucket {
            lower: e[0],
            upper: Some(e[1]),
            count: 0,
        })
        .collect();
    buckets.push(WidthBucket {
        lower: edges[edges.len() - 1],
        upper: None,
        count: 0,
    });
    for b in bounds {
        // buckets are [lower, upper) except the [0.02, 1] bucket, closed at 1
        let idx = match edges.windows(2).position(|e| b.width >= e[0] && b.width < e[1]) {
            Some(i) => i,
            None if b.width == edges[edges.len() - 1] => edges.len() - 2,
            None => edges.len() - 1,
        };
        buckets[idx].count += 1;
    }
    BoundsSummary {
        max_width,
        widths_histogram: buckets,
    }
}

pub fn analyze(factors: &FactorPair, zero_tol: f64) -> Result<AnalysisReport> {
    let u = check_uniqueness(factors, zero_tol);
    let bounds = natural_bounds(factors, zero_tol)?;
    let summary = summarize_bounds(&bounds);
    Ok(AnalysisReport {
        unique: u.unique,
        violations: u.violations,
        anchors: u.anchor_rows.into_iter().enumerate().collect(),
        anchor_columns: u.anchor_cols.into_iter().enumerate().collect(),
        bounds,
        summary,
        oracle: None,
    })
}

/// Runs the sampler and checks its single-axis draws against `bounds`.
pub fn oracle_summary(
    factors: &FactorPair,
    bounds: &[AxisBound],
    n_samples: usize,
    seed: u64,
    step: f64,
    zero_tol: f64,
) -> OracleSummary {
    let samples = sample_feasible_a(factors, n_samples, seed, step, zero_tol);
    let r = factors.rank();
    let mut s = OracleSummary {
        samples: samples.len(),
        seed,
        step,
        moved: 0,
        max_deviation_from_identity: 0.0,
        single_axis_samples: 0,
        single_axis_outside_bounds: 0,
        max_row_sum_error: 0.0,
    };
    for a in &samples {
        let dev = a.deviation_from_identity();
        if dev > 0.0 {
            s.moved += 1;
        }
        s.max_deviation_from_identity = s.max_deviation_from_identity.max(dev);
        for sum in a.matrix().row_sums() {
            s.max_row_sum_error = s.max_row_sum_error.max((sum - 1.0).abs());
        }
        if let Some((r1, r2, v)) = a.single_axis() {
            s.single_axis_samples += 1;
            let idx = r1 * (r - 1) + if r2 > r1 { r2 - 1 } else { r2 };
            if !bounds[idx].contains(v, step) {
                s.single_axis_outside_bounds += 1;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::Orientation;

    fn pair(w: &[&[f64]], h: &[&[f64]]) -> FactorPair {
        FactorPair::new(
            DenseMatrix::from_rows(w).unwrap(),
            DenseMatrix::from_rows(h).unwrap(),
            Orientation::Both,
        )
        .unwrap()
    }

    fn worked_example() -> FactorPair {
        pair(&[&[0.7, 0.3], &[0.4, 0.6]], &[&[0.6, 0.4], &[0.2, 0.8]])
    }

    fn anchored() -> FactorPair {
        pair(
            &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.3, 0.3, 0.4]],
            &[&[0.5, 0.0, 0.0, 0.5], &[0.0, 0.6, 0.0, 0.4], &[0.0, 0.0, 0.1, 0.9]],
        )
    }

    #[test]
    fn support_set_examples() {
        let p = pair(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5]]);
        let s = support_sets(&p, 1e-9);
        assert_eq!(s.w, vec![vec![0], vec![1]]);
        assert_eq!(s.h, vec![vec![0, 1], vec![1, 2]]);

        let p = pair(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.2, 0.8], &[0.3, 0.7]]);
        assert_eq!(support_sets(&p, 0.0).h, vec![vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn entry_equal_to_tolerance_is_zero() {
        let p = pair(&[&[0.5, 0.5]], &[&[0.25, 0.75], &[0.5, 0.5]]);
        let s = support_sets(&p, 0.25);
        assert_eq!(s.h[0], vec![1]);
    }

    #[test]
    fn anchored_factors_are_unique() {
        let u = check_uniqueness(&anchored(), 0.0);
        assert!(u.unique);
        assert!(u.fully_anchored());
        assert_eq!(u.anchor_rows, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(u.anchor_cols, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn h_subset_is_reported() {
        let p = pair(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.5, 0.5, 0.0], &[0.2, 0.3, 0.5]]);
        let u = check_uniqueness(&p, 0.0);
        assert!(!u.unique);
        assert_eq!(
            u.violations,
            vec![Violation {
                kind: ViolationKind::HSubset,
                r1: 0,
                r2: 1
            }]
        );
    }

    #[test]
    fn equal_supports_violate_both_ways() {
        let p = pair(&[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.5, 0.5], &[0.3, 0.7]]);
        let u = check_uniqueness(&p, 0.0);
        assert_eq!(
            u.violations,
            vec![
                Violation {
                    kind: ViolationKind::HSubset,
                    r1: 0,
                    r2: 1
                },
                Violation {
                    kind: ViolationKind::HSubset,
                    r1: 1,
                    r2: 0
                },
            ]
        );
    }

    #[test]
    fn uniqueness_is_permutation_invariant() {
        let p = pair(
            &[&[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0], &[0.2, 0.3, 0.5]],
            &[&[0.5, 0.5, 0.0], &[0.2, 0.3, 0.5], &[0.0, 0.0, 1.0]],
        );
        let base = check_uniqueness(&p, 0.0);
        let perm = [2, 0, 1];
        let q = check_uniqueness(&p.permuted(&perm).unwrap(), 0.0);
        assert_eq!(base.unique, q.unique);
        let relabel = |v: &Violation| {
            let inv = |k: usize| perm.iter().position(|&p| p == k).unwrap();
            Violation {
                kind: v.kind,
                r1: inv(v.r1),
                r2: inv(v.r2),
            }
        };
        let mut expected: Vec<Violation> = base.violations.iter().map(relabel).collect();
        let mut got = q.violations.clone();
        let key = |v: &Violation| (v.kind as u8, v.r1, v.r2);
        expected.sort_by_key(key);
        got.sort_by_key(key);
        assert_eq!(expected, got);
    }

    #[test]
    fn worked_two_factor_bounds() {
        let b = natural_bounds(&worked_example(), 0.0).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].r1, b[0].r2), (0, 1));
        assert!((b[0].lower + 3.0 / 7.0).abs() < 1e-15);
        assert!((b[0].upper - 0.5).abs() < 1e-15);
        // axis (1, 0): lower = −min(0.7/0.3, 0.4/0.6), upper = min(0.2/0.6, 0.8/0.4)
        assert!((b[1].lower + 2.0 / 3.0).abs() < 1e-15);
        assert!((b[1].upper - 1.0 / 3.0).abs() < 1e-15);
        for x in &b {
            assert!(x.lower <= 0.0 && x.upper >= 0.0 && x.width >= 0.0);
        }
    }

    #[test]
    fn anchored_bounds_are_degenerate() {
        let b = natural_bounds(&anchored(), 0.0).unwrap();
        assert_eq!(b.len(), 6);
        assert!(b.iter().all(|x| x.lower == 0.0 && x.upper == 0.0 && x.width == 0.0));
    }

    #[test]
    fn identical_w_columns_give_unit_lower_bound() {
        let p = pair(&[&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]], &[&[0.6, 0.4], &[0.2, 0.8]]);
        let b = natural_bounds(&p, 0.0).unwrap();
        assert_eq!(b[0].lower, -1.0);
    }

    #[test]
    fn empty_support_is_degenerate() {
        let p = pair(&[&[1.0, 0.0], &[1.0, 0.0]], &[&[0.6, 0.4], &[0.2, 0.8]]);
        assert!(matches!(
            natural_bounds(&p, 0.0),
            Err(SmfError::DegenerateFactor { factor: 1, side: "W" })
        ));
    }

    #[test]
    fn axis_matrix_matches_two_factor_parameterization() {
        let a = MixingMatrix::axis(2, 0, 1, 0.3);
        assert_eq!(a.matrix().as_slice(), &[0.7, 0.3, 0.0, 1.0]);
        let b = MixingMatrix::axis(2, 1, 0, 0.2);
        assert_eq!(b.matrix().as_slice(), &[1.0, 0.0, 0.2, 0.8]);
        assert_eq!(b.single_axis(), Some((1, 0, 0.2)));
    }

    #[test]
    fn mixing_matrix_validation() {
        assert!(MixingMatrix::new(DenseMatrix::from_rows(&[[0.5, 0.6], [0.0, 1.0]]).unwrap()).is_err());
        assert!(MixingMatrix::new(DenseMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap()).is_err());
        assert!(MixingMatrix::new(DenseMatrix::from_rows(&[[0.5, 0.5], [0.0, 1.0]]).unwrap()).is_ok());
    }

    #[test]
    fn identity_is_always_feasible() {
        for f in [worked_example(), anchored()] {
            assert!(is_feasible_mixing(&f, &DenseMatrix::identity(f.rank()), 0.0));
        }
    }

    #[test]
    fn sampler_stays_at_identity_for_anchored_factors() {
        let samples = sample_feasible_a(&anchored(), 500, 3, DEFAULT_SAMPLER_STEP, 0.0);
        assert_eq!(samples.len(), 500);
        assert!(samples.iter().all(|a| a.deviation_from_permutation() < 1e-6));
    }

    #[test]
    fn sampler_single_axis_draws_respect_bounds() {
        let f = worked_example();
        let bounds = natural_bounds(&f, 0.0).unwrap();
        let samples = sample_feasible_a(&f, 4000, 7, DEFAULT_SAMPLER_STEP, 0.0);
        let mut seen = 0;
        for a in &samples {
            for s in a.matrix().row_sums() {
                assert!((s - 1.0).abs() < 1e-10);
            }
            if let Some((r1, r2, v)) = a.single_axis() {
                seen += 1;
                let b = bounds.iter().find(|b| b.r1 == r1 && b.r2 == r2).unwrap();
                assert!(b.contains(v, DEFAULT_SAMPLER_STEP), "{v} outside {b:?}");
            }
        }
        assert!(seen > 100);
        let summary = oracle_summary(&f, &bounds, 4000, 7, DEFAULT_SAMPLER_STEP, 0.0);
        assert_eq!(summary.single_axis_outside_bounds, 0);
        assert!(summary.moved > 0);
    }

    #[test]
    fn diagnostic_examples() {
        let f = anchored();
        let x = f.product();
        assert!(average_consistency_diagnostic(&x, &f).unwrap() < 1e-12);

        let mut h = f.h().clone();
        h[(0, 3)] += 0.1;
        let bent = FactorPair::new(f.w().clone(), h, Orientation::Both).unwrap();
        let w_bar = f.w().col_means();
        let d = average_consistency_diagnostic(&x, &bent).unwrap();
        assert!(d >= 0.1 * w_bar[0] - 1e-15, "{d}");
    }

    #[test]
    fn histogram_buckets() {
        let mk = |w: f64| AxisBound {
            r1: 0,
            r2: 1,
            lower: 0.0,
            upper: w,
            width: w,
        };
        let s = summarize_bounds(&[mk(0.0), mk(0.0005), mk(0.001), mk(0.015), mk(1.0), mk(3.0)]);
        let counts: Vec<usize> = s.widths_histogram.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 1, 1, 1, 1]);
        assert_eq!(s.max_width, 3.0);
    }

    #[test]
    fn report_json_shape() {
        let rep = analyze(&worked_example(), 0.0).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        for key in ["unique", "violations", "anchors", "bounds", "summary"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["summary"]["widths_histogram"].is_array());
        assert_eq!(v["bounds"][0]["r1"], 0);
    }
}
