use super::DenseMatrix;

/// Inputs already on the simplex within this slack are returned unchanged,
/// which makes the projection exactly idempotent.
const FEASIBLE_SLACK: f64 = 1e-12;

/// Euclidean projection onto the probability simplex `{u : u >= 0, sum(u) = 1}`.
///
/// Michelot's fixed-point threshold search: no sorting and no allocation,
/// O(n) per pass and rarely more than a few passes.
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out);
    out
}

pub(crate) fn project_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= FEASIBLE_SLACK {
        return;
    }
    // theta only grows, and the active set {x > theta} only shrinks
    let mut theta = (sum - 1.0) / v.len() as f64;
    loop {
        let (mut s, mut c) = (0.0, 0usize);
        for &x in v.iter() {
            if x > theta {
                s += x;
                c += 1;
            }
        }
        let next = (s - 1.0) / c as f64;
        if next <= theta {
            break;
        }
        theta = next;
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // one compensation pass over the support keeps the sum within round-off
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > FEASIBLE_SLACK && s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Projects every row of `m` onto the simplex.
pub fn project_rows_onto_simplex(m: &mut DenseMatrix) {
    for i in 0..m.rows() {
        project_in_place(m.row_mut(i));
    }
}
