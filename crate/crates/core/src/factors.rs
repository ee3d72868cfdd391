use serde::{Deserialize, Serialize};

use crate::error::{Result, SmfError};
use crate::matrix::DenseMatrix;

/// Which factor carries the adding-up restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rows of H are distributions (topic-term probabilities).
    HRowsSumTo1,
    /// Rows of W are convex weights (image mixtures).
    WRowsSumTo1,
    /// Both factors are row-stochastic.
    Both,
}

impl Orientation {
    pub fn w_stochastic(self) -> bool {
        matches!(self, Orientation::WRowsSumTo1 | Orientation::Both)
    }

    pub fn h_stochastic(self) -> bool {
        matches!(self, Orientation::HRowsSumTo1 | Orientation::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::HRowsSumTo1 => "h_rows_sum_to1",
            Orientation::WRowsSumTo1 => "w_rows_sum_to1",
            Orientation::Both => "both",
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = SmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "topic" | "topics" | "h_rows_sum_to1" | "h-rows" => Ok(Orientation::HRowsSumTo1),
            "w" | "image" | "images" | "w_rows_sum_to1" | "w-rows" => Ok(Orientation::WRowsSumTo1),
            "both" => Ok(Orientation::Both),
            other => Err(SmfError::invalid(format!("unknown orientation {other:?}"))),
        }
    }
}

/// A pair of non-negative factors `X ≈ W H` with a declared stochastic side.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    w: DenseMatrix,
    h: DenseMatrix,
    orientation: Orientation,
}

impl FactorPair {
    /// Pairs `W` (N x R) and `H` (R x M) after checking that the inner
    /// dimensions agree. Feasibility is checked separately by
    /// [`FactorPair::validate`] since estimated factors are only approximately
    /// feasible.
    pub fn new(w: DenseMatrix, h: DenseMatrix, orientation: Orientation) -> Result<Self> {
        if w.cols() != h.rows() {
            return Err(SmfError::shape(format!(
                "W is {}x{} but H is {}x{}",
                w.rows(),
                w.cols(),
                h.rows(),
                h.cols()
            )));
        }
        if w.cols() == 0 {
            return Err(SmfError::invalid("rank must be at least 1"));
        }
        w.ensure_finite()?;
        h.ensure_finite()?;
        Ok(FactorPair { w, h, orientation })
    }

    /// Like [`FactorPair::new`] but also enforces non-negativity and the
    /// adding-up restriction within `eps`.
    pub fn new_checked(w: DenseMatrix, h: DenseMatrix, orientation: Orientation, eps: f64) -> Result<Self> {
        let pair = Self::new(w, h, orientation)?;
        pair.validate(eps)?;
        Ok(pair)
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.w, self.h)
    }

    /// W · H.
    pub fn product(&self) -> DenseMatrix {
        self.w.dot(&self.h)
    }

    /// Checks non-negativity and row sums of the stochastic side(s).
    pub fn validate(&self, eps: f64) -> Result<()> {
        check_nonneg(&self.w, "W", eps)?;
        check_nonneg(&self.h, "H", eps)?;
        if self.orientation.w_stochastic() {
            check_row_sums(&self.w, "W", eps)?;
        }
        if self.orientation.h_stochastic() {
            check_row_sums(&self.h, "H", eps)?;
        }
        Ok(())
    }

    /// Same factors with columns of W and rows of H reordered by `perm`
    /// (new index k takes old index `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<FactorPair> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(SmfError::invalid(format!("{perm:?} is not a permutation of 0..{r}")));
        }
        Ok(FactorPair {
            w: self.w.select_cols(perm),
            h: self.h.select_rows(perm),
            orientation: self.orientation,
        })
    }
}

fn check_nonneg(m: &DenseMatrix, name: &str, eps: f64) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v < -eps) {
            return Err(SmfError::invalid(format!("{name}[{i},{j}] = {} is negative", row[j])));
        }
    }
    Ok(())
}

fn check_row_sums(m: &DenseMatrix, name: &str, eps: f64) -> Result<()> {
    for (i, s) in m.row_sums().into_iter().enumerate() {
        if (s - 1.0).abs() > eps {
            return Err(SmfError::invalid(format!("row {i} of {name} sums to {s}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_checks_declared_side_only() {
        let w = DenseMatrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]).unwrap();
        let h = DenseMatrix::from_rows(&[[0.9, 0.9], [0.2, 0.0]]).unwrap();
        let pair = FactorPair::new(w.clone(), h.clone(), Orientation::WRowsSumTo1).unwrap();
        pair.validate(1e-9).unwrap();
        let pair = FactorPair::new(w, h, Orientation::Both).unwrap();
        assert!(pair.validate(1e-9).is_err());
    }

    #[test]
    fn negative_entries_fail() {
        let w = DenseMatrix::from_rows(&[[1.1, -0.1]]).unwrap();
        let h = DenseMatrix::identity(2);
        assert!(FactorPair::new_checked(w, h, Orientation::WRowsSumTo1, 1e-3).is_err());
    }

    #[test]
    fn shape_mismatch() {
        assert!(FactorPair::new(DenseMatrix::zeros(3, 2), DenseMatrix::zeros(3, 4), Orientation::Both).is_err());
    }

    #[test]
    fn permutation_keeps_product() {
        let w = DenseMatrix::from_rows(&[[0.2, 0.8], [0.6, 0.4]]).unwrap();
        let h = DenseMatrix::from_rows(&[[0.1, 0.9, 0.0], [0.5, 0.25, 0.25]]).unwrap();
        let pair = FactorPair::new(w, h, Orientation::Both).unwrap();
        let p = pair.permuted(&[1, 0]).unwrap();
        assert!(p.product().sub(&pair.product()).max_abs() < 1e-15);
        assert!(pair.permuted(&[0, 0]).is_err());
    }

    #[test]
    fn orientation_parses_aliases() {
        assert_eq!("topic".parse::<Orientation>().unwrap(), Orientation::HRowsSumTo1);
        assert_eq!("image".parse::<Orientation>().unwrap(), Orientation::WRowsSumTo1);
        assert_eq!("BOTH".parse::<Orientation>().unwrap(), Orientation::Both);
        assert!("diag".parse::<Orientation>().is_err());
    }
}
