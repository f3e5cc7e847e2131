use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n - 1]`
/// are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub lower: Vec<f64>,
    pub diagonal: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// First row where `|diag| <= |lower| + |upper|`, if any.
    pub fn first_non_dominant_row(&self) -> Option<usize> {
        let n = self.len();
        (0..n).find(|&i| {
            let off = if i > 0 { self.lower[i].abs() } else { 0.0 }
                + if i + 1 < n { self.upper[i].abs() } else { 0.0 };
            self.diagonal[i].abs() <= off
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        if n == 1 {
            out[0] = self.diagonal[0] * x[0];
            return;
        }
        out[0] = self.diagonal[0] * x[0] + self.upper[0] * x[1];
        for i in 1..n - 1 {
            out[i] = self.lower[i] * x[i - 1] + self.diagonal[i] * x[i] + self.upper[i] * x[i + 1];
        }
        out[n - 1] = self.lower[n - 1] * x[n - 2] + self.diagonal[n - 1] * x[n - 1];
    }

    /// Thomas algorithm: forward elimination, back substitution.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "tridiagonal right-hand side",
                expected: self.len(),
                found: rhs.len(),
            });
        }
        let factor = self.factor()?;
        let mut out = vec![0.0; rhs.len()];
        factor.solve_into(rhs, &mut out);
        Ok(out)
    }

    pub(crate) fn factor(&self) -> Result<ThomasFactor> {
        let n = self.len();
        let mut cprime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let lower = if i > 0 { self.lower[i] } else { 0.0 };
            let pivot = self.diagonal[i] - lower * prev_c;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::NotDiagonallyDominant { row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            cprime[i] = if i + 1 < n { self.upper[i] * inv_pivot[i] } else { 0.0 };
            prev_c = cprime[i];
        }
        Ok(ThomasFactor {
            lower: self.lower.clone(),
            cprime,
            inv_pivot,
        })
    }
}

/// Pivots of the Thomas elimination, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct ThomasFactor {
    lower: Vec<f64>,
    cprime: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ThomasFactor {
    /// Solves into `out`; `rhs` and `out` may not alias.
    pub(crate) fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        out[0] = rhs[0] * self.inv_pivot[0];
        for i in 1..n {
            out[i] = (rhs[i] - self.lower[i] * out[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            out[i] -= self.cprime[i] * out[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_dense_reference() {
        let op = TridiagonalOperator {
            lower: vec![0.0, -1.0, -0.5, 2.0],
            diagonal: vec![4.0, 3.0, 5.0, 6.0],
            upper: vec![1.0, 0.5, -1.0, 0.0],
        };
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let b = op.apply(&x);
        let y = op.solve(&b).unwrap();
        for (a, e) in y.iter().zip(&x) {
            assert!((a - e).abs() < 1e-14);
        }
        assert_eq!(op.first_non_dominant_row(), None);
    }

    #[test]
    fn flags_non_dominant_rows() {
        let op = TridiagonalOperator {
            lower: vec![0.0, 1.0, 1.0],
            diagonal: vec![2.0, 2.0, 2.0],
            upper: vec![1.0, 1.0, 0.0],
        };
        assert_eq!(op.first_non_dominant_row(), Some(1));
        assert!(op.solve(&[1.0, 2.0]).is_err());
    }
}
