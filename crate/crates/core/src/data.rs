//! The design matrix / target pair every pipeline consumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Features `x` (n rows, d columns) and targets `y` (length n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    bounded: bool,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "need n >= 1 and d >= 1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::mismatch(x.nrows(), y.len()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(Self { x, y, bounded: false })
    }

    /// Build from row slices. Handy for small literal fixtures.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::mismatch(d, bad.len()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y))
    }

    /// Features only; targets are zero.
    pub fn unlabeled(x: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        Self::new(x, DVector::zeros(n))
    }

    /// Assert `max |x_ij| <= 1`.
    pub fn assert_bounded(mut self) -> Result<Self> {
        let max = self.x.amax();
        if max > 1.0 {
            return Err(Error::InvalidData(format!(
                "bounded-data flag requires max |x_ij| <= 1, found {max}"
            )));
        }
        self.bounded = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select_rows(idx.iter());
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        Dataset {
            x,
            y,
            bounded: self.bounded,
        }
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.n());
        Dataset {
            x: self.x.rows(0, n).into_owned(),
            y: self.y.rows(0, n).into_owned(),
            bounded: self.bounded,
        }
    }

    /// Indices of rows that are identically zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.x.row(i).iter().all(|&v| v == 0.0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Dataset::from_rows(&[], &[]).is_err());
        assert!(Dataset::from_rows(&[vec![f64::NAN]], &[0.0]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0]], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn bounded_flag_checks_entries() {
        let ok = Dataset::from_rows(&[vec![1.0, -0.5]], &[0.0]).unwrap();
        assert!(ok.assert_bounded().unwrap().is_bounded());
        let bad = Dataset::from_rows(&[vec![1.5, 0.0]], &[0.0]).unwrap();
        assert!(bad.assert_bounded().is_err());
    }

    #[test]
    fn head_and_select() {
        let data =
            Dataset::from_rows(&[vec![1.0], vec![2.0], vec![0.0]], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(data.head(2).n(), 2);
        let sel = data.select_rows(&[2, 0]);
        assert_eq!(sel.y().as_slice(), &[3.0, 1.0]);
        assert_eq!(data.zero_rows(), vec![2]);
    }
}
