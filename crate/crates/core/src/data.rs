//! Dense matrix containers.
//!
//! [`DataMatrix`] is the n x p observation matrix (rows = samples, columns =
//! variables), stored column-major because every algorithm in this crate works
//! column-wise. [`SquareMatrix`] is a small p x p container used for
//! covariance/precision matrices.

use crate::error::{Error, Result};

/// An n x p real data matrix, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    /// Zero matrix of shape n x p.
    pub fn zeros(n: usize, p: usize) -> Self {
        DataMatrix { n, p, data: vec![0.0; n * p] }
    }

    /// Build from column vectors, all of length `n`.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        if p == 0 {
            return Err(Error::invalid("need at least one column"));
        }
        let n = cols[0].len();
        if n == 0 {
            return Err(Error::invalid("need at least one row"));
        }
        let mut data = Vec::with_capacity(n * p);
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(Error::invalid(format!(
                    "column {} has length {}, expected {}",
                    j,
                    c.len(),
                    n
                )));
            }
            data.extend_from_slice(c);
        }
        Ok(DataMatrix { n, p, data })
    }

    /// Build from row vectors, all of length `p`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("need at least one row"));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::invalid("need at least one column"));
        }
        let mut m = DataMatrix::zeros(n, p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::invalid(format!(
                    "row {} has length {}, expected {}",
                    i,
                    r.len(),
                    p
                )));
            }
            for (j, &v) in r.iter().enumerate() {
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.n, "column length mismatch");
        self.column_mut(j).copy_from_slice(values);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.n + i] = v;
    }

    /// Row `i` as a fresh vector (rows are strided).
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    /// New matrix keeping the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> DataMatrix {
        let mut m = DataMatrix::zeros(self.n, idx.len().max(1));
        if idx.is_empty() {
            // Callers that allow an empty selection handle it before this;
            // keep a 1-column zero matrix from ever leaking out.
            m.p = 0;
            m.data.clear();
            return m;
        }
        for (t, &j) in idx.iter().enumerate() {
            m.column_mut(t).copy_from_slice(self.column(j));
        }
        m
    }

    /// All columns except the listed ones (order preserved).
    pub fn drop_columns(&self, idx: &[usize]) -> DataMatrix {
        let drop: Vec<bool> = {
            let mut d = vec![false; self.p];
            for &j in idx {
                d[j] = true;
            }
            d
        };
        let keep: Vec<usize> = (0..self.p).filter(|&j| !drop[j]).collect();
        self.select_columns(&keep)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A p x p real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(p: usize) -> Self {
        SquareMatrix { p, data: vec![0.0; p * p] }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = SquareMatrix::zeros(p);
        for i in 0..p {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let mut m = SquareMatrix::zeros(p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::invalid("square matrix rows must have length p"));
            }
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// Largest absolute asymmetry max |a_ij - a_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Force exact symmetry by averaging mirrored entries.
    pub fn symmetrize(&mut self) {
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_round_trip() {
        let m = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.column(0), &[1.0, 3.0, 5.0]);
        assert_eq!(m.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.row(1), vec![3.0, 4.0]);
        assert_eq!(m.get(2, 1), 6.0);
    }

    #[test]
    fn from_columns_matches_from_rows() {
        let a = DataMatrix::from_columns(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        let b = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ragged_input_rejected() {
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(DataMatrix::from_columns(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn select_and_drop_columns() {
        let m = DataMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]);
        assert_eq!(s.column(0), &[3.0, 6.0]);
        assert_eq!(s.column(1), &[1.0, 4.0]);
        let d = m.drop_columns(&[1]);
        assert_eq!(d.n_cols(), 2);
        assert_eq!(d.column(1), &[3.0, 6.0]);
        let e = m.select_columns(&[]);
        assert_eq!(e.n_cols(), 0);
        assert_eq!(e.n_rows(), 2);
    }

    #[test]
    fn square_matrix_symmetrize() {
        let mut m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, 3.0]]).unwrap();
        assert_eq!(m.asymmetry(), 2.0);
        m.symmetrize();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(m.trace(), 4.0);
    }
}
