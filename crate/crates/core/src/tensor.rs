//! Dense component arrays for tensors in a chart of dimension `n`.

use std::ops::{Index, IndexMut};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// Components of a rank-`R` tensor, row-major in the index order given.
/// Which slots are upper or lower is fixed by the owning field's name.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<const R: usize> {
    dim: usize,
    data: Vec<f64>,
}

impl<const R: usize> Tensor<R> {
    pub fn zeros(dim: usize) -> Self {
        Tensor {
            dim,
            data: vec![0.0; dim.pow(R as u32)],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut([usize; R]) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for flat in 0..t.data.len() {
            t.data[flat] = f(t.unflatten(flat));
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn flatten(&self, idx: [usize; R]) -> usize {
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    fn unflatten(&self, mut flat: usize) -> [usize; R] {
        let mut idx = [0; R];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
        idx
    }

    /// Iterate `(multi-index, value)` pairs.
    pub fn indexed(&self) -> impl Iterator<Item = ([usize; R], f64)> + '_ {
        self.data.iter().enumerate().map(|(f, &v)| (self.unflatten(f), v))
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim);
        Tensor {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl Tensor<2> {
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |[i, j]| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |[i, j]| rows[i][j])
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[[i, j]]).collect())
            .collect()
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self[[i, j]])
    }

    pub fn from_matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |[i, j]| m[(i, j)])
    }

    /// Largest deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[[i, j]] - self[[j, i]]).abs());
            }
        }
        worst
    }
}

impl<const R: usize> Index<[usize; R]> for Tensor<R> {
    type Output = f64;

    fn index(&self, idx: [usize; R]) -> &f64 {
        &self.data[self.flatten(idx)]
    }
}

impl<const R: usize> IndexMut<[usize; R]> for Tensor<R> {
    fn index_mut(&mut self, idx: [usize; R]) -> &mut f64 {
        let f = self.flatten(idx);
        &mut self.data[f]
    }
}

impl<const R: usize> Serialize for Tensor<R> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Tensor", 3)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("rank", &R)?;
        st.serialize_field("data", &self.data)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let t = Tensor::<3>::from_fn(3, |[a, b, c]| (100 * a + 10 * b + c) as f64);
        assert_eq!(t[[1, 2, 0]], 120.0);
        assert_eq!(t.as_slice()[9 + 2 * 3], 120.0);
        let back: Vec<_> = t.indexed().take(4).map(|(i, _)| i).collect();
        assert_eq!(back, vec![[0, 0, 0], [0, 0, 1], [0, 0, 2], [0, 1, 0]]);
    }

    #[test]
    fn identity_is_symmetric() {
        let id = Tensor::<2>::identity(4);
        assert_eq!(id.asymmetry(), 0.0);
        assert_eq!(id.max_abs(), 1.0);
    }
}
