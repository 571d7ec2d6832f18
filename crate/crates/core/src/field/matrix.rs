use rand::Rng;

use super::PrimeField;
use crate::error::{Error, Result};

/// Dense row-major matrix of field residues.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FieldMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row-major data, reducing every entry into the field.
    pub fn from_vec(field: &PrimeField, rows: usize, cols: usize, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let data = data.into_iter().map(|x| field.reduce(x)).collect();
        Ok(FieldMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows of signed integers.
    pub fn from_rows(field: &PrimeField, rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().map(|&x| field.from_i64(x)).collect();
        Ok(FieldMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.data.chunks(self.cols).map(<[u64]>::to_vec).collect()
    }

    pub fn random<R: Rng + ?Sized>(field: &PrimeField, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| field.random(rng)).collect();
        FieldMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of field symbols held.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, field: &PrimeField, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let p = field.modulus() as u128;
        let mut out = FieldMatrix::zeros(self.rows, other.cols);
        let mut acc = vec![0u128; other.cols];
        for r in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = 0);
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0 {
                    continue;
                }
                for (slot, &b) in acc.iter_mut().zip(other.row(k)) {
                    *slot += (a as u128 * b as u128) % p;
                }
            }
            for (c, a) in acc.iter().enumerate() {
                out.data[r * other.cols + c] = (a % p) as u64;
            }
        }
        Ok(out)
    }

    /// `self += scalar * other`.
    pub fn add_scaled(&mut self, field: &PrimeField, other: &FieldMatrix, scalar: u64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        if scalar == 0 {
            return Ok(());
        }
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x = field.add(*x, field.mul(scalar, y));
        }
        Ok(())
    }

    pub fn scaled(&self, field: &PrimeField, scalar: u64) -> FieldMatrix {
        FieldMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| field.mul(x, scalar)).collect(),
        }
    }

    /// Copies the `height x width` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, height: usize, width: usize) -> FieldMatrix {
        assert!(
            r0 + height <= self.rows && c0 + width <= self.cols,
            "block out of range"
        );
        let mut out = FieldMatrix::zeros(height, width);
        for r in 0..height {
            let src = (r0 + r) * self.cols + c0;
            out.data[r * width..(r + 1) * width].copy_from_slice(&self.data[src..src + width]);
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &FieldMatrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of range"
        );
        for r in 0..block.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(r));
        }
    }

    /// Concatenates matrices left to right.
    pub fn hstack(parts: &[FieldMatrix]) -> Result<FieldMatrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if parts.iter().any(|m| m.rows != rows) {
            return Err(Error::ShapeMismatch("hstack row counts differ".into()));
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = FieldMatrix::zeros(rows, cols);
        let mut c0 = 0;
        for m in parts {
            out.set_block(0, c0, m);
            c0 += m.cols;
        }
        Ok(out)
    }

    /// Concatenates matrices top to bottom.
    pub fn vstack(parts: &[FieldMatrix]) -> Result<FieldMatrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(Error::ShapeMismatch("vstack column counts differ".into()));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|m| m.data.len()).sum());
        for m in parts {
            data.extend_from_slice(&m.data);
        }
        Ok(FieldMatrix {
            rows: data.len().checked_div(cols).unwrap_or(0),
            cols,
            data,
        })
    }

    /// Solves `self * X = rhs` for square `self` by Gauss-Jordan elimination.
    ///
    /// Pivots are the first nonzero entry in each column; there is no notion
    /// of magnitude in a prime field.
    pub fn solve(&self, field: &PrimeField, rhs: &FieldMatrix) -> Result<FieldMatrix> {
        let n = self.rows;
        if self.cols != n {
            return Err(Error::ShapeMismatch(format!(
                "system matrix is {}x{}, not square",
                self.rows, self.cols
            )));
        }
        if rhs.rows != n {
            return Err(Error::ShapeMismatch(format!(
                "right-hand side has {} rows, system has {n}",
                rhs.rows
            )));
        }
        let w = n + rhs.cols;
        let mut aug = vec![0u64; n * w];
        for r in 0..n {
            aug[r * w..r * w + n].copy_from_slice(self.row(r));
            aug[r * w + n..(r + 1) * w].copy_from_slice(rhs.row(r));
        }
        for col in 0..n {
            let pivot = (col..n).find(|&r| aug[r * w + col] != 0).ok_or(Error::SingularMatrix)?;
            if pivot != col {
                for c in 0..w {
                    aug.swap(pivot * w + c, col * w + c);
                }
            }
            let inv = field.inv(aug[col * w + col])?;
            for c in col..w {
                aug[col * w + c] = field.mul(aug[col * w + c], inv);
            }
            let pivot_row = aug[col * w..(col + 1) * w].to_vec();
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = aug[r * w + col];
                if factor == 0 {
                    continue;
                }
                let row = &mut aug[r * w..(r + 1) * w];
                for c in col..w {
                    row[c] = field.sub(row[c], field.mul(factor, pivot_row[c]));
                }
            }
        }
        let mut out = FieldMatrix::zeros(n, rhs.cols);
        for r in 0..n {
            out.data[r * rhs.cols..(r + 1) * rhs.cols].copy_from_slice(&aug[r * w + n..(r + 1) * w]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f101() -> PrimeField {
        PrimeField::new(101).unwrap()
    }

    #[test]
    fn small_product() {
        let f = f101();
        let a = FieldMatrix::from_rows(&f, &[vec![1, 2], vec![3, 4]]).unwrap();
        let b = FieldMatrix::from_rows(&f, &[vec![5, 6], vec![7, 8]]).unwrap();
        let c = a.mul(&f, &b).unwrap();
        assert_eq!(c.to_rows(), vec![vec![19, 22], vec![43, 50]]);
        assert_eq!(a.mul(&f, &FieldMatrix::identity(2)).unwrap(), a);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let f = f101();
        let a = FieldMatrix::zeros(2, 3);
        let b = FieldMatrix::zeros(2, 3);
        assert!(matches!(a.mul(&f, &b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            FieldMatrix::from_vec(&f, 2, 2, vec![1, 2, 3]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn product_matches_big_integer_oracle() {
        let f = PrimeField::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = FieldMatrix::random(&f, 4, 4, &mut rng);
            let b = FieldMatrix::random(&f, 4, 4, &mut rng);
            let c = a.mul(&f, &b).unwrap();
            let p = BigInt::from(f.modulus());
            for i in 0..4 {
                for j in 0..4 {
                    let exact: BigInt = (0..4)
                        .map(|k| BigInt::from(a.get(i, k)) * BigInt::from(b.get(k, j)))
                        .sum();
                    assert_eq!(BigInt::from(c.get(i, j)), exact % &p);
                }
            }
        }
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let f = f101();
        let rhs = FieldMatrix::from_rows(&f, &[vec![1, 2], vec![3, 4], vec![5, 6]]).unwrap();
        assert_eq!(FieldMatrix::identity(3).solve(&f, &rhs).unwrap(), rhs);
    }

    #[test]
    fn solve_detects_singular() {
        let f = f101();
        let m = FieldMatrix::from_rows(&f, &[vec![1, 2, 3], vec![4, 5, 6], vec![1, 2, 3]]).unwrap();
        let rhs = FieldMatrix::zeros(3, 1);
        assert_eq!(m.solve(&f, &rhs), Err(Error::SingularMatrix));
    }

    #[test]
    fn solve_needs_row_swap() {
        let f = f101();
        let m = FieldMatrix::from_rows(&f, &[vec![0, 1], vec![1, 0]]).unwrap();
        let rhs = FieldMatrix::from_rows(&f, &[vec![7], vec![9]]).unwrap();
        assert_eq!(m.solve(&f, &rhs).unwrap().to_rows(), vec![vec![9], vec![7]]);
    }

    #[test]
    fn solve_multiply_back_random_systems() {
        let f = PrimeField::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [1usize, 2, 3, 8, 17, 64] {
            let m = FieldMatrix::random(&f, n, n, &mut rng);
            let rhs = FieldMatrix::random(&f, n, 3, &mut rng);
            // A uniform random matrix over a 31-bit field is singular with
            // probability ~n/p, so a failure here would itself be notable.
            let x = m.solve(&f, &rhs).unwrap();
            assert_eq!(m.mul(&f, &x).unwrap(), rhs);
        }
    }

    #[test]
    fn stacking_and_blocks() {
        let f = f101();
        let a = FieldMatrix::from_rows(&f, &[vec![1, 2], vec![3, 4]]).unwrap();
        let b = FieldMatrix::from_rows(&f, &[vec![5], vec![6]]).unwrap();
        let h = FieldMatrix::hstack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(h.to_rows(), vec![vec![1, 2, 5], vec![3, 4, 6]]);
        assert_eq!(h.block(0, 2, 2, 1), b);
        let v = FieldMatrix::vstack(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(v.shape(), (4, 2));
        assert_eq!(v.block(2, 0, 2, 2), a);
        assert!(FieldMatrix::hstack(&[a.clone(), FieldMatrix::zeros(3, 1)]).is_err());
    }
}
