//! Dense row-major matrices and the pinned deterministic random generator.
//!
//! Everything downstream (layer parameters, activations, gradients) lives in
//! [`Matrix`]. [`Rng`] is SplitMix64 with the constants fixed so that every
//! run of every experiment reproduces identical numbers.

use crate::error::{Error, Result};

/// Dense row-major 2-D array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a flat row-major buffer. The length must equal
    /// `rows * cols` and every entry must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite matrix entry {bad}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn check_same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{op} needs equal shapes, got {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// `self · other`. The inner kernel keeps a block of output columns in
    /// registers so accumulation does not round-trip through memory;
    /// summation runs over `k` in ascending order for every output element.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, other.cols);
        self.matmul_acc(other, &mut out)?;
        Ok(out)
    }

    /// `into += self · other`, the accumulating form of [`Matrix::matmul`].
    pub fn matmul_acc(&self, other: &Matrix, into: &mut Matrix) -> Result<()> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul of {}x{} by {}x{}: inner dimensions differ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if into.shape() != (self.rows, other.cols) {
            return Err(Error::Shape(format!(
                "matmul output {}x{} against accumulator {}x{}",
                self.rows,
                other.cols,
                into.rows,
                into.cols
            )));
        }
        const NR: usize = 16;
        let n = other.cols;
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut into.data[i * n..(i + 1) * n];
            let mut j = 0;
            while j + NR <= n {
                let mut acc = [0.0f64; NR];
                acc.copy_from_slice(&out_row[j..j + NR]);
                for (k, &a) in a_row.iter().enumerate() {
                    let b_win: &[f64; NR] =
                        (&other.data[k * n + j..k * n + j + NR]).try_into().expect("window");
                    for t in 0..NR {
                        acc[t] += a * b_win[t];
                    }
                }
                out_row[j..j + NR].copy_from_slice(&acc);
                j += NR;
            }
            if j < n {
                for (k, &a) in a_row.iter().enumerate() {
                    let b_row = &other.data[k * n..(k + 1) * n];
                    for jj in j..n {
                        out_row[jj] += a * b_row[jj];
                    }
                }
            }
        }
        Ok(())
    }

    /// `self · otherᵀ` without materializing the transpose. Both operands are
    /// read along contiguous rows, which keeps the training loop cache-friendly.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_nt of {}x{} by ({}x{})ᵀ: inner dimensions differ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.rows];
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out[i * other.rows..(i + 1) * other.rows];
            for (j, o) in out_row.iter_mut().enumerate() {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                *o = acc;
            }
        }
        Ok(Matrix { rows: self.rows, cols: other.rows, data: out })
    }

    /// `selfᵀ · other` without materializing the transpose, with the same
    /// register-blocked kernel shape as [`Matrix::matmul`].
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.cols, other.cols);
        self.matmul_tn_acc(other, &mut out)?;
        Ok(out)
    }

    /// `into += selfᵀ · other`, the accumulating form of
    /// [`Matrix::matmul_tn`].
    pub fn matmul_tn_acc(&self, other: &Matrix, into: &mut Matrix) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "matmul_tn of ({}x{})ᵀ by {}x{}: inner dimensions differ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if into.shape() != (self.cols, other.cols) {
            return Err(Error::Shape(format!(
                "matmul_tn output {}x{} against accumulator {}x{}",
                self.cols,
                other.cols,
                into.rows,
                into.cols
            )));
        }
        const NR: usize = 16;
        let depth = self.rows;
        let m = self.cols;
        let n = other.cols;
        for i in 0..m {
            let out_row = &mut into.data[i * n..(i + 1) * n];
            let mut j = 0;
            while j + NR <= n {
                let mut acc = [0.0f64; NR];
                acc.copy_from_slice(&out_row[j..j + NR]);
                for k in 0..depth {
                    let a = self.data[k * m + i];
                    let b_win: &[f64; NR] =
                        (&other.data[k * n + j..k * n + j + NR]).try_into().expect("window");
                    for t in 0..NR {
                        acc[t] += a * b_win[t];
                    }
                }
                out_row[j..j + NR].copy_from_slice(&acc);
                j += NR;
            }
            if j < n {
                for k in 0..depth {
                    let a = self.data[k * m + i];
                    let b_row = &other.data[k * n..(k + 1) * n];
                    for jj in j..n {
                        out_row[jj] += a * b_row[jj];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data: out }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    /// Accumulate `other` into `self`.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "hadamard")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        let data = self.data.iter().map(|v| v * factor).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    /// Add `bias` to every row; `bias.len()` must equal the column count.
    pub fn add_row_vector(&self, bias: &[f64]) -> Result<Matrix> {
        if bias.len() != self.cols {
            return Err(Error::Shape(format!(
                "bias of length {} against {} columns",
                bias.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for i in 0..out.rows {
            for (o, &b) in out.row_mut(i).iter_mut().zip(bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Sum of each column, as a vector of length `cols`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 generator. Constants are pinned so seeded runs replay exactly
/// on every platform; uniform doubles take the top 53 bits scaled by 2⁻⁵³.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
        z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, bound)`.
    pub fn next_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "bound must be positive");
        (self.next_u64() % bound as u64) as usize
    }

    /// `n` uniform doubles in `[lo, hi)`. Errors when `lo >= hi`.
    pub fn uniform(&mut self, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "uniform range requires lo < hi, got [{lo}, {hi})"
            )));
        }
        Ok((0..n).map(|_| lo + self.next_f64() * (hi - lo)).collect())
    }

    /// Uniform matrix in `[lo, hi)`, filled in row-major order.
    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Result<Matrix> {
        let data = self.uniform(rows * cols, lo, hi)?;
        Matrix::from_vec(rows, cols, data)
    }

    /// Derive an independent child generator; the split rule is
    /// `child_seed = parent.next_u64()`.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (2, 1));
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut rng = Rng::new(9);
        let x = rng.uniform_matrix(3, 4, -1.0, 1.0).unwrap();
        let i3 = Matrix::identity(3);
        assert_eq!(i3.matmul(&x).unwrap(), x);
        let z = Matrix::zeros(2, 3);
        let zx = z.matmul(&x).unwrap();
        assert!(zx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_dimension_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("4x2"), "{err}");
    }

    #[test]
    fn transpose_is_involution_and_indexes_correctly() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let t = x.transpose();
        assert_eq!(t.shape(), (3, 1));
        assert_eq!(t.data(), &[1.0, 2.0, 3.0]);
        assert_eq!(t.transpose(), x);

        let one = Matrix::from_vec(1, 1, vec![7.0]).unwrap();
        assert_eq!(one.transpose(), one);
    }

    #[test]
    fn nt_and_tn_agree_with_explicit_transpose() {
        let mut rng = Rng::new(3);
        let a = rng.uniform_matrix(4, 3, -1.0, 1.0).unwrap();
        let b = rng.uniform_matrix(5, 3, -1.0, 1.0).unwrap();
        let c = rng.uniform_matrix(4, 6, -1.0, 1.0).unwrap();
        assert_eq!(a.matmul_nt(&b).unwrap(), a.matmul(&b.transpose()).unwrap());
        assert_eq!(a.matmul_tn(&c).unwrap(), a.transpose().matmul(&c).unwrap());
    }

    // SplitMix64 reference stream, computed independently with big-integer
    // arithmetic outside this crate.
    #[test]
    fn splitmix64_golden_vectors() {
        let mut r = Rng::new(0);
        let got: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                0xe220a8397b1dcdaf,
                0x6e789e6aa1b965f4,
                0x06c45d188009454f,
                0xf88bb8a8724c81ec,
                0x1b39896a51a8749b,
            ]
        );

        let mut r = Rng::new(42);
        let got: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                0xbdd732262feb6e95,
                0x28efe333b266f103,
                0x47526757130f9f52,
                0x581ce1ff0e4ae394,
                0x09bc585a244823f2,
            ]
        );
    }

    #[test]
    fn uniform_doubles_use_top_53_bits() {
        let mut r = Rng::new(42);
        let got: Vec<f64> = (0..5).map(|_| r.next_f64()).collect();
        let expected = [
            0.7415648787718233,
            0.1599103928769201,
            0.27860113025513866,
            0.34419071652363753,
            0.03803016854024621,
        ];
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g, e);
        }
    }

    #[test]
    fn uniform_is_deterministic_and_in_range() {
        let seq1 = Rng::new(7).uniform(100, -2.0, 3.0).unwrap();
        let seq2 = Rng::new(7).uniform(100, -2.0, 3.0).unwrap();
        assert_eq!(seq1, seq2);
        assert!(seq1.iter().all(|&v| (-2.0..3.0).contains(&v)));
    }

    #[test]
    fn uniform_rejects_empty_range() {
        assert!(Rng::new(1).uniform(3, 1.0, 1.0).is_err());
        assert!(Rng::new(1).uniform(3, 2.0, 1.0).is_err());
    }

    #[test]
    fn uniform_sample_mean_near_half() {
        // Law-of-large-numbers oracle: seed 42, 1e5 draws on [0,1).
        let xs = Rng::new(42).uniform(100_000, 0.0, 1.0).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut items: Vec<usize> = (0..257).collect();
        Rng::new(11).shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..257).collect::<Vec<_>>());
        assert_ne!(items, (0..257).collect::<Vec<_>>());
    }
}
