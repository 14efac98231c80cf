//! Dense complex matrices.
//!
//! Everything in this crate lives in spaces of at most a few thousand
//! dimensions, so storage is dense and row-major. Eigenvalue, singular value
//! and solve routines delegate to `nalgebra`.

use std::fmt;
use std::ops::{Add, Index as IndexOp, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{reject, Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Matrix with a single 1 at `(r, c)`.
    pub fn unit(n: usize, r: usize, c: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(r, c)] = ONE;
        m
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let v: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    /// Build from row-major entries. Rejects ragged shapes and non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return reject("matrix dimensions must be positive");
        }
        if data.len() != rows * cols {
            return reject(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return reject("matrix entries must be finite");
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return reject("ragged rows");
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Column vector.
    pub fn column(v: &[Complex64]) -> Self {
        CMat {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return reject(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return reject(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            ));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, z: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * z).collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> CMat {
        self.scale(Complex64::new(x, 0.0))
    }

    pub fn checked_add(&self, other: &CMat) -> Result<CMat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &CMat) -> Result<CMat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &CMat, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMat> {
        if self.rows != other.rows || self.cols != other.cols {
            return reject(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self += z * other`, shapes must agree.
    pub fn axpy(&mut self, z: Complex64, other: &CMat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += z * b;
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMat) -> CMat {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        CMat::from_fn(r, c, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Square root of the sum of squared moduli.
    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`; `inf` on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        match self.checked_sub(other) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Principal submatrix on the given index list.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<Complex64>) -> CMat {
        CMat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    /// All eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self, tol: f64) -> Result<Vec<f64>> {
        if !self.is_square() {
            return reject("eigenvalues need a square matrix");
        }
        let skew = self.max_abs_diff(&self.adjoint());
        if skew > tol {
            return reject(format!("matrix is not Hermitian (max |A - A†| = {skew:e})"));
        }
        // Symmetrize so the solver sees an exactly Hermitian input.
        let h = self
            .checked_add(&self.adjoint())
            .expect("square")
            .scale_real(0.5);
        let mut ev: Vec<f64> = h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.to_nalgebra().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Numerical rank: singular values above `tol` times the largest.
    pub fn rank(&self, tol: f64) -> usize {
        let sv = self.singular_values();
        let top = sv.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > tol * top).count()
    }

    /// Operator (spectral) norm.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Solve `self · x = b` for square invertible `self`.
    pub fn solve(&self, b: &CMat) -> Result<CMat> {
        if !self.is_square() || self.rows != b.rows {
            return reject("solve needs a square system with conformable right-hand side");
        }
        let lu = self.to_nalgebra().lu();
        lu.solve(&b.to_nalgebra())
            .map(|x| CMat::from_nalgebra(&x))
            .ok_or_else(|| Error::RejectedInput("singular system".into()))
    }

    /// Orthonormal basis of the null space, as columns.
    pub fn null_space(&self, tol: f64) -> CMat {
        // Right singular vectors with σ ≤ tol · max(‖A‖, 1); zero rows pad a wide A.
        let rows = self.rows.max(self.cols);
        let mut m = DMatrix::<Complex64>::zeros(rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(r, c)] = self[(r, c)];
            }
        }
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("requested V");
        let cut = tol * svd.singular_values.max().max(1.0);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] <= cut)
            .collect();
        CMat::from_fn(self.cols, keep.len(), |r, c| vt[(keep[c], r)].conj())
    }

    /// `a·b + b·a`.
    pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
        &(a * b) + &(b * a)
    }

    /// `a·b - b·a`.
    pub fn commutator(a: &CMat, b: &CMat) -> CMat {
        &(a * b) - &(b * a)
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eig(a: &CMat, tol: f64) -> Result<f64> {
    let ev = a.hermitian_eigenvalues(tol)?;
    ev.first()
        .copied()
        .ok_or_else(|| Error::RejectedInput("empty matrix".into()))
}

pub fn frob_norm(a: &CMat) -> f64 {
    a.frob_norm()
}

/// `⟨x, y⟩ = Σ x_i conj(y_i)`, linear in the first argument.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl IndexOp<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        self.checked_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        self.checked_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_real(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzz::Fuzz;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn naive_mul(a: &CMat, b: &CMat) -> CMat {
        CMat::from_fn(a.rows(), b.cols(), |i, j| {
            let mut s = ZERO;
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            s
        })
    }

    #[test]
    fn identity_times_x() {
        let x = CMat::from_rows(&[vec![c(1.0, 2.0), c(0.0, -1.0)], vec![c(3.0, 0.0), c(0.5, 0.5)]])
            .unwrap();
        assert_eq!(&CMat::identity(2) * &x, x);
    }

    #[test]
    fn diagonal_product() {
        let p = &CMat::diag_real(&[2.0, 3.0]) * &CMat::diag_real(&[5.0, 7.0]);
        assert_eq!(p, CMat::diag_real(&[10.0, 21.0]));
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let mut fz = Fuzz::new(7);
        for _ in 0..20 {
            let a = fz.cmat(3, 3);
            let b = fz.cmat(3, 3);
            assert!(a.matmul(&b).unwrap().max_abs_diff(&naive_mul(&a, &b)) <= 1e-14);
        }
    }

    #[test]
    fn mul_dimension_mismatch() {
        let a = CMat::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn adjoint_examples() {
        let s = CMat::from_real_rows(&[&[1.0, 2.0], &[2.0, 5.0]]).unwrap();
        assert_eq!(s.adjoint(), s);
        let n = CMat::from_rows(&[vec![ZERO, I], vec![ZERO, ZERO]]).unwrap();
        let expect = CMat::from_rows(&[vec![ZERO, ZERO], vec![-I, ZERO]]).unwrap();
        assert_eq!(n.adjoint(), expect);
        let mut fz = Fuzz::new(1);
        let a = fz.cmat(4, 3);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn min_eig_examples() {
        assert!((hermitian_min_eig(&CMat::diag_real(&[1.0, 2.0, 3.0]), 1e-10).unwrap() - 1.0).abs() < 1e-12);
        let m = CMat::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        // eigenvalues 2 ± 1
        assert!((hermitian_min_eig(&m, 1e-10).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(hermitian_min_eig(&CMat::zeros(3, 3), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn min_eig_rejects_non_hermitian() {
        let m = CMat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(hermitian_min_eig(&m, 1e-10), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn frob_examples() {
        assert_eq!(CMat::zeros(2, 2).frob_norm(), 0.0);
        assert!((CMat::identity(3).frob_norm() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(CMat::from_real_rows(&[&[3.0, 4.0]]).unwrap().frob_norm(), 5.0);
    }

    #[test]
    fn rejects_non_finite() {
        let r = CMat::from_vec(1, 1, vec![c(f64::NAN, 0.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn null_space_of_lowering_matrix() {
        let m = CMat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let ns = m.null_space(1e-10);
        assert_eq!(ns.cols(), 1);
        assert!((ns[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn associative(seed in any::<u64>(), n in 1usize..6) {
                let mut fz = Fuzz::new(seed);
                let (a, b, c) = (fz.cmat(n, n + 1), fz.cmat(n + 1, 2), fz.cmat(2, n));
                let l = &(&a * &b) * &c;
                let r = &a * &(&b * &c);
                let scale = l.frob_norm().max(1.0);
                prop_assert!(l.max_abs_diff(&r) <= 1e-12 * scale);
            }

            #[test]
            fn adjoint_antihomomorphism(seed in any::<u64>(), n in 1usize..6) {
                let mut fz = Fuzz::new(seed);
                let (a, b) = (fz.cmat(n, 3), fz.cmat(3, n));
                let l = (&a * &b).adjoint();
                let r = &b.adjoint() * &a.adjoint();
                // Same products in the same order, up to conjugation.
                prop_assert!(l.max_abs_diff(&r) == 0.0);
            }

            #[test]
            fn gram_is_psd(seed in any::<u64>(), n in 1usize..8) {
                let mut fz = Fuzz::new(seed);
                let b = fz.cmat(n + 2, n);
                let p = &b.adjoint() * &b;
                prop_assert!(hermitian_min_eig(&p, 1e-10).unwrap() >= -1e-10);
            }
        }
    }
}
