//! Dense linear algebra for operator assembly.
//!
//! The forward operator is kept in factored form `A = U diag(sigma) Vt`; all
//! products go through the factors, so the dense product is never formed.

pub(crate) mod io;

pub use io::{read_operator, write_operator, OPERATOR_MAGIC};

use crate::error::{NettError, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NettError::dims("DenseMatrix entries", rows * cols, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(NettError::NonFinite(format!("matrix entry {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(NettError::dims("matvec", self.cols, x.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self^T * y`.
    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(NettError::dims("matvec_transpose", self.rows, y.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), &mut out);
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(NettError::dims("matmul", self.cols, other.rows));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    axpy(a, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest singular value, by power iteration on `M^T M`.
    pub fn spectral_norm_estimate(&self, iterations: usize) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v: Vec<f64> = (0..self.cols).map(|j| 1.0 + (j as f64 * 0.618).fract()).collect();
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let nv = norm(&v);
            if nv == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            let w = self.matvec(&v).expect("shape");
            estimate = norm(&w);
            v = self.matvec_transpose(&w).expect("shape");
        }
        estimate
    }
}

/// Truncated SVD factorization `A = U diag(sigma) Vt`.
///
/// `U` is `m x r`, `Vt` is `r x n`, singular values are non-increasing and all
/// at least `sigma_star`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    u: DenseMatrix,
    sigma: Vec<f64>,
    vt: DenseMatrix,
    sigma_star: f64,
}

impl ForwardOperator {
    /// Assembles an operator from precomputed factors, checking shapes and
    /// ordering (orthonormality is the caller's responsibility).
    pub fn from_factors(
        u: DenseMatrix,
        sigma: Vec<f64>,
        vt: DenseMatrix,
        sigma_star: f64,
    ) -> Result<Self> {
        let r = sigma.len();
        if u.cols() != r {
            return Err(NettError::dims("U columns", r, u.cols()));
        }
        if vt.rows() != r {
            return Err(NettError::dims("Vt rows", r, vt.rows()));
        }
        if r > u.rows().min(vt.cols()) {
            return Err(NettError::InvalidParameter(format!(
                "rank {r} exceeds min(m, n) = {}",
                u.rows().min(vt.cols())
            )));
        }
        if !(sigma_star > 0.0) {
            return Err(NettError::InvalidParameter(format!(
                "sigma_star must be positive, got {sigma_star}"
            )));
        }
        if sigma.windows(2).any(|w| w[1] > w[0]) {
            return Err(NettError::InvalidParameter(
                "singular values must be non-increasing".into(),
            ));
        }
        if sigma.iter().any(|&s| !(s >= sigma_star) || !s.is_finite()) {
            return Err(NettError::InvalidParameter(
                "singular values must be finite and >= sigma_star".into(),
            ));
        }
        Ok(Self {
            u,
            sigma,
            vt,
            sigma_star,
        })
    }

    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn cols(&self) -> usize {
        self.vt.cols()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn vt(&self) -> &DenseMatrix {
        &self.vt
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_star(&self) -> f64 {
        self.sigma_star
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma.last().copied().unwrap_or(0.0)
    }

    /// `Vt x`, the coordinates of `x` in the right singular basis.
    fn right_coords(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rank()).map(|k| dot(self.vt.row(k), x)).collect()
    }

    /// `U^T y`.
    fn left_coords(&self, y: &[f64]) -> Vec<f64> {
        self.u.matvec_transpose(y).expect("shape checked by caller")
    }

    /// `V c`.
    fn from_right_coords(&self, c: &[f64]) -> Vec<f64> {
        self.vt.matvec_transpose(c).expect("shape checked by caller")
    }

    /// `U c`.
    fn from_left_coords(&self, c: &[f64]) -> Vec<f64> {
        self.u.matvec(c).expect("shape checked by caller")
    }

    fn check_domain(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.cols() {
            return Err(NettError::dims(context, self.cols(), x.len()));
        }
        Ok(())
    }

    fn check_range(&self, y: &[f64], context: &'static str) -> Result<()> {
        if y.len() != self.rows() {
            return Err(NettError::dims(context, self.rows(), y.len()));
        }
        Ok(())
    }

    /// Projects `x` onto the retained right singular subspace: `V Vt x`.
    pub fn project_domain(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x, "project_domain")?;
        Ok(self.from_right_coords(&self.right_coords(x)))
    }

    /// Dense `U diag(sigma) Vt`; test and diagnostics use only.
    pub fn to_dense(&self) -> DenseMatrix {
        let (m, n, r) = (self.rows(), self.cols(), self.rank());
        let mut out = DenseMatrix::zeros(m, n);
        for i in 0..m {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..r {
                let a = self.u.get(i, k) * self.sigma[k];
                if a != 0.0 {
                    axpy(a, self.vt.row(k), orow);
                }
            }
        }
        out
    }
}

/// Computes the SVD of `m` and keeps the singular triplets with
/// `sigma >= sigma_star`.
///
/// Columns that are identically zero (masked pixels) are removed before the
/// factorization and reinserted as zero columns of `Vt`; this is exact.
pub fn svd_truncate(m: &DenseMatrix, sigma_star: f64) -> Result<ForwardOperator> {
    if !(sigma_star > 0.0) {
        return Err(NettError::InvalidParameter(format!(
            "sigma_star must be positive, got {sigma_star}"
        )));
    }
    let (rows, cols) = (m.rows(), m.cols());
    let (sigma_all, u_full, vt_full) = thin_svd(m)?;
    let keep = sigma_all.iter().take_while(|&&s| s >= sigma_star).count();
    if keep == 0 {
        return Err(NettError::OperatorAnnihilated { sigma_star });
    }
    let k_full = sigma_all.len();
    let u = DenseMatrix::from_fn(rows, keep, |i, k| u_full[i * k_full + k]);
    let vt = DenseMatrix::from_fn(keep, cols, |k, j| vt_full[k * cols + j]);
    ForwardOperator::from_factors(u, sigma_all[..keep].to_vec(), vt, sigma_star)
}

/// Returns `(sigma, U row-major m x k, Vt row-major k x n)` with `k` the
/// number of non-zero columns bounded by `min(m, n)`.
fn thin_svd(m: &DenseMatrix) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (rows, cols) = (m.rows(), m.cols());
    let active: Vec<usize> = (0..cols)
        .filter(|&j| (0..rows).any(|i| m.get(i, j) != 0.0))
        .collect();
    if active.is_empty() || rows == 0 {
        return Ok((Vec::new(), Vec::new(), Vec::new()));
    }
    let reduced = faer::Mat::<f64>::from_fn(rows, active.len(), |i, j| m.get(i, active[j]));
    let svd = reduced.thin_svd().map_err(|_| NettError::SvdFailed)?;
    let s = svd.S().column_vector();
    let k = s.nrows();
    let sigma: Vec<f64> = (0..k).map(|i| s[i]).collect();
    let uf = svd.U();
    let vf = svd.V();
    let mut u = vec![0.0; rows * k];
    for i in 0..rows {
        for c in 0..k {
            u[i * k + c] = uf[(i, c)];
        }
    }
    let mut vt = vec![0.0; k * cols];
    for c in 0..k {
        for (jr, &j) in active.iter().enumerate() {
            vt[c * cols + j] = vf[(jr, c)];
        }
    }
    Ok((sigma, u, vt))
}

/// `A x = U (Sigma (Vt x))`.
pub fn apply(a: &ForwardOperator, x: &[f64]) -> Result<Vec<f64>> {
    a.check_domain(x, "apply")?;
    let mut c = a.right_coords(x);
    c.iter_mut().zip(&a.sigma).for_each(|(c, s)| *c *= s);
    Ok(a.from_left_coords(&c))
}

/// `A^T y = V (Sigma (U^T y))`.
pub fn apply_adjoint(a: &ForwardOperator, y: &[f64]) -> Result<Vec<f64>> {
    a.check_range(y, "apply_adjoint")?;
    let mut c = a.left_coords(y);
    c.iter_mut().zip(&a.sigma).for_each(|(c, s)| *c *= s);
    Ok(a.from_right_coords(&c))
}

/// `A^+ y = V (Sigma^{-1} (U^T y))`.
pub fn pseudo_inverse_apply(a: &ForwardOperator, y: &[f64]) -> Result<Vec<f64>> {
    a.check_range(y, "pseudo_inverse_apply")?;
    let mut c = a.left_coords(y);
    c.iter_mut().zip(&a.sigma).for_each(|(c, s)| *c /= s);
    Ok(a.from_right_coords(&c))
}

/// Precomputed solver for `(A^T A + shift I) z = b` in the SVD basis.
///
/// A positive `shift` gives the proximal step of the data term. Negative shifts
/// are accepted so the printed `(A^T A - s I)` variant can be reproduced; they
/// fail if `sigma_k^2 + shift` vanishes.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    shift: f64,
    inv_diag: Vec<f64>,
}

impl ShiftedSolver {
    pub fn new(a: &ForwardOperator, shift: f64) -> Result<Self> {
        if shift == 0.0 || !shift.is_finite() {
            return Err(NettError::InvalidParameter(format!(
                "shift must be finite and non-zero, got {shift}"
            )));
        }
        let mut inv_diag = Vec::with_capacity(a.rank());
        for &s in &a.sigma {
            let d = s * s + shift;
            if d.abs() <= f64::EPSILON * s * s {
                return Err(NettError::InvalidParameter(format!(
                    "shifted system is singular: sigma^2 = {} equals -shift",
                    s * s
                )));
            }
            inv_diag.push(1.0 / d);
        }
        Ok(Self { shift, inv_diag })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `z = V diag(1/(sigma^2+shift)) Vt b + (b - V Vt b)/shift`.
    pub fn solve(&self, a: &ForwardOperator, b: &[f64]) -> Result<Vec<f64>> {
        a.check_domain(b, "solve_shifted")?;
        if self.inv_diag.len() != a.rank() {
            return Err(NettError::dims("ShiftedSolver rank", self.inv_diag.len(), a.rank()));
        }
        let c = a.right_coords(b);
        let proj = a.from_right_coords(&c);
        let scaled: Vec<f64> = c.iter().zip(&self.inv_diag).map(|(c, d)| c * d).collect();
        let mut z = a.from_right_coords(&scaled);
        let inv_shift = 1.0 / self.shift;
        for ((z, b), p) in z.iter_mut().zip(b).zip(&proj) {
            *z += (b - p) * inv_shift;
        }
        Ok(z)
    }
}

/// Solves `(A^T A + s I) z = b` for `s > 0`.
pub fn solve_shifted(a: &ForwardOperator, s: f64, b: &[f64]) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(NettError::InvalidParameter(format!(
            "shift s must be positive, got {s}"
        )));
    }
    ShiftedSolver::new(a, s)?.solve(a, b)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op() -> ForwardOperator {
        svd_truncate(&DenseMatrix::diag(&[3.0, 1.0, 0.1]), 0.5).unwrap()
    }

    #[test]
    fn truncation_keeps_large_singular_values() {
        let a = diag_op();
        assert_eq!(a.rank(), 2);
        assert!((a.sigma()[0] - 3.0).abs() < 1e-14);
        assert!((a.sigma()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_round_trips() {
        let a = svd_truncate(&DenseMatrix::identity(4), 0.5).unwrap();
        assert_eq!(a.sigma(), &[1.0; 4]);
        let uvt = a.u().matmul(a.vt()).unwrap();
        assert!(uvt.max_abs_diff(&DenseMatrix::identity(4)) < 1e-14);
    }

    #[test]
    fn annihilated_operator_is_an_error() {
        let err = svd_truncate(&DenseMatrix::diag(&[0.1, 0.01]), 0.5).unwrap_err();
        assert!(matches!(err, NettError::OperatorAnnihilated { .. }));
        let zero = DenseMatrix::zeros(3, 3);
        assert!(matches!(
            svd_truncate(&zero, 0.5),
            Err(NettError::OperatorAnnihilated { .. })
        ));
    }

    #[test]
    fn apply_annihilates_truncated_direction() {
        let a = diag_op();
        assert_eq!(apply(&a, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let y = apply(&a, &[0.0, 0.0, 1.0]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(apply_adjoint(&a, &[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = diag_op();
        assert!(matches!(
            apply(&a, &[1.0, 2.0]),
            Err(NettError::DimensionMismatch { .. })
        ));
        assert!(apply_adjoint(&a, &[1.0; 4]).is_err());
        assert!(pseudo_inverse_apply(&a, &[1.0; 2]).is_err());
        assert!(solve_shifted(&a, 1.0, &[1.0; 5]).is_err());
    }

    #[test]
    fn scalar_pseudo_inverse() {
        let a = svd_truncate(&DenseMatrix::diag(&[2.0]), 0.1).unwrap();
        let x = pseudo_inverse_apply(&a, &[4.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_kills_orthogonal_complement_of_range() {
        let a = diag_op();
        let x = pseudo_inverse_apply(&a, &[0.0, 0.0, 7.0]).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn shifted_solve_scalar_and_complement() {
        let a = svd_truncate(&DenseMatrix::diag(&[2.0]), 0.1).unwrap();
        let v = a.vt().get(0, 0);
        let z = solve_shifted(&a, 1.0, &[5.0 * v]).unwrap();
        assert!((z[0] * v - 1.0).abs() < 1e-14);

        let a = diag_op();
        let z = solve_shifted(&a, 0.25, &[0.0, 0.0, 2.0]).unwrap();
        assert!((z[2] - 8.0).abs() < 1e-14);
        assert!(z[0].abs() < 1e-15 && z[1].abs() < 1e-15);
    }

    #[test]
    fn non_positive_shift_rejected() {
        let a = diag_op();
        assert!(solve_shifted(&a, 0.0, &[1.0; 3]).is_err());
        assert!(solve_shifted(&a, -1.0, &[1.0; 3]).is_err());
    }

    #[test]
    fn negative_shift_reproduces_printed_variant() {
        let a = diag_op();
        let solver = ShiftedSolver::new(&a, -0.25).unwrap();
        let b = [1.0, 1.0, 1.0];
        let z = solver.solve(&a, &b).unwrap();
        // (A^T A - s I) z = b on each coordinate
        let diag = [9.0 - 0.25, 1.0 - 0.25, -0.25];
        for k in 0..3 {
            assert!((diag[k] * z[k] - b[k]).abs() < 1e-13);
        }
        let singular = svd_truncate(&DenseMatrix::diag(&[0.5]), 0.1).unwrap();
        assert!(ShiftedSolver::new(&singular, -0.25).is_err());
    }

    #[test]
    fn zero_columns_are_reinserted() {
        let m = DenseMatrix::from_row_major(2, 3, vec![1.0, 0.0, 2.0, 3.0, 0.0, 4.0]).unwrap();
        let a = svd_truncate(&m, 1e-6).unwrap();
        assert_eq!(a.cols(), 3);
        assert!(a.to_dense().max_abs_diff(&m) < 1e-13);
        assert!((0..a.rank()).all(|k| a.vt().get(k, 1) == 0.0));
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_row_major(1, 2, vec![1.0]).is_err());
    }
}
