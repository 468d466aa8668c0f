//! Dense complex linear algebra primitives.
//!
//! Everything in the crate runs on [`ComplexMatrix`], a dense row-major
//! complex matrix. Vectorization is column-stacking throughout: `vec(M)`
//! stacks the columns of `M`, so `vec(AXB) = (Bᵀ ⊗ A) vec(X)`. Tensor
//! indices are ordered with subsystem A slowest, matching `ρ = Σ |i⟩⟨j|_A ⊗
//! Q^{(ij)}`.

use ndarray::Array2;
use ndarray_linalg::{Eigh, SVD, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative Hermiticity tolerance: a matrix H is accepted as Hermitian when
/// ‖H − H†‖_F ≤ TAU_HERM_REL · max(‖H‖_F, 1e-300).
pub const TAU_HERM_REL: f64 = 1e-10;

/// Absolute eigenvalue clip for PSD checks.
pub const TAU_PSD: f64 = 1e-9;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Build from row-major data, rejecting NaN/Inf entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{}×{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        for (k, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite {
                    row: k / cols,
                    col: k % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Real matrix lifted to complex.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            data.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// |v⟩⟨w| for column vectors v, w.
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖M − M†‖_F.
    pub fn hermiticity_violation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - self[(j, i)].conj();
                s += d.norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_violation() <= rel_tol * self.frobenius_norm().max(1e-300)
    }

    /// Error unless Hermitian within `TAU_HERM_REL`; returns (M + M†)/2.
    pub fn require_hermitian(&self) -> Result<Self> {
        let violation = self.hermiticity_violation();
        let tol = TAU_HERM_REL * self.frobenius_norm().max(1e-300);
        if violation > tol {
            return Err(Error::NotHermitian { violation, tol });
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        }))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}×{} times {}×{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let lhs = k * other.cols;
                let dst = i * other.cols;
                for j in 0..other.cols {
                    out.data[dst + j] += a * other.data[lhs + j];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Hilbert–Schmidt inner product tr(self† · other).
    pub fn hs_inner(&self, other: &Self) -> C64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub(crate) fn to_ndarray(&self) -> Array2<C64> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .expect("shape invariant")
    }

    pub(crate) fn from_ndarray(a: &Array2<C64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().cloned().collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Tripartite dimension split (d_A, d_B, d_C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimSplit {
    pub d_a: usize,
    pub d_b: usize,
    pub d_c: usize,
}

impl DimSplit {
    pub fn new(d_a: usize, d_b: usize, d_c: usize) -> Result<Self> {
        if d_a == 0 || d_b == 0 || d_c == 0 {
            return Err(Error::InvalidParameter(
                "subsystem dimensions must be positive".into(),
            ));
        }
        Ok(Self { d_a, d_b, d_c })
    }

    pub fn total(&self) -> usize {
        self.d_a * self.d_b * self.d_c
    }

    pub fn as_vec(&self) -> Vec<usize> {
        vec![self.d_a, self.d_b, self.d_c]
    }
}

/// Eigendecomposition of a Hermitian matrix: H = V diag(λ) V†, λ ascending.
pub fn herm_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let h = h.require_hermitian()?;
    let a = h.to_ndarray();
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    // The backend hands back the conjugate of the eigenvector matrix for
    // complex input (column-major LAPACK output reinterpreted row-major);
    // conjugating restores H·v_k = λ_k·v_k for the columns.
    let v = ComplexMatrix::from_ndarray(&vecs).conj();
    debug_assert!({
        let col = v.column(0);
        let hv = h.matvec(&col);
        let lam = vals.first().copied().unwrap_or(0.0);
        hv.iter()
            .zip(&col)
            .map(|(a, b)| (a - b * lam).norm())
            .sum::<f64>()
            <= 1e-8 * (1.0 + h.frobenius_norm())
    });
    Ok((vals.to_vec(), v))
}

/// Eigenvalues only, ascending.
pub fn herm_eigvals(h: &ComplexMatrix) -> Result<Vec<f64>> {
    herm_eig(h).map(|(vals, _)| vals)
}

/// Thin singular value decomposition M = U diag(s) V†.
///
/// U is rows×k and V is cols×k with k = min(rows, cols); singular values are
/// returned in descending order.
pub fn svd(m: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    for (k, z) in m.data.iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite {
                row: k / m.cols,
                col: k % m.cols,
            });
        }
    }
    let a = m.to_ndarray();
    let (u, s, vt) = a.svd(true, true)?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V†");
    let k = s.len();
    let u = ComplexMatrix::from_fn(m.rows, k, |i, j| u[[i, j]]);
    let v = ComplexMatrix::from_fn(m.cols, k, |i, j| vt[[j, i]].conj());
    Ok((u, s.to_vec(), v))
}

/// Numerical rank at relative threshold `rank_tol`.
pub fn numerical_rank(singulars: &[f64], rank_tol: f64) -> usize {
    let s_max = singulars.first().copied().unwrap_or(0.0);
    if s_max == 0.0 {
        return 0;
    }
    singulars.iter().filter(|&&s| s > rank_tol * s_max).count()
}

/// Moore–Penrose pseudoinverse; singular values ≤ rank_tol·s_max are dropped.
pub fn pinv(m: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    let (u, s, v) = svd(m)?;
    let rank = numerical_rank(&s, rank_tol);
    let mut out = ComplexMatrix::zeros(m.cols, m.rows);
    for r in 0..rank {
        let inv = 1.0 / s[r];
        for i in 0..m.cols {
            let vi = v[(i, r)] * inv;
            for j in 0..m.rows {
                out[(i, j)] += vi * u[(j, r)].conj();
            }
        }
    }
    Ok(out)
}

/// Kronecker product with the left factor as the slower tensor index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let z = a[(ia, ja)];
            if z.norm_sqr() == 0.0 {
                continue;
            }
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = z * b[(ib, jb)];
                }
            }
        }
    }
    out
}

fn check_dims(m: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows != total {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}×{}, subsystem dims {:?} require {}×{}",
            m.rows, m.cols, dims, total, total
        )));
    }
    Ok(())
}

/// Row-major strides for a tensor index list.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn unravel(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
    out
}

/// Partial trace over the subsystems listed in `traced`.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], traced: &[usize]) -> Result<ComplexMatrix> {
    check_dims(m, dims)?;
    for &t in traced {
        if t >= dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "traced subsystem {} out of range for {:?}",
                t, dims
            )));
        }
    }
    let st = strides(dims);
    let kept: Vec<usize> = (0..dims.len()).filter(|i| !traced.contains(i)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let d_keep: usize = kept_dims.iter().product();
    let d_tr: usize = traced_dims.iter().product();

    let offset = |multi: &[usize], subs: &[usize]| -> usize {
        multi.iter().zip(subs).map(|(&v, &s)| v * st[s]).sum()
    };

    let mut out = ComplexMatrix::zeros(d_keep, d_keep);
    for i in 0..d_keep {
        let mi = unravel(i, &kept_dims);
        let oi = offset(&mi, &kept);
        for j in 0..d_keep {
            let mj = unravel(j, &kept_dims);
            let oj = offset(&mj, &kept);
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..d_tr {
                let mt = unravel(t, &traced_dims);
                let ot = offset(&mt, traced);
                acc += m[(oi + ot, oj + ot)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Transpose on the selected tensor factor only.
pub fn partial_transpose(m: &ComplexMatrix, dims: &[usize], sys: usize) -> Result<ComplexMatrix> {
    check_dims(m, dims)?;
    if sys >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem {} out of range for {:?}",
            sys, dims
        )));
    }
    let st = strides(dims);
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let vi = unravel(i, dims);
        for j in 0..n {
            let vj = unravel(j, dims);
            let i2 = i - vi[sys] * st[sys] + vj[sys] * st[sys];
            let j2 = j - vj[sys] * st[sys] + vi[sys] * st[sys];
            out[(i2, j2)] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Reorder tensor factors: output factor k is input factor `perm[k]`.
pub fn permute_systems(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix> {
    check_dims(m, dims)?;
    if perm.len() != dims.len() {
        return Err(Error::DimensionMismatch(
            "permutation length must match dims".into(),
        ));
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let st_new = strides(&new_dims);
    let n = m.rows;
    let remap = |idx: usize| -> usize {
        let multi = unravel(idx, dims);
        perm.iter()
            .enumerate()
            .map(|(k, &p)| multi[p] * st_new[k])
            .sum()
    };
    let row_map: Vec<usize> = (0..n).map(remap).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(row_map[i], row_map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Principal square root of a PSD Hermitian matrix.
///
/// Eigenvalues in [−TAU_PSD, 0) are clipped to zero; anything lower is an
/// error.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = herm_eig(m)?;
    let min_eig = vals.first().copied().unwrap_or(0.0);
    if min_eig < -TAU_PSD {
        return Err(Error::NotPositiveSemidefinite {
            min_eig,
            tol: TAU_PSD,
        });
    }
    let roots: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let r = roots[k];
        if r == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = vecs[(i, k)] * r;
            for j in 0..n {
                out[(i, j)] += vi * vecs[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

/// Trace norm ‖M‖₁ = sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    let (_, s, _) = svd(m)?;
    Ok(s.iter().sum())
}

/// Column-stacking vectorization: vec(M)[j·rows + i] = M[i, j].
pub fn vec_mat(m: &ComplexMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.rows * m.cols);
    for j in 0..m.cols {
        for i in 0..m.rows {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec_mat`].
pub fn unvec(v: &[C64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot fill a {}×{} matrix",
            v.len(),
            rows,
            cols
        )));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| v[j * rows + i]))
}
