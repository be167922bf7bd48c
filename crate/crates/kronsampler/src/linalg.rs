//! Dense real matrix primitives shared by every other module: row
//! restriction, Gram products, Kronecker products, structured
//! Kronecker-times-vector application, and the Moore-Penrose pseudoinverse.
//!
//! Matrices are stored row-major. Row/column indices in the public
//! selection types are 1-based; the raw accessors on [`DenseMatrix`]
//! are 0-based.

use crate::error::{Error, Result};

/// Default cap on the number of entries a materialized Kronecker product
/// may have (10^8 doubles is 800 MB).
pub const DEFAULT_KRON_CAP: usize = 100_000_000;

/// A dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data. All entries must be finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based (r, c).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    /// 0-based row view.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right factor", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let lhs = self.row(r);
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in lhs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs = other.row(k);
                for (d, &b) in dst.iter_mut().zip(rhs) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("vector of length {}", self.cols),
                got: format!("{}", x.len()),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub(crate) fn to_na(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &nalgebra::DMatrix<f64>) -> DenseMatrix {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        DenseMatrix { rows: m.nrows(), cols: m.ncols(), data }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A sorted set of 1-based row indices into a universe of `universe` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    universe: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    /// Indices must be strictly increasing, 1-based, and within the universe.
    pub fn new(universe: usize, indices: Vec<usize>) -> Result<Self> {
        for (k, &i) in indices.iter().enumerate() {
            if i == 0 || i > universe {
                return Err(Error::IndexOutOfRange { index: i, universe });
            }
            if k > 0 && indices[k - 1] >= i {
                return Err(Error::InvalidInput(format!(
                    "indices must be strictly increasing, got {} after {}",
                    i,
                    indices[k - 1]
                )));
            }
        }
        Ok(Self { universe, indices })
    }

    /// Builds a set from indices in any order (still 1-based, must be unique).
    pub fn from_unsorted(universe: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(universe, indices)
    }

    pub fn all(universe: usize) -> Self {
        Self { universe, indices: (1..=universe).collect() }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// 1-based indices, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// 0-based indices, ascending.
    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().map(|i| i - 1)
    }

    pub fn complement(&self) -> IndexSet {
        let mut inside = vec![false; self.universe + 1];
        for &i in &self.indices {
            inside[i] = true;
        }
        IndexSet {
            universe: self.universe,
            indices: (1..=self.universe).filter(|&i| !inside[i]).collect(),
        }
    }
}

/// Keeps the rows named by `s`, in ascending order.
///
/// Empty selections are rejected; quantities of empty selections (Gram,
/// frame potential) go through [`gram_restricted`], which handles them.
pub fn restrict_rows(m: &DenseMatrix, s: &IndexSet) -> Result<DenseMatrix> {
    if s.universe() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: format!("index universe {}", m.rows()),
            got: format!("{}", s.universe()),
        });
    }
    if s.is_empty() {
        return Err(Error::InvalidInput("cannot restrict to an empty row set".into()));
    }
    let mut data = Vec::with_capacity(s.len() * m.cols());
    for r in s.zero_based() {
        data.extend_from_slice(m.row(r));
    }
    DenseMatrix::new(s.len(), m.cols(), data)
}

/// Gram matrix mᵀm (cols × cols, symmetric positive semidefinite).
pub fn gram(m: &DenseMatrix) -> DenseMatrix {
    let k = m.cols();
    let mut out = DenseMatrix::zeros(k, k);
    for r in 0..m.rows() {
        let u = m.row(r);
        for i in 0..k {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            for j in 0..k {
                out.data[i * k + j] += ui * u[j];
            }
        }
    }
    out
}

/// Gram matrix of a row-restricted matrix, without materializing the
/// restriction: Σ_{n∈s} uₙᵀuₙ.
pub fn gram_restricted(m: &DenseMatrix, s: &IndexSet) -> Result<DenseMatrix> {
    if s.universe() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: format!("index universe {}", m.rows()),
            got: format!("{}", s.universe()),
        });
    }
    let k = m.cols();
    let mut out = DenseMatrix::zeros(k, k);
    for r in s.zero_based() {
        let u = m.row(r);
        for i in 0..k {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            for j in 0..k {
                out.data[i * k + j] += ui * u[j];
            }
        }
    }
    Ok(out)
}

/// Materialized Kronecker product with the default size cap.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    kron_capped(a, b, DEFAULT_KRON_CAP)
}

/// Materialized Kronecker product, refusing results above `cap` entries.
pub fn kron_capped(a: &DenseMatrix, b: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let entries = rows.and_then(|r| cols.and_then(|c| r.checked_mul(c)));
    match entries {
        Some(n) if n <= cap => {}
        _ => {
            return Err(Error::ResourceGuard {
                needed: a.rows() as u128 * b.rows() as u128 * a.cols() as u128 * b.cols() as u128,
                cap: cap as u128,
                hint: "use kron_apply instead of materializing the product".into(),
            })
        }
    }
    let (rows, cols) = (rows.unwrap(), cols.unwrap());
    let mut out = DenseMatrix::zeros(rows, cols);
    for ia in 0..a.rows() {
        for ib in 0..b.rows() {
            let r = ia * b.rows() + ib;
            for ja in 0..a.cols() {
                let av = a.get(ia, ja);
                if av == 0.0 {
                    continue;
                }
                for jb in 0..b.cols() {
                    out.data[r * cols + ja * b.cols() + jb] = av * b.get(ib, jb);
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a list of factors (test and demo helper; the cap
/// applies to every intermediate).
pub fn kron_all(factors: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let mut iter = factors.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("kron_all needs at least one factor".into()))?;
    let mut acc = (*first).clone();
    for f in iter {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

/// Applies (A₁ ⊗ … ⊗ A_R)·x without materializing the product.
///
/// `x` is interpreted as a row-major flattening of a tensor with the
/// factors' column counts as dimensions; the result is the row-major
/// flattening of the tensor with their row counts as dimensions. Memory
/// stays at O(largest intermediate).
pub fn kron_apply(factors: &[&DenseMatrix], x: &[f64]) -> Result<Vec<f64>> {
    if factors.is_empty() {
        return Err(Error::InvalidInput("kron_apply needs at least one factor".into()));
    }
    let expected: usize = factors.iter().map(|f| f.cols()).product();
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {expected}"),
            got: format!("{}", x.len()),
        });
    }
    let mut dims: Vec<usize> = factors.iter().map(|f| f.cols()).collect();
    let mut cur = x.to_vec();
    for (r, f) in factors.iter().enumerate() {
        cur = mode_apply(&cur, &dims, r, f);
        dims[r] = f.rows();
    }
    Ok(cur)
}

/// Multiplies one tensor mode by a matrix: out[..., n, ...] = Σ_k A[n,k]·in[..., k, ...].
fn mode_apply(data: &[f64], dims: &[usize], mode: usize, a: &DenseMatrix) -> Vec<f64> {
    let k = dims[mode];
    debug_assert_eq!(a.cols(), k);
    let n = a.rows();
    let outer: usize = dims[..mode].iter().product();
    let inner: usize = dims[mode + 1..].iter().product();
    let mut out = vec![0.0; outer * n * inner];

    let body = |o: usize, out_block: &mut [f64]| {
        let in_block = &data[o * k * inner..(o + 1) * k * inner];
        for nn in 0..n {
            let dst = &mut out_block[nn * inner..(nn + 1) * inner];
            for kk in 0..k {
                let w = a.get(nn, kk);
                if w == 0.0 {
                    continue;
                }
                let src = &in_block[kk * inner..(kk + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if outer * n * inner >= 1 << 14 && outer > 1 {
            out.par_chunks_mut(n * inner).enumerate().for_each(|(o, block)| body(o, block));
            return out;
        }
    }
    for (o, block) in out.chunks_mut(n * inner).enumerate() {
        body(o, block);
    }
    out
}

/// Pseudoinverse and the numerical rank it was computed at.
#[derive(Debug, Clone)]
pub struct Pinv {
    pub matrix: DenseMatrix,
    pub rank: usize,
    /// Singular values at or below this threshold were treated as zero.
    pub cutoff: f64,
}

/// Moore-Penrose pseudoinverse through an SVD with the conventional
/// max(rows, cols)·ε·σ_max rank cutoff.
pub fn pinv(m: &DenseMatrix) -> Pinv {
    let svd = m.to_na().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = m.rows().max(m.cols()) as f64 * f64::EPSILON * smax;
    let mut rank = 0;
    // pinv = V Σ⁺ Uᵀ
    let p = svd.singular_values.len();
    let mut sinv = nalgebra::DMatrix::<f64>::zeros(p, p);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            sinv[(i, i)] = 1.0 / s;
            rank += 1;
        }
    }
    let pinv_na = vt.transpose() * sinv * u.transpose();
    Pinv { matrix: DenseMatrix::from_na(&pinv_na), rank, cutoff }
}

/// Eigenvalues of a symmetric matrix (ascending order not guaranteed).
pub(crate) fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    m.to_na().symmetric_eigen().eigenvalues.iter().cloned().collect()
}
