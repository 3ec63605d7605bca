//! Small dense linear-algebra kernel.
//!
//! The only factorization is Householder QR with column pivoting. Minimum-norm
//! least squares factors `Aᵀ` rather than `A`: the leading `r` Householder
//! vectors then span the row space of `A`, so the minimum-norm solution is
//! obtained by solving a reduced `m x r` full-column-rank problem and mapping
//! it back through those reflectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative pivot threshold used for every rank decision.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix or right-hand side contains a non-finite entry")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumericsError::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Column vector.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
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

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, NumericsError> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if x.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    pub fn max_column_norm(&self) -> f64 {
        let mut sq = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sq.iter_mut().zip(self.row(i)) {
                *s += v * v;
            }
        }
        sq.into_iter().fold(0.0, f64::max).sqrt()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of [`min_norm_least_squares`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub rank: usize,
}

/// Householder QR with column pivoting of a column-major `rows x cols` buffer.
struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Column-major; after factorization the upper triangle holds R and the
    /// part below the diagonal of column k holds reflector k (implicit 1 on
    /// the diagonal).
    a: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    fn factor(rows: usize, cols: usize, mut a: Vec<f64>, threshold: f64) -> Self {
        debug_assert_eq!(a.len(), rows * cols);
        let steps = rows.min(cols);
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut norms: Vec<f64> = (0..cols).map(|j| norm2(&a[j * rows..(j + 1) * rows])).collect();
        let mut reference = norms.clone();
        let mut tau = Vec::with_capacity(steps);
        let mut rank = 0;

        for k in 0..steps {
            let p = (k..cols)
                .max_by(|&i, &j| norms[i].total_cmp(&norms[j]))
                .expect("non-empty pivot range");
            if p != k {
                for r in 0..rows {
                    a.swap(k * rows + r, p * rows + r);
                }
                norms.swap(k, p);
                reference.swap(k, p);
                perm.swap(k, p);
            }

            let (head, tail) = a.split_at_mut((k + 1) * rows);
            let col = &mut head[k * rows + k..];
            let xnorm = norm2(col);
            if xnorm <= threshold {
                break;
            }
            let alpha = if col[0] > 0.0 { -xnorm } else { xnorm };
            let v0 = col[0] - alpha;
            for v in col[1..].iter_mut() {
                *v /= v0;
            }
            let t = (alpha - col[0]) / alpha;
            col[0] = alpha;
            tau.push(t);
            rank = k + 1;

            let v = &col[1..];
            for j in (k + 1)..cols {
                let cj = &mut tail[(j - k - 1) * rows + k..(j - k) * rows];
                let s = t * (cj[0] + dot(v, &cj[1..]));
                cj[0] -= s;
                for (c, &vi) in cj[1..].iter_mut().zip(v) {
                    *c -= s * vi;
                }
                if norms[j] > 0.0 {
                    let ratio = cj[0].abs() / norms[j];
                    let shrink = (1.0 - ratio * ratio).max(0.0);
                    let drift = shrink * (norms[j] / reference[j]).powi(2);
                    if drift <= f64::EPSILON.sqrt() {
                        norms[j] = norm2(&cj[1..]);
                        reference[j] = norms[j];
                    } else {
                        norms[j] *= shrink.sqrt();
                    }
                }
            }
        }

        Self {
            rows,
            cols,
            a,
            tau,
            perm,
            rank,
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.rows + i]
    }

    /// Applies `Q = H_0 H_1 ... H_{rank-1}` to `x` (length `rows`).
    fn apply_q(&self, x: &mut [f64]) {
        for k in (0..self.rank).rev() {
            self.reflect(k, x);
        }
    }

    /// Applies `Qᵀ` to `x`.
    fn apply_qt(&self, x: &mut [f64]) {
        for k in 0..self.rank {
            self.reflect(k, x);
        }
    }

    fn reflect(&self, k: usize, x: &mut [f64]) {
        let v = &self.a[k * self.rows + k + 1..(k + 1) * self.rows];
        let s = self.tau[k] * (x[k] + dot(v, &x[k + 1..]));
        x[k] -= s;
        for (xi, &vi) in x[k + 1..].iter_mut().zip(v) {
            *xi -= s * vi;
        }
    }
}

fn rank_threshold(a: &DenseMatrix) -> f64 {
    RANK_TOLERANCE * a.max_column_norm()
}

/// Minimum-ℓ₂-norm minimizer of `‖Ax − b‖` for an arbitrary (possibly
/// rank-deficient, wide or tall) `A`.
pub fn min_norm_least_squares(a: &DenseMatrix, b: &[f64]) -> Result<LeastSquares, NumericsError> {
    if b.len() != a.rows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "right-hand side of length {} for {} rows",
            b.len(),
            a.rows()
        )));
    }
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let (m, n) = (a.rows(), a.cols());
    // Row-major A is column-major Aᵀ.
    let qr = PivotedQr::factor(n, m, a.as_slice().to_vec(), rank_threshold(a));
    let r = qr.rank;

    // Aᵀ P = Q R  =>  A = P Rᵀ Qᵀ. With w = Q_rᵀ x the problem becomes
    // min ‖L w − Pᵀ b‖ where L = R_rᵀ is m x r lower trapezoidal.
    let pb: Vec<f64> = qr.perm.iter().map(|&p| b[p]).collect();
    let w = if r == 0 {
        Vec::new()
    } else if r == m {
        // square lower-triangular system
        let mut w = vec![0.0; r];
        for j in 0..r {
            let mut s = pb[j];
            for (k, wk) in w.iter().enumerate().take(j) {
                s -= qr.r(k, j) * wk;
            }
            w[j] = s / qr.r(j, j);
        }
        w
    } else {
        // L has full column rank r; solve it by an unpivoted QR.
        let mut l = vec![0.0; m * r];
        for k in 0..r {
            for j in k..m {
                l[k * m + j] = qr.r(k, j);
            }
        }
        let inner = PivotedQr::factor_unpivoted(m, r, l);
        let mut rhs = pb.clone();
        inner.apply_qt(&mut rhs);
        let mut w = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = rhs[i];
            for (j, wj) in w.iter().enumerate().skip(i + 1) {
                s -= inner.r(i, j) * wj;
            }
            w[i] = s / inner.r(i, i);
        }
        w
    };

    let mut x = vec![0.0; n];
    x[..r].copy_from_slice(&w);
    qr.apply_q(&mut x);

    let ax = a.matvec(&x)?;
    let residual_norm = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(LeastSquares {
        solution: x,
        residual_norm,
        rank: r,
    })
}

impl PivotedQr {
    fn factor_unpivoted(rows: usize, cols: usize, mut a: Vec<f64>) -> Self {
        let mut tau = Vec::with_capacity(cols);
        for k in 0..cols.min(rows) {
            let (head, tail) = a.split_at_mut((k + 1) * rows);
            let col = &mut head[k * rows + k..];
            let xnorm = norm2(col);
            if xnorm == 0.0 {
                tau.push(0.0);
                continue;
            }
            let alpha = if col[0] > 0.0 { -xnorm } else { xnorm };
            let v0 = col[0] - alpha;
            if v0 == 0.0 {
                tau.push(0.0);
                continue;
            }
            for v in col[1..].iter_mut() {
                *v /= v0;
            }
            let t = (alpha - col[0]) / alpha;
            col[0] = alpha;
            tau.push(t);
            let v = &col[1..];
            for j in (k + 1)..cols {
                let cj = &mut tail[(j - k - 1) * rows + k..(j - k) * rows];
                let s = t * (cj[0] + dot(v, &cj[1..]));
                cj[0] -= s;
                for (c, &vi) in cj[1..].iter_mut().zip(v) {
                    *c -= s * vi;
                }
            }
        }
        let rank = tau.len();
        Self {
            rows,
            cols,
            a,
            tau,
            perm: (0..cols).collect(),
            rank,
        }
    }
}

/// Numerical rank at the same threshold as [`min_norm_least_squares`].
pub fn numerical_rank(a: &DenseMatrix) -> Result<usize, NumericsError> {
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let threshold = rank_threshold(a);
    if threshold == 0.0 {
        return Ok(0);
    }
    let qr = PivotedQr::factor(a.cols(), a.rows(), a.as_slice().to_vec(), threshold);
    debug_assert!(qr.cols == a.rows());
    Ok(qr.rank)
}

/// Left-to-right product `ms[0] · ms[1] ⋯ ms[last]`; the empty product is the
/// `dim x dim` identity.
pub fn matrix_product_accumulate(ms: &[DenseMatrix], dim: usize) -> Result<DenseMatrix, NumericsError> {
    let mut acc = DenseMatrix::identity(dim);
    for m in ms {
        acc = acc.matmul(m)?;
    }
    Ok(acc)
}
