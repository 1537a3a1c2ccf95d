//! Dense kernels: truncated pseudo-inverse, symmetric square roots, SVD helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{GfiError, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-8;

/// Singular triplets sorted by descending singular value.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub singular_values: Vector,
    pub left_vectors: DenseMatrix,
    pub right_vectors: DenseMatrix,
}

impl SvdResult {
    /// Thin SVD of `m`.
    pub fn of(m: &DenseMatrix) -> Result<Self> {
        ensure_finite(m, "svd input")?;
        let svd = m.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let k = order.len();
        let mut s = Vector::zeros(k);
        let mut left = DenseMatrix::zeros(m.nrows(), k);
        let mut right = DenseMatrix::zeros(m.ncols(), k);
        for (dst, &src) in order.iter().enumerate() {
            s[dst] = svd.singular_values[src];
            left.set_column(dst, &u.column(src));
            right.set_column(dst, &vt.row(src).transpose());
        }
        Ok(Self {
            singular_values: s,
            left_vectors: left,
            right_vectors: right,
        })
    }

    /// Number of singular values above `tol * largest`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let top = self.singular_values.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > tol * top)
            .count()
    }
}

pub fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GfiError::NonFinite(what.to_string()))
    }
}

/// Square and symmetric to `1e-8` relative to the largest entry.
pub fn ensure_symmetric(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(GfiError::Contract(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, what)?;
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(GfiError::Contract(format!(
                    "{what} is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
///
/// Only the lower triangle is read.
pub fn symmetric_eigen(h: &DenseMatrix) -> Result<(Vector, DenseMatrix)> {
    let n = h.nrows();
    let m = faer::MatRef::from_column_major_slice(h.as_slice(), n, n);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| GfiError::Singular(format!("eigendecomposition failed: {e:?}")))?;
    let values = Vector::from_iterator(n, evd.S().column_vector().iter().copied());
    let u = evd.U();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

/// A truncated pseudo-inverse together with the spectrum bookkeeping used to build it.
#[derive(Clone, Debug)]
pub struct TruncatedPinv {
    pub matrix: DenseMatrix,
    /// Largest singular value of the input.
    pub zeta1: f64,
    /// Singular values below this were treated as zero.
    pub cutoff: f64,
    pub rank: usize,
}

/// Cutoff below which singular values are discarded.
pub fn pinv_cutoff(zeta1: f64, c: f64, dim: usize) -> f64 {
    if c > 0.0 {
        c * zeta1
    } else {
        zeta1 * 1e-12 * dim as f64
    }
}

/// Pseudo-inverse of a symmetric matrix, dropping singular values below `c * zeta1`.
///
/// For symmetric input the singular values are the absolute eigenvalues, so the
/// decomposition is done with a symmetric eigensolver and each retained eigenpair
/// contributes `v v^T / lambda`. With `c = 0` only values below
/// `zeta1 * 1e-12 * dim` are dropped.
pub fn truncated_pinv(h: &DenseMatrix, c: f64) -> Result<DenseMatrix> {
    Ok(truncated_pinv_detail(h, c)?.matrix)
}

pub fn truncated_pinv_detail(h: &DenseMatrix, c: f64) -> Result<TruncatedPinv> {
    ensure_symmetric(h, "truncated_pinv input")?;
    if !(0.0..1.0).contains(&c) {
        return Err(GfiError::Contract(format!(
            "threshold constant must lie in [0, 1), got {c}"
        )));
    }
    let n = h.nrows();
    let (values, vectors) = symmetric_eigen(&symmetrize(h))?;
    let zeta1 = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if zeta1 == 0.0 {
        return Ok(TruncatedPinv {
            matrix: DenseMatrix::zeros(n, n),
            zeta1,
            cutoff: 0.0,
            rank: 0,
        });
    }
    let cutoff = pinv_cutoff(zeta1, c, n);
    let mut out = DenseMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &lambda) in values.iter().enumerate() {
        if lambda.abs() < cutoff {
            continue;
        }
        rank += 1;
        let v = vectors.column(k);
        out.ger(1.0 / lambda, &v, &v, 1.0);
    }
    Ok(TruncatedPinv {
        matrix: symmetrize(&out),
        zeta1,
        cutoff,
        rank,
    })
}

/// Square root and its pseudo-inverse for a symmetric positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct SymmetricRoot {
    pub sqrt: DenseMatrix,
    pub pinv_sqrt: DenseMatrix,
    /// Orthogonal projector onto the range of the input.
    pub range_projector: DenseMatrix,
    pub eigenvalues: Vector,
    pub eigenvectors: DenseMatrix,
    /// Eigenvalues at or below this were treated as zero.
    pub zero_cutoff: f64,
}

impl SymmetricRoot {
    pub fn new(l: &DenseMatrix) -> Result<Self> {
        ensure_symmetric(l, "square-root input")?;
        let n = l.nrows();
        let (eigenvalues, eigenvectors) = symmetric_eigen(&symmetrize(l))?;
        let lambda_max = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * lambda_max.max(1.0) {
            return Err(GfiError::Contract(format!(
                "square-root input is not positive semidefinite (eigenvalue {min})"
            )));
        }
        let cutoff = 1e-10 * lambda_max;
        let mut sqrt = DenseMatrix::zeros(n, n);
        let mut pinv_sqrt = DenseMatrix::zeros(n, n);
        let mut proj = DenseMatrix::zeros(n, n);
        let mut values = eigenvalues;
        for k in 0..n {
            let lambda = values[k];
            if lambda <= cutoff || lambda_max == 0.0 {
                values[k] = 0.0;
                continue;
            }
            let v = eigenvectors.column(k);
            let root = lambda.sqrt();
            sqrt.ger(root, &v, &v, 1.0);
            pinv_sqrt.ger(1.0 / root, &v, &v, 1.0);
            proj.ger(1.0, &v, &v, 1.0);
        }
        Ok(Self {
            sqrt: symmetrize(&sqrt),
            pinv_sqrt: symmetrize(&pinv_sqrt),
            range_projector: symmetrize(&proj),
            eigenvalues: values,
            eigenvectors,
            zero_cutoff: cutoff,
        })
    }
}

/// `(L^{1/2}, (L^{1/2})^pinv)` via eigendecomposition, zeroing eigenvalues below
/// `1e-10 * lambda_max`.
pub fn matrix_sqrt_and_pinv_sqrt(l: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let root = SymmetricRoot::new(l)?;
    Ok((root.sqrt, root.pinv_sqrt))
}

/// Solve `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &DenseMatrix, b: &Vector) -> Result<Vector> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| GfiError::Singular("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Orthonormal basis for the columns of `m` (thin QR).
pub fn orthonormal_columns(m: &DenseMatrix) -> DenseMatrix {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix signs so the diagonal of R is nonnegative; keeps results deterministic
    for k in 0..q.ncols().min(r.nrows()) {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Leading `rank` singular triplets via block subspace iteration.
///
/// Intended for tall-and-wide matrices where only a handful of triplets is needed.
/// Falls back to the full SVD when `rank` is close to the smaller dimension.
pub fn top_singular(m: &DenseMatrix, rank: usize, tol: f64, max_iter: usize) -> Result<SvdResult> {
    ensure_finite(m, "top_singular input")?;
    let small = m.nrows().min(m.ncols());
    if rank == 0 || rank > small {
        return Err(GfiError::InvalidInput(format!(
            "requested {rank} singular triplets from a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let block = (rank + 4).min(small);
    if 2 * block >= small {
        let full = SvdResult::of(m)?;
        return Ok(truncate_svd(full, rank));
    }
    // deterministic start: a fixed pseudo-random pattern
    let mut v = DenseMatrix::from_fn(m.ncols(), block, |i, j| {
        let x = ((i * 7919 + j * 104_729 + 17) % 1009) as f64 / 1009.0;
        x - 0.5
    });
    v = orthonormal_columns(&v);
    let mut prev = Vector::zeros(block);
    for _ in 0..max_iter {
        let u = orthonormal_columns(&(m * &v));
        let w = m.transpose() * &u;
        v = orthonormal_columns(&w);
        let small_svd = SvdResult::of(&(u.transpose() * m * &v))?;
        let s = small_svd.singular_values.rows(0, rank).into_owned();
        let change = (&s - prev.rows(0, rank)).amax();
        prev.rows_mut(0, rank).copy_from(&s);
        if change <= tol * s[0].max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let u = orthonormal_columns(&(m * &v));
    let core = SvdResult::of(&(u.transpose() * m * &v))?;
    let full = SvdResult {
        singular_values: core.singular_values.clone(),
        left_vectors: &u * &core.left_vectors,
        right_vectors: &v * &core.right_vectors,
    };
    Ok(truncate_svd(full, rank))
}

fn truncate_svd(s: SvdResult, rank: usize) -> SvdResult {
    SvdResult {
        singular_values: s.singular_values.rows(0, rank).into_owned(),
        left_vectors: s.left_vectors.columns(0, rank).into_owned(),
        right_vectors: s.right_vectors.columns(0, rank).into_owned(),
    }
}
