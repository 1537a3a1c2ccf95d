//! Matrix-free application of a truncated pseudo-inverse.
//!
//! For large structured Hessians the dense eigendecomposition behind
//! [`truncated_pinv`](super::linalg::truncated_pinv) is too expensive to run once per
//! fiducial draw. [`truncated_pinv_apply`] computes the same vector `H_c^pinv b`
//! using only matrix-vector products:
//!
//! 1. Lanczos estimates the largest singular value `zeta1`.
//! 2. Rayleigh-Ritz on a block Krylov space grown from a caller-supplied guess of the
//!    near-null space isolates every eigenpair with `|lambda| < c * zeta1`.
//! 3. Lanczos on the deflated operator certifies that nothing else sits below the
//!    cutoff.
//! 4. Conjugate gradients solve the deflated system, which is well conditioned
//!    (condition number at most `1 / c`).
//!
//! Whenever a step cannot be certified the routine materializes the operator and
//! falls back to the dense kernel, so the result never silently differs from it.

use nalgebra::SymmetricEigen;

use super::linalg::{pinv_cutoff, symmetric_eigen, truncated_pinv, DenseMatrix, Vector};
use super::rng::{gaussian, RandomStream};
use crate::error::{GfiError, Result};

pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;

    fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut out = DenseMatrix::zeros(n, n);
        let mut e = Vector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            out.set_column(j, &self.apply(&e));
            e[j] = 0.0;
        }
        (&out + out.transpose()) * 0.5
    }
}

impl SymmetricOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        self * x
    }
    fn to_dense(&self) -> DenseMatrix {
        self.clone()
    }
}

#[derive(Clone, Debug)]
pub struct KrylovOptions {
    pub lanczos_steps: usize,
    pub block_depth: usize,
    pub extra_vectors: usize,
    /// Residual tolerance for dropped eigenpairs, relative to `zeta1`.
    pub residual_tol: f64,
    pub cg_tol: f64,
    pub max_cg_iter: usize,
    /// Relative gap required between the cutoff and any retained eigenvalue estimate.
    pub margin: f64,
    pub max_restarts: usize,
    /// Problems at or below this size go straight to the dense kernel.
    pub dense_below: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            lanczos_steps: 40,
            block_depth: 12,
            extra_vectors: 4,
            residual_tol: 1e-9,
            cg_tol: 1e-13,
            max_cg_iter: 1000,
            margin: 0.05,
            max_restarts: 4,
            dense_below: 48,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveRoute {
    Krylov,
    Dense,
}

#[derive(Clone, Debug)]
pub struct TruncatedSolve {
    pub solution: Vector,
    pub zeta1: f64,
    /// Number of eigen-directions treated as zero.
    pub dropped: usize,
    pub route: SolveRoute,
}

/// `H_c^pinv b` for a symmetric operator `H`, without forming `H` when possible.
///
/// `seed_block` holds (approximate) vectors of the space expected to fall below the
/// cutoff; it only affects speed, never the answer.
pub fn truncated_pinv_apply<O: SymmetricOperator + ?Sized>(
    op: &O,
    rhs: &Vector,
    c: f64,
    seed_block: Option<&DenseMatrix>,
    opts: &KrylovOptions,
) -> Result<TruncatedSolve> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(GfiError::Dimension(format!(
            "operator has dimension {n}, right-hand side {}",
            rhs.len()
        )));
    }
    if !(0.0..1.0).contains(&c) {
        return Err(GfiError::Contract(format!(
            "threshold constant must lie in [0, 1), got {c}"
        )));
    }
    if n <= opts.dense_below || c == 0.0 {
        return dense_route(op, rhs, c);
    }
    match krylov_route(op, rhs, c, seed_block, opts)? {
        Some(solve) => Ok(solve),
        None => dense_route(op, rhs, c),
    }
}

fn dense_route<O: SymmetricOperator + ?Sized>(
    op: &O,
    rhs: &Vector,
    c: f64,
) -> Result<TruncatedSolve> {
    let h = op.to_dense();
    super::linalg::ensure_symmetric(&h, "truncated_pinv input")?;
    let n = h.nrows();
    let (values, vectors) = symmetric_eigen(&h)?;
    let zeta1 = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut solution = Vector::zeros(n);
    let mut dropped = n;
    if zeta1 > 0.0 {
        let cutoff = pinv_cutoff(zeta1, c, n);
        let coefs = vectors.tr_mul(rhs);
        for (k, &lambda) in values.iter().enumerate() {
            if lambda.abs() >= cutoff {
                dropped -= 1;
                solution.axpy(coefs[k] / lambda, &vectors.column(k), 1.0);
            }
        }
    }
    Ok(TruncatedSolve {
        solution,
        zeta1,
        dropped,
        route: SolveRoute::Dense,
    })
}

fn project_out(basis: &[Vector], w: &mut Vector) {
    for _ in 0..2 {
        for q in basis {
            let coef = q.dot(w);
            w.axpy(-coef, q, 1.0);
        }
    }
}

fn project_out_matrix(y: Option<&DenseMatrix>, w: &mut Vector) {
    if let Some(y) = y {
        for _ in 0..2 {
            let coefs = y.tr_mul(w);
            *w -= y * coefs;
        }
    }
}

fn start_vector(n: usize, hint: &Vector, deflate: Option<&DenseMatrix>) -> Option<Vector> {
    let pattern =
        Vector::from_vec(gaussian(&RandomStream::new(0x1a2b_3c4d, n as u64), n, 1.0).ok()?);
    let mut v = hint + pattern * (hint.norm().max(1.0) * 1e-3);
    project_out_matrix(deflate, &mut v);
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v / norm)
}

/// Extreme Ritz values `(min, max)` of `op` (optionally deflated) from a Lanczos run
/// with full reorthogonalization.
pub fn lanczos_extremes<O: SymmetricOperator + ?Sized>(
    op: &O,
    start: &Vector,
    steps: usize,
    deflate: Option<&DenseMatrix>,
) -> Option<(f64, f64)> {
    let n = op.dim();
    let mut q = start_vector(n, start, deflate)?;
    let mut basis: Vec<Vector> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    for _ in 0..steps.min(n) {
        let mut w = op.apply(&q);
        project_out_matrix(deflate, &mut w);
        let a = q.dot(&w);
        alpha.push(a);
        basis.push(q.clone());
        project_out(&basis, &mut w);
        project_out_matrix(deflate, &mut w);
        let b = w.norm();
        let scale = alpha
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        if b <= 1e-12 * scale {
            break;
        }
        beta.push(b);
        q = w / b;
    }
    let k = alpha.len();
    if k == 0 {
        return None;
    }
    let mut t = DenseMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Some((min, max))
}

/// Conjugate gradients; `None` on negative curvature or if the tolerance is not met.
pub fn conjugate_gradient<F: Fn(&Vector) -> Vector>(
    apply: F,
    b: &Vector,
    tol: f64,
    max_iter: usize,
) -> Option<Vector> {
    let mut x = Vector::zeros(b.len());
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Some(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let curv = p.dot(&ap);
        if !(curv > 0.0) {
            return None;
        }
        let step = rs / curv;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rs_new = r.dot(&r);
        if rs_new.sqrt() <= tol * bnorm {
            return Some(x);
        }
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
    }
    None
}

fn orthonormalize_into(
    basis: &mut Vec<Vector>,
    candidates: Vec<Vector>,
    drop_tol: f64,
) -> Vec<usize> {
    let mut added = Vec::new();
    for mut v in candidates {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        project_out(basis, &mut v);
        let norm = v.norm();
        if norm > drop_tol * norm0 {
            basis.push(v / norm);
            added.push(basis.len() - 1);
        }
    }
    added
}

/// Rayleigh-Ritz on a block Krylov space; returns Ritz values, vectors and residual norms.
fn block_rayleigh_ritz<O: SymmetricOperator + ?Sized>(
    op: &O,
    start: Vec<Vector>,
    opts: &KrylovOptions,
) -> (Vec<f64>, Vec<Vector>, Vec<f64>) {
    let n = op.dim();
    let mut basis: Vec<Vector> = Vec::new();
    let mut images: Vec<Vector> = Vec::new();
    let mut block = orthonormalize_into(&mut basis, start, 1e-10);
    for depth in 0..=opts.block_depth {
        let new_images: Vec<Vector> = block.iter().map(|&i| op.apply(&basis[i])).collect();
        images.extend(new_images.iter().cloned());
        if depth == opts.block_depth || basis.len() >= n / 2 {
            break;
        }
        block = orthonormalize_into(&mut basis, new_images, 1e-8);
        if block.is_empty() {
            break;
        }
    }
    let k = images.len();
    let q = DenseMatrix::from_columns(&basis[..k]);
    let hq = DenseMatrix::from_columns(&images);
    let t = q.tr_mul(&hq);
    let t = (&t + t.transpose()) * 0.5;
    let ritz = SymmetricEigen::new(t);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let theta = ritz.eigenvalues[j];
        let w = ritz.eigenvectors.column(j);
        let y = &q * w;
        let r = &hq * w - &y * theta;
        values.push(theta);
        residuals.push(r.norm());
        vectors.push(y);
    }
    (values, vectors, residuals)
}

fn krylov_route<O: SymmetricOperator + ?Sized>(
    op: &O,
    rhs: &Vector,
    c: f64,
    seed_block: Option<&DenseMatrix>,
    opts: &KrylovOptions,
) -> Result<Option<TruncatedSolve>> {
    let n = op.dim();
    if rhs.norm() == 0.0 {
        return Ok(Some(TruncatedSolve {
            solution: Vector::zeros(n),
            zeta1: f64::NAN,
            dropped: 0,
            route: SolveRoute::Krylov,
        }));
    }
    let Some((lo, hi)) = lanczos_extremes(op, rhs, opts.lanczos_steps, None) else {
        return Ok(None);
    };
    let zeta1 = lo.abs().max(hi.abs());
    if zeta1 == 0.0 || !zeta1.is_finite() {
        return Ok(None);
    }
    let cutoff = pinv_cutoff(zeta1, c, n);

    // block Krylov space from the seed block plus a few fixed pseudo-random vectors,
    // restarted from the current small Ritz vectors until they converge
    let mut start: Vec<Vector> = Vec::new();
    if let Some(seed) = seed_block {
        if seed.nrows() != n {
            return Err(GfiError::Dimension(
                "seed block row count differs from operator".into(),
            ));
        }
        start.extend(seed.column_iter().map(|c| c.into_owned()));
    }
    for k in 0..opts.extra_vectors {
        let z = gaussian(&RandomStream::new(0x6b72_796c, k as u64), n, 1.0)?;
        start.push(Vector::from_vec(z));
    }
    let mut dropped: Vec<Vector> = Vec::new();
    let mut converged = false;
    for _ in 0..=opts.max_restarts {
        let (ritz_values, ritz_vectors, residuals) =
            block_rayleigh_ritz(op, std::mem::take(&mut start), opts);
        dropped.clear();
        let mut ok = true;
        let mut order: Vec<usize> = (0..ritz_values.len()).collect();
        order.sort_by(|&a, &b| ritz_values[a].abs().total_cmp(&ritz_values[b].abs()));
        for &j in &order {
            let theta = ritz_values[j];
            if theta.abs() < cutoff {
                if residuals[j] > opts.residual_tol * zeta1 {
                    ok = false;
                }
                dropped.push(ritz_vectors[j].clone());
            } else if theta.abs() < cutoff * (1.0 + opts.margin) {
                return Ok(None);
            }
        }
        if ok {
            converged = true;
            break;
        }
        let keep = dropped.len() + opts.extra_vectors;
        start = order
            .iter()
            .take(keep)
            .map(|&j| ritz_vectors[j].clone())
            .collect();
    }
    if !converged {
        return Ok(None);
    }
    let y = if dropped.is_empty() {
        None
    } else {
        Some(DenseMatrix::from_columns(&dropped))
    };

    // nothing else may sit below the cutoff once the dropped space is removed
    let deflated = |x: &Vector| {
        let mut v = x.clone();
        project_out_matrix(y.as_ref(), &mut v);
        let mut w = op.apply(&v);
        project_out_matrix(y.as_ref(), &mut w);
        w
    };
    struct Deflated<'a, F: Fn(&Vector) -> Vector>(usize, &'a F);
    impl<F: Fn(&Vector) -> Vector> SymmetricOperator for Deflated<'_, F> {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &Vector) -> Vector {
            (self.1)(x)
        }
    }
    let deflated_op = Deflated(n, &deflated);
    let Some((dlo, _)) = lanczos_extremes(&deflated_op, rhs, opts.lanczos_steps, y.as_ref()) else {
        return Ok(None);
    };
    if dlo < cutoff * (1.0 + opts.margin) {
        return Ok(None);
    }

    let mut b = rhs.clone();
    project_out_matrix(y.as_ref(), &mut b);
    let Some(mut x) = conjugate_gradient(&deflated, &b, opts.cg_tol, opts.max_cg_iter) else {
        return Ok(None);
    };
    project_out_matrix(y.as_ref(), &mut x);
    Ok(Some(TruncatedSolve {
        solution: x,
        zeta1,
        dropped: dropped.len(),
        route: SolveRoute::Krylov,
    }))
}

/// Dense reference for [`truncated_pinv_apply`].
pub fn truncated_pinv_apply_dense(h: &DenseMatrix, rhs: &Vector, c: f64) -> Result<Vector> {
    Ok(truncated_pinv(h, c)? * rhs)
}
