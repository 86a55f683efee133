//! Small dense-matrix helpers shared by the decomposition modules.
//!
//! Everything returns owned matrices; sizes here are desk scale (D <= 256).

use alloc::vec::Vec;

use nalgebra::DVector;
// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::{CMatrix, C64};

/// Entries of a singular vector below this modulus are skipped when fixing
/// its phase.
const PHASE_PIVOT: f64 = 1e-8;

/// Thin SVD `m = u * diag(sigma) * v_adj`, singular values descending.
///
/// The first entry of each left singular vector with modulus above `1e-8` is
/// made real positive; the matching row of `v_adj` absorbs the phase.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v_adj: CMatrix,
}

impl Svd {
    /// Number of singular values above `rank_cut * sigma[0]`.
    pub fn rank(&self, rank_cut: f64) -> usize {
        numerical_rank(&self.sigma, rank_cut)
    }
}

pub fn svd(m: &CMatrix) -> Svd {
    let (mut u, sigma, mut v_adj) = if m.nrows() >= m.ncols() {
        let (u, sigma, v) = jacobi_svd(m.clone());
        (u, sigma, v.adjoint())
    } else {
        let (v, sigma, u) = jacobi_svd(m.adjoint());
        (u, sigma, v.adjoint())
    };
    for j in 0..u.ncols() {
        let pivot = (0..u.nrows()).find(|&i| u[(i, j)].norm() > PHASE_PIVOT);
        if let Some(i) = pivot {
            let ph = phase(u[(i, j)]);
            u.column_mut(j).scale_mut_complex(ph.conj());
            v_adj.row_mut(j).scale_mut_complex(ph);
        }
    }
    Svd { u, sigma, v_adj }
}

const JACOBI_EPS: f64 = 1e-15;
const JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi on the columns of a tall `a`: returns `(u, sigma, v)`
/// with `a = u diag(sigma) v†`, `u` of shape `rows x cols`.
fn jacobi_svd(mut a: CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (rows, n) = a.shape();
    let mut v = CMatrix::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= JACOBI_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let ph = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let x = mat[(i, p)];
                        let y = mat[(i, q)] * ph.conj();
                        mat[(i, p)] = x * c - y * s;
                        mat[(i, q)] = x * s + y * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, a.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let top = order.first().map_or(0.0, |o| o.1);
    let mut u = CMatrix::zeros(rows, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(j, s)) in order.iter().enumerate() {
        vs.set_column(k, &v.column(j));
        sigma.push(s);
        if s > JACOBI_EPS * top * (rows.max(n) as f64) && s > 0.0 {
            let col = a.column(j) / C64::new(s, 0.0);
            u.set_column(k, &col);
        } else {
            complete_column(&mut u, k);
        }
    }
    (u, sigma, vs)
}

/// Fill column `k` with a unit vector orthogonal to columns `0..k`.
fn complete_column(u: &mut CMatrix, k: usize) {
    let rows = u.nrows();
    let mut best: Option<(f64, DVector<C64>)> = None;
    for e in 0..rows {
        let mut w = DVector::<C64>::zeros(rows);
        w[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for j in 0..k {
                let proj = u.column(j).dotc(&w);
                w -= u.column(j) * proj;
            }
        }
        let n = w.norm();
        if best.as_ref().map_or(true, |b| n > b.0) {
            best = Some((n, w));
        }
        if n > 0.5 {
            break;
        }
    }
    if let Some((n, w)) = best {
        if n > 0.0 {
            u.set_column(k, &(w / C64::new(n, 0.0)));
        }
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: C64);
}

impl<R, C, S> ScaleComplex for nalgebra::Matrix<C64, R, C, S>
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::StorageMut<C64, R, C>,
{
    fn scale_mut_complex(&mut self, s: C64) {
        for x in self.iter_mut() {
            *x *= s;
        }
    }
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    svd(m).sigma
}

pub fn numerical_rank(sigma: &[f64], rank_cut: f64) -> usize {
    match sigma.first() {
        Some(&top) if top > 0.0 => sigma.iter().filter(|&&s| s > rank_cut * top).count(),
        _ => 0,
    }
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Frobenius norm of the off-diagonal part.
pub fn offdiag_norm(m: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for ((i, j), z) in indexed(m) {
        if i != j {
            acc += z.norm_sqr();
        }
    }
    acc.sqrt()
}

fn indexed(m: &CMatrix) -> impl Iterator<Item = ((usize, usize), C64)> + '_ {
    let rows = m.nrows();
    m.iter().enumerate().map(move |(k, z)| ((k % rows, k / rows), *z))
}

/// `‖M†M − I‖` in operator norm.
pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.ncols();
    op_norm(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// `‖M†M − I‖` in Frobenius norm.
pub fn unitarity_deviation_frob(m: &CMatrix) -> f64 {
    let n = m.ncols();
    (m.adjoint() * m - CMatrix::identity(n, n)).norm()
}

/// Row-major vectorization.
pub fn vectorize(m: &CMatrix) -> DVector<C64> {
    let (r, c) = m.shape();
    DVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: impl IntoIterator<Item = C64>, rows: usize, cols: usize) -> CMatrix {
    let data: Vec<C64> = v.into_iter().collect();
    assert_eq!(data.len(), rows * cols, "devectorize: length mismatch");
    CMatrix::from_row_slice(rows, cols, &data)
}

/// `Tr(A†B)` without shape checks.
pub fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Unit-modulus phase of `z`; `1` for zero.
pub fn phase(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// Unitary polar factor `X Y†` of `m = X Σ Y†`.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let s = svd(m);
    &s.u * &s.v_adj
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues ascending and the
/// matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let herm = (h + h.adjoint()).scale(0.5);
    // positive definite after the shift, so singular vectors are eigenvectors
    let shift = herm.norm() + 1.0;
    let s = svd(&(&herm + CMatrix::identity(n, n).scale(shift)));
    let mut vecs = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for dst in 0..n {
        let col = s.u.column(n - 1 - dst).into_owned();
        values.push((col.adjoint() * &herm * &col)[(0, 0)].re);
        vecs.set_column(dst, &col);
    }
    (values, vecs)
}

/// Unitary `Q` and eigenvalues with `N = Q diag(λ) Q†`, for normal `N`.
///
/// The Hermitian part is diagonalized first; each run of its eigenvalues
/// closer than `gap` is then split by a generic combination of both parts.
pub fn normal_eigen(n: &CMatrix, gap: f64) -> (Vec<C64>, CMatrix) {
    let size = n.nrows();
    let h1 = (n + n.adjoint()).scale(0.5);
    let h2 = (n - n.adjoint()) * C64::new(0.0, -0.5);
    let (v1, q1) = hermitian_eigen(&h1);
    let mut q = CMatrix::zeros(size, size);
    let mut start = 0;
    while start < size {
        let mut end = start + 1;
        while end < size && v1[end] - v1[end - 1] <= gap {
            end += 1;
        }
        let block = q1.columns(start, end - start).into_owned();
        if end - start == 1 {
            q.set_column(start, &block.column(0));
        } else {
            let mix = block.adjoint() * (&h2 + h1.scale(0.618_033_988_749_895)) * &block;
            let (_, w) = hermitian_eigen(&mix);
            q.columns_mut(start, end - start).copy_from(&(&block * w));
        }
        start = end;
    }
    let d = q.adjoint() * n * &q;
    ((0..size).map(|i| d[(i, i)]).collect(), q)
}

/// Orthonormal basis (as columns) of the span of `vectors`, and the singular
/// values of the stacked matrix.
pub fn span_basis(vectors: &[DVector<C64>], rank_cut: f64) -> (CMatrix, Vec<f64>) {
    let len = vectors.first().map_or(0, |v| v.len());
    let mut stacked = CMatrix::zeros(len, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        stacked.set_column(j, v);
    }
    let s = svd(&stacked);
    let dim = s.rank(rank_cut);
    (s.u.columns(0, dim).into_owned(), s.sigma)
}

/// Solve the 2x2 system `m x = b`; `None` when `m` is singular.
pub fn solve2(m: [[C64; 2]; 2], b: [C64; 2]) -> Option<[C64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || det.norm() <= 1e-14 * scale * scale {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Reorder the rows of a left/right local pair and fix their phases.
///
/// Rows are sorted (stably) by the column of their largest-modulus entry in
/// `left`; the same permutation is applied to `right`. Each row of `left`
/// and of `right` is then rescaled so that its largest entry is real
/// positive. If `left · X · right†` is diagonal the result still is, and
/// permutation-times-phase inputs come out as identities.
pub fn align_rows(left: &CMatrix, right: &CMatrix) -> (CMatrix, CMatrix) {
    let n = left.nrows();
    let argmax = |m: &CMatrix, r: usize| {
        let mut best = 0;
        for c in 0..m.ncols() {
            if m[(r, c)].norm() > m[(r, best)].norm() + 1e-12 {
                best = c;
            }
        }
        best
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&r| argmax(left, r));
    let mut l = CMatrix::zeros(n, left.ncols());
    let mut rt = CMatrix::zeros(n, right.ncols());
    for (dst, &src) in order.iter().enumerate() {
        l.set_row(dst, &left.row(src));
        rt.set_row(dst, &right.row(src));
    }
    for r in 0..n {
        let pl = phase(l[(r, argmax(&l, r))]).conj();
        l.row_mut(r).scale_mut_complex(pl);
        let pr = phase(rt[(r, argmax(&rt, r))]).conj();
        rt.row_mut(r).scale_mut_complex(pr);
    }
    (l, rt)
}

pub fn is_diagonal(m: &CMatrix, tol: f64) -> bool {
    offdiag_norm(m) <= tol
}

pub fn diagonal(m: &CMatrix) -> Vec<C64> {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).collect()
}

pub fn from_diagonal(d: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_row_slice(d))
}
