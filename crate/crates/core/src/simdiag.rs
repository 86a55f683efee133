//! Simultaneous singular value decomposition of operator families whose
//! pairwise products `R_i†R_j` span a space of dimension at most 2 that
//! contains the identity, and the conversions between such families and
//! controlled unitaries.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DVector;
// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg;
use crate::model::{unitary_scale_within, unitary_similarity_diagonalize};
use crate::schmidt::SchmidtDecomposition;
use crate::{CMatrix, Error, Result, Tolerances, C64};

/// Relative singular-value spread below which `R_K` counts as proportional
/// to a unitary when choosing between the two `ν_L = 0` constructions.
const UNITARY_SPREAD: f64 = 1e-6;

/// Normalized determinant below which `{I, R_K†R_L}` is not a basis of the
/// product span.
const BASIS_DEGENERACY: f64 = 1e-8;

/// Extra pivot candidates formed as fixed linear combinations of the family.
const MIXES: usize = 2;

/// Span of the products `{R_i†R_j}` over all ordered pairs.
#[derive(Clone, Debug)]
pub struct SpanReport {
    pub dim: usize,
    pub contains_identity: bool,
    /// Orthonormal basis of the span, one row-major vectorized operator per
    /// column.
    pub basis: CMatrix,
    /// `‖vec(I) − ΠI‖` for the orthogonal projection `Π` onto the span.
    pub projection_residual_of_identity: f64,
    /// Singular values of the stacked products, descending.
    pub singular_values: Vec<f64>,
}

fn check_family(ops: &[CMatrix]) -> Result<usize> {
    let first = ops.first().ok_or(Error::EmptyFactors)?;
    if !first.is_square() {
        return Err(Error::NotSquare { rows: first.nrows(), cols: first.ncols() });
    }
    for op in ops {
        if op.shape() != first.shape() {
            return Err(Error::DimensionMismatch { expected: first.nrows(), found: op.nrows() });
        }
    }
    Ok(first.nrows())
}

pub fn gram_span(ops: &[CMatrix], tol: &Tolerances) -> Result<SpanReport> {
    let n = check_family(ops)?;
    let mut products = Vec::with_capacity(ops.len() * ops.len());
    for a in ops {
        let a_adj = a.adjoint();
        for b in ops {
            products.push(linalg::vectorize(&(&a_adj * b)));
        }
    }
    let (basis, singular_values) = linalg::span_basis(&products, tol.rank_cut);
    let identity = linalg::vectorize(&CMatrix::identity(n, n));
    let projected = &basis * (basis.adjoint() * &identity);
    let projection_residual_of_identity = (&identity - projected).norm();
    Ok(SpanReport {
        dim: basis.ncols(),
        contains_identity: projection_residual_of_identity <= tol.residual * (n as f64).sqrt(),
        basis,
        projection_residual_of_identity,
        singular_values,
    })
}

/// Which construction produced a [`LocalDiagonalizer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AppendixBranch {
    /// The products span only the identity: every `R_i` is a multiple of one
    /// unitary.
    SingleDirection,
    /// `R_L` is invertible with `ν_L ≠ 0`; the SVD of `R_L` diagonalizes all.
    PivotSvd,
    /// `ν_L = 0` and `R_K` proportional to a unitary: similarity
    /// diagonalization of `W_K†W_L`.
    UnitaryPair,
    /// `ν_L = 0` and `R_K` not proportional to a unitary: eigenbasis of the
    /// Hermitian `R_K†R_K`.
    HermitianSquare,
}

impl AppendixBranch {
    pub const ALL: [AppendixBranch; 4] = [
        AppendixBranch::SingleDirection,
        AppendixBranch::PivotSvd,
        AppendixBranch::UnitaryPair,
        AppendixBranch::HermitianSquare,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            AppendixBranch::SingleDirection => "single_direction",
            AppendixBranch::PivotSvd => "pivot_svd",
            AppendixBranch::UnitaryPair => "unitary_pair",
            AppendixBranch::HermitianSquare => "hermitian_square",
        }
    }
}

/// Unitaries `U`, `V` with every `U R_i V†` diagonal.
#[derive(Clone, Debug)]
pub struct LocalDiagonalizer {
    pub left: CMatrix,
    pub right: CMatrix,
    /// Diagonal of `U R_i V†`, one vector per input operator.
    pub diagonals: Vec<Vec<C64>>,
    /// `max_i ‖offdiag(U R_i V†)‖_F`.
    pub residual: f64,
    pub branch: AppendixBranch,
    /// The `(K, L)` pair used, or `(K, K)` for a single direction.
    /// Indices past the family length refer to the internal combinations.
    pub pivot: (usize, usize),
}

/// Simultaneous SVD of `ops`.
///
/// Requires the products `R_i†R_j` to span at most two dimensions including
/// the identity. In the 2-dimensional case pairs `(K, L)` are scanned with
/// `K` and `L` in descending Frobenius norm (`K` outer, `K = L` allowed).
/// For a pair, every `R_i†R_L` is expanded as `μ_i I + ν_i R_K†R_L` in an
/// orthonormal basis of the span; the pair is usable when some `μ_i` is
/// significant (`|μ_i| > residual · ‖R_L‖`), which makes `R_L` invertible.
/// The first pair whose construction verifies is returned.
pub fn lemma2_diagonalize(ops: &[CMatrix], tol: &Tolerances) -> Result<LocalDiagonalizer> {
    let n = check_family(ops)?;
    let norms: Vec<f64> = ops.iter().map(|r| r.norm()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let rs: Vec<CMatrix> = ops.iter().map(|r| r / C64::new(scale, 0.0)).collect();
    let span = gram_span(&rs, tol)?;
    if span.dim > 2 {
        return Err(Error::PreconditionFailed(format!("product span has dimension {} > 2", span.dim)));
    }
    if !span.contains_identity {
        return Err(Error::PreconditionFailed(format!(
            "identity is not in the product span (residual {:.3e})",
            span.projection_residual_of_identity
        )));
    }

    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    // generic combinations catch families with no invertible member
    let mut cands = rs.clone();
    for mix in 0..MIXES {
        let mut m = CMatrix::zeros(n, n);
        for (i, r) in rs.iter().enumerate() {
            let theta = 0.7 + 1.3 * (i as f64) + 2.1 * (mix as f64) * (i as f64 + 1.0);
            let w = 1.0 + 0.5 * (i as f64) / (mix as f64 + 1.0);
            m += r * C64::new(w * theta.cos(), w * theta.sin());
        }
        order.push(cands.len());
        cands.push(m);
    }
    let finish = |u: CMatrix, v: CMatrix, branch, pivot| -> Option<LocalDiagonalizer> {
        let mut residual = 0.0f64;
        let mut diagonals = Vec::with_capacity(ops.len());
        for r in ops {
            let d = &u * r * v.adjoint();
            residual = residual.max(linalg::offdiag_norm(&d));
            diagonals.push(linalg::diagonal(&d));
        }
        (residual <= tol.residual * scale).then_some(LocalDiagonalizer { left: u, right: v, diagonals, residual, branch, pivot })
    };

    if span.dim == 1 {
        let k = order[0];
        let s = linalg::svd(&rs[k]);
        return finish(s.u.adjoint(), s.v_adj.clone(), AppendixBranch::SingleDirection, (k, k))
            .ok_or(Error::NumericalFailure { stage: "simultaneous SVD (single direction)", residual: f64::NAN });
    }

    let q = &span.basis;
    let e = q.adjoint() * linalg::vectorize(&CMatrix::identity(n, n));
    for &k in &order {
        let rk_adj = cands[k].adjoint();
        for &l in &order {
            let rl = &cands[l];
            let g_op = &rk_adj * rl;
            let g = q.adjoint() * linalg::vectorize(&g_op);
            let det = e[0] * g[1] - e[1] * g[0];
            if det.norm() < BASIS_DEGENERACY * e.norm() * g.norm() {
                continue;
            }
            let coeffs: Option<Vec<[C64; 2]>> = cands
                .iter()
                .map(|ri| {
                    let h: DVector<C64> = q.adjoint() * linalg::vectorize(&(ri.adjoint() * rl));
                    linalg::solve2([[e[0], g[0]], [e[1], g[1]]], [h[0], h[1]])
                })
                .collect();
            let Some(coeffs) = coeffs else { continue };
            let rl_norm = rl.norm();
            if !coeffs.iter().any(|c| c[0].norm() > tol.residual * rl_norm) {
                continue;
            }

            let nu_l = coeffs[l][1];
            let square_norm = (rl.adjoint() * rl).norm();
            if nu_l.norm() * g_op.norm() > tol.residual * square_norm {
                let s = linalg::svd(rl);
                if let Some(found) = finish(s.u.adjoint(), s.v_adj.clone(), AppendixBranch::PivotSvd, (k, l)) {
                    return Ok(found);
                }
                continue;
            }

            let w_l = linalg::polar_unitary(rl);
            let k_unitary = unitary_scale_within(&cands[k], UNITARY_SPREAD, tol)?.is_some();
            let attempts = if k_unitary {
                [AppendixBranch::UnitaryPair, AppendixBranch::HermitianSquare]
            } else {
                [AppendixBranch::HermitianSquare, AppendixBranch::UnitaryPair]
            };
            for branch in attempts {
                let v = match branch {
                    AppendixBranch::UnitaryPair => {
                        let w_k = linalg::polar_unitary(&cands[k]);
                        match unitary_similarity_diagonalize(&(w_k.adjoint() * &w_l), tol) {
                            Ok(sim) => sim.transform,
                            Err(_) => continue,
                        }
                    }
                    _ => linalg::hermitian_eigen(&(&rk_adj * &cands[k])).1.adjoint(),
                };
                let u = &v * w_l.adjoint();
                if let Some(found) = finish(u, v, branch, (k, l)) {
                    return Ok(found);
                }
            }
        }
    }
    Err(Error::NumericalFailure { stage: "simultaneous SVD", residual: f64::NAN })
}

/// Blocks `W_k = Σ_j λ_j a_jk B_j` of the controlled form obtained from a
/// single-party Schmidt decomposition whose left operators `A_j` are
/// diagonalized by `diag` (`U A_j V† = diag(a_j)`).
///
/// `(U ⊗ I) U_total (V ⊗ I)† = Σ_k |k⟩⟨k| ⊗ W_k`, with `W_k` acting on the
/// complement of the control party in increasing party order. Every block
/// must be unitary.
pub fn simultaneous_svd_to_control(
    decomp: &SchmidtDecomposition,
    diag: &LocalDiagonalizer,
    tol: &Tolerances,
) -> Result<Vec<CMatrix>> {
    if decomp.cut.left().len() != 1 {
        return Err(Error::InvalidCut("control side must be a single party".to_string()));
    }
    if diag.diagonals.len() != decomp.rank() {
        return Err(Error::DimensionMismatch { expected: decomp.rank(), found: diag.diagonals.len() });
    }
    let d = decomp.dims.dim(decomp.cut.left()[0]);
    let rest = decomp.dims.subsystem_dim(decomp.cut.right());
    let mut blocks = Vec::with_capacity(d);
    for k in 0..d {
        let mut w = CMatrix::zeros(rest, rest);
        for (j, b) in decomp.right_ops.iter().enumerate() {
            w += b * (diag.diagonals[j][k] * decomp.coeffs[j]);
        }
        let deviation = linalg::unitarity_deviation(&w);
        if deviation > tol.residual {
            return Err(Error::NonUnitaryBlock { index: k, deviation });
        }
        blocks.push(w);
    }
    Ok(blocks)
}

/// Converse direction: a controlled unitary `Σ_k |k⟩⟨k| ⊗ W_k` written as
/// `Σ_j diag(a_j) ⊗ B_j` with Hilbert–Schmidt orthonormal `B_j`, so its left
/// operators share the simultaneous SVD `(I, I)`.
///
/// Returns `(a_j, B_j)` pairs; `a_j[k] = Tr(B_j† W_k)`.
pub fn control_to_diagonals(blocks: &[CMatrix], tol: &Tolerances) -> Result<Vec<(Vec<C64>, CMatrix)>> {
    let m = check_family(blocks)?;
    let vecs: Vec<DVector<C64>> = blocks.iter().map(linalg::vectorize).collect();
    let (basis, _) = linalg::span_basis(&vecs, tol.rank_cut);
    let mut out = Vec::with_capacity(basis.ncols());
    for j in 0..basis.ncols() {
        let b = linalg::devectorize(basis.column(j).iter().copied(), m, m);
        let a = blocks.iter().map(|w| linalg::inner(&b, w)).collect();
        out.push((a, b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cnot, haar_unitary, pauli_x, pauli_z, projector};
    use crate::model::{kron, Cut};
    use crate::schmidt::decompose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gram_span_examples() {
        let id = CMatrix::identity(2, 2);
        let s = gram_span(&[id.clone()], &tol()).unwrap();
        assert_eq!((s.dim, s.contains_identity), (1, true));
        let s = gram_span(&[projector(2, 0), projector(2, 1)], &tol()).unwrap();
        assert_eq!((s.dim, s.contains_identity), (2, true));
        let s = gram_span(&[id, pauli_x(), pauli_z()], &tol()).unwrap();
        assert!(s.dim > 2);
    }

    #[test]
    fn gram_span_without_identity() {
        let s = gram_span(&[projector(3, 0), projector(3, 1)], &tol()).unwrap();
        assert_eq!(s.dim, 2);
        assert!(!s.contains_identity);
        assert!(matches!(lemma2_diagonalize(&[projector(3, 0), projector(3, 1)], &tol()), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn already_diagonal_family() {
        let a = linalg::from_diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let id = CMatrix::identity(2, 2);
        let d = lemma2_diagonalize(&[a, id], &tol()).unwrap();
        assert!(d.residual < 1e-12);
        let mut first: Vec<f64> = d.diagonals[0].iter().map(|z| z.norm()).collect();
        first.sort_by(f64::total_cmp);
        assert!((first[0] - 1.0).abs() < 1e-12 && (first[1] - 2.0).abs() < 1e-12);
        assert!(d.diagonals[1].iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn anticommuting_family_is_rejected() {
        let err = lemma2_diagonalize(&[CMatrix::identity(2, 2), pauli_x(), pauli_z()], &tol()).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed(_)));
    }

    #[test]
    fn single_direction_branch() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let w = haar_unitary(3, &mut rng);
        let ops = [&w * c(2.0, 1.0), &w * c(0.0, -0.5)];
        let d = lemma2_diagonalize(&ops, &tol()).unwrap();
        assert_eq!(d.branch, AppendixBranch::SingleDirection);
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn cnot_blocks_from_simultaneous_svd() {
        let u = cnot();
        let dec = decompose(&u, &Cut::single(0, 2).unwrap(), &tol()).unwrap();
        let diag = lemma2_diagonalize(&dec.left_ops, &tol()).unwrap();
        let blocks = simultaneous_svd_to_control(&dec, &diag, &tol()).unwrap();
        // (U ⊗ I) CNOT (V ⊗ I)† equals the assembled controlled form
        let mut assembled = CMatrix::zeros(4, 4);
        for (k, w) in blocks.iter().enumerate() {
            assembled += kron(&[projector(2, k), w.clone()]).unwrap();
        }
        let id = CMatrix::identity(2, 2);
        let direct = kron(&[diag.left.clone(), id.clone()]).unwrap() * u.matrix() * kron(&[diag.right.adjoint(), id]).unwrap();
        assert!((assembled - direct).norm() < 1e-12);
        // blocks are I and σx up to phases and order
        let mut kinds: Vec<bool> = blocks.iter().map(|w| w[(0, 0)].norm() > 0.5).collect();
        kinds.sort();
        assert_eq!(kinds, [false, true]);
    }

    #[test]
    fn control_to_diagonals_round_trip() {
        let blocks = [CMatrix::identity(2, 2), pauli_x(), CMatrix::identity(2, 2)];
        let pairs = control_to_diagonals(&blocks, &tol()).unwrap();
        assert_eq!(pairs.len(), 2);
        let mut total = CMatrix::zeros(6, 6);
        for (a, b) in &pairs {
            total += kron(&[linalg::from_diagonal(a), b.clone()]).unwrap();
        }
        let mut want = CMatrix::zeros(6, 6);
        for (k, w) in blocks.iter().enumerate() {
            want += kron(&[projector(3, k), w.clone()]).unwrap();
        }
        assert!((total - want).norm() < 1e-12);
    }
}
