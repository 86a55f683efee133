//! Control-party detection for unitaries of any operator Schmidt rank and the
//! span-dimension diagnostics for sums of product operators.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::linalg;
use crate::model::{kron, reshuffle, Cut};
use crate::schmidt::decompose;
use crate::simdiag::{gram_span, lemma2_diagonalize, simultaneous_svd_to_control, LocalDiagonalizer};
use crate::{CMatrix, Error, MultipartiteOperator, PartyDims, Result, Tolerances, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    CanControl,
    /// The sufficient condition does not hold; the party may or may not be
    /// able to control.
    Unknown,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::CanControl => "can_control",
            Verdict::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartyScan {
    pub party: usize,
    pub schmidt_rank: usize,
    pub span_dim: usize,
    pub contains_identity: bool,
    pub verdict: Verdict,
    /// Present exactly when the verdict is [`Verdict::CanControl`].
    pub diagonalizer: Option<LocalDiagonalizer>,
}

#[derive(Clone, Debug)]
pub struct ControlScanReport {
    pub parties: Vec<PartyScan>,
}

impl ControlScanReport {
    pub fn can_control(&self) -> Vec<usize> {
        self.parties.iter().filter(|s| s.verdict == Verdict::CanControl).map(|s| s.party).collect()
    }

    /// `{α}|rest` Schmidt ranks in party order.
    pub fn schmidt_profile(&self) -> Vec<usize> {
        self.parties.iter().map(|s| s.schmidt_rank).collect()
    }
}

/// For every party, test whether the products of its `{α}|rest` Schmidt
/// operators span at most two dimensions; if so, diagonalize them and
/// confirm the resulting blocks are unitary.
pub fn theorem9_scan(u: &MultipartiteOperator, tol: &Tolerances) -> Result<ControlScanReport> {
    let deviation = linalg::unitarity_deviation(u.matrix());
    if deviation > tol.residual {
        return Err(Error::NonUnitary { deviation });
    }
    let p = u.parties();
    let mut parties = Vec::with_capacity(p);
    for party in 0..p {
        let dec = decompose(u, &Cut::single(party, p)?, tol)?;
        let span = gram_span(&dec.left_ops, tol)?;
        let mut diagonalizer = None;
        if span.dim <= 2 && span.contains_identity {
            if let Ok(diag) = lemma2_diagonalize(&dec.left_ops, tol) {
                if simultaneous_svd_to_control(&dec, &diag, tol).is_ok() {
                    diagonalizer = Some(diag);
                }
            }
        }
        parties.push(PartyScan {
            party,
            schmidt_rank: dec.rank(),
            span_dim: span.dim,
            contains_identity: span.contains_identity,
            verdict: if diagonalizer.is_some() { Verdict::CanControl } else { Verdict::Unknown },
            diagonalizer,
        });
    }
    Ok(ControlScanReport { parties })
}

/// Dimension of the linear span of `ops`.
pub fn operator_span_dim(ops: &[CMatrix], tol: &Tolerances) -> usize {
    let vecs: Vec<DVector<C64>> = ops.iter().map(linalg::vectorize).collect();
    if vecs.is_empty() {
        return 0;
    }
    linalg::span_basis(&vecs, tol.rank_cut).0.ncols()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Theorem4Report {
    pub delta1: usize,
    pub delta2: usize,
    pub terms: usize,
    /// `δ₁ + δ₂ ≤ N + 1`.
    pub holds: bool,
}

/// Span dimensions of the two sides of `Σ_k c_k M_k^{(1)} ⊗ M_k^{(2)}`,
/// which must be a single product operator, and whether
/// `δ₁ + δ₂ ≤ N + 1`.
pub fn theorem4_check(terms: &[(CMatrix, CMatrix)], coeffs: &[C64], tol: &Tolerances) -> Result<Theorem4Report> {
    if terms.is_empty() {
        return Err(Error::EmptyFactors);
    }
    if terms.len() != coeffs.len() {
        return Err(Error::DimensionMismatch { expected: terms.len(), found: coeffs.len() });
    }
    if coeffs.iter().any(|c| c.norm() == 0.0) {
        return Err(Error::PreconditionFailed("zero coefficient".into()));
    }
    let (d1, d2) = (terms[0].0.nrows(), terms[0].1.nrows());
    let dims = PartyDims::new([d1, d2])?;
    let mut sum = CMatrix::zeros(d1 * d2, d1 * d2);
    for ((a, b), c) in terms.iter().zip(coeffs) {
        if a.shape() != (d1, d1) || b.shape() != (d2, d2) {
            return Err(Error::DimensionMismatch { expected: d1, found: a.nrows() });
        }
        sum += kron(&[a.clone(), b.clone()])? * *c;
    }
    let total = MultipartiteOperator::new(dims, sum)?;
    let sv = linalg::singular_values(&reshuffle(&total, &Cut::single(0, 2)?)?);
    let rank = linalg::numerical_rank(&sv, tol.rank_cut);
    if rank != 1 {
        return Err(Error::PreconditionFailed(format!("sum has Schmidt rank {rank}, expected 1")));
    }
    let left: Vec<CMatrix> = terms.iter().map(|t| t.0.clone()).collect();
    let right: Vec<CMatrix> = terms.iter().map(|t| t.1.clone()).collect();
    let delta1 = operator_span_dim(&left, tol);
    let delta2 = operator_span_dim(&right, tol);
    Ok(Theorem4Report { delta1, delta2, terms: terms.len(), holds: delta1 + delta2 <= terms.len() + 1 })
}

/// Expansion of `U†U` across `cut` from the Schmidt decomposition
/// `U = Σ_j λ_j A_j ⊗ B_j`: terms `(A_j†A_k, B_j†B_k)` with coefficients
/// `λ_j λ_k`.
pub fn unitarity_expansion(
    u: &MultipartiteOperator,
    cut: &Cut,
    tol: &Tolerances,
) -> Result<(Vec<(CMatrix, CMatrix)>, Vec<C64>)> {
    let dec = decompose(u, cut, tol)?;
    let r = dec.rank();
    let mut terms = Vec::with_capacity(r * r);
    let mut coeffs = Vec::with_capacity(r * r);
    for j in 0..r {
        for k in 0..r {
            terms.push((dec.left_ops[j].adjoint() * &dec.left_ops[k], dec.right_ops[j].adjoint() * &dec.right_ops[k]));
            coeffs.push(C64::new(dec.coeffs[j] * dec.coeffs[k], 0.0));
        }
    }
    Ok((terms, coeffs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StackedSpan {
    /// `dim span{M_j^α ⊗ M_j^β}`.
    pub stacked: usize,
    /// `dim span{M_j^α}`.
    pub alpha: usize,
}

/// Span dimensions of `{M_j^α ⊗ M_j^β}` and `{M_j^α}`; the first is never
/// smaller when every `M_j^β` is nonzero.
pub fn stacked_span_dims(alpha: &[CMatrix], beta: &[CMatrix], tol: &Tolerances) -> Result<StackedSpan> {
    if alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), found: beta.len() });
    }
    let stacked: Vec<CMatrix> = alpha.iter().zip(beta).map(|(a, b)| a.kronecker(b)).collect();
    Ok(StackedSpan { stacked: operator_span_dim(&stacked, tol), alpha: operator_span_dim(alpha, tol) })
}
