//! Multipartite operators, party cuts and basic numerical predicates.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::ops::Range;

// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg;
use crate::{CMatrix, Error, Result, C64};

/// Ordered local dimensions of a multipartite system.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartyDims {
    dims: Vec<usize>,
    total: usize,
}

impl PartyDims {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidDims("no parties".to_string()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDims(format!("zero dimension in {dims:?}")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidDims("total dimension overflows".to_string()))?;
        Ok(PartyDims { dims, total })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of parties.
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dim(&self, party: usize) -> usize {
        self.dims[party]
    }

    /// Per-party digits of a flat index, party 0 most significant.
    pub fn split_index(&self, mut flat: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for (slot, &d) in digits.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        digits
    }

    pub fn join_index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }

    /// Product of the dimensions of `parties`.
    pub fn subsystem_dim(&self, parties: &[usize]) -> usize {
        parties.iter().map(|&p| self.dims[p]).product()
    }
}

/// Square complex matrix acting on the tensor product described by `dims`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipartiteOperator {
    dims: PartyDims,
    matrix: CMatrix,
}

impl MultipartiteOperator {
    pub fn new(dims: PartyDims, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: matrix.nrows() });
        }
        Ok(MultipartiteOperator { dims, matrix })
    }

    pub fn dims(&self) -> &PartyDims {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }
}

/// Numerical thresholds used throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Singular values at or below `rank_cut * largest` count as zero.
    pub rank_cut: f64,
    /// Absolute threshold for residuals (unitarity, diagonality, reconstruction).
    pub residual: f64,
    /// Single-linkage radius for grouping eigenvalues.
    pub eig_cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank_cut: 1e-9, residual: 1e-8, eig_cluster: 1e-7 }
    }
}

impl Tolerances {
    pub fn new(rank_cut: f64, residual: f64, eig_cluster: f64) -> Result<Self> {
        let t = Tolerances { rank_cut, residual, eig_cluster };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.rank_cut) && positive(self.residual) && positive(self.eig_cluster)) {
            return Err(Error::InvalidTolerances("all tolerances must be finite and > 0".to_string()));
        }
        if self.rank_cut >= 1.0 {
            return Err(Error::InvalidTolerances("rank_cut must be < 1".to_string()));
        }
        Ok(())
    }

    /// Same tolerances with a different residual threshold.
    pub fn with_residual(mut self, residual: f64) -> Self {
        self.residual = residual;
        self
    }
}

/// Bipartition of the parties into `left` (S) and `right` (the complement).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cut {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Cut {
    pub fn new(left: &[usize], parties: usize) -> Result<Self> {
        let mut l: Vec<usize> = left.to_vec();
        l.sort_unstable();
        l.dedup();
        if l.len() != left.len() {
            return Err(Error::InvalidCut(format!("repeated party in {left:?}")));
        }
        if let Some(&bad) = l.iter().find(|&&p| p >= parties) {
            return Err(Error::InvalidCut(format!("party {bad} out of range for {parties} parties")));
        }
        if l.is_empty() || l.len() == parties {
            return Err(Error::InvalidCut("left side must be a nonempty proper subset".to_string()));
        }
        let right = (0..parties).filter(|p| !l.contains(p)).collect();
        Ok(Cut { left: l, right })
    }

    /// `{party} | rest`.
    pub fn single(party: usize, parties: usize) -> Result<Self> {
        Cut::new(&[party], parties)
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn parties(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn complement(&self) -> Cut {
        Cut { left: self.right.clone(), right: self.left.clone() }
    }

    fn check(&self, dims: &PartyDims) -> Result<()> {
        if self.parties() != dims.len() {
            return Err(Error::InvalidCut(format!(
                "cut covers {} parties, operator has {}",
                self.parties(),
                dims.len()
            )));
        }
        Ok(())
    }
}

/// Kronecker product, first factor most significant.
pub fn kron(factors: &[CMatrix]) -> Result<CMatrix> {
    let (first, rest) = factors.split_first().ok_or(Error::EmptyFactors)?;
    for f in factors {
        if !f.is_square() {
            return Err(Error::NotSquare { rows: f.nrows(), cols: f.ncols() });
        }
    }
    Ok(rest.iter().fold(first.clone(), |acc, f| acc.kronecker(f)))
}

/// Returns `(⊗ lefts) U (⊗ rights)†`; `None` entries stand for identities.
pub fn apply_locals(
    u: &MultipartiteOperator,
    lefts: &[Option<CMatrix>],
    rights: &[Option<CMatrix>],
    tol: &Tolerances,
) -> Result<MultipartiteOperator> {
    let dims = u.dims();
    let expand = |locals: &[Option<CMatrix>]| -> Result<CMatrix> {
        if locals.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: locals.len() });
        }
        let mut factors = Vec::with_capacity(dims.len());
        for (party, local) in locals.iter().enumerate() {
            let d = dims.dim(party);
            match local {
                None => factors.push(CMatrix::identity(d, d)),
                Some(m) => {
                    if m.nrows() != d || m.ncols() != d {
                        return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
                    }
                    let deviation = linalg::unitarity_deviation(m);
                    if deviation > tol.residual {
                        return Err(Error::NonUnitary { deviation });
                    }
                    factors.push(m.clone());
                }
            }
        }
        kron(&factors)
    };
    let left = expand(lefts)?;
    let right = expand(rights)?;
    MultipartiteOperator::new(dims.clone(), left * u.matrix() * right.adjoint())
}

/// For every flat index, its (S, S̄) digit pair under `cut`.
fn cut_coordinates(dims: &PartyDims, cut: &Cut) -> Vec<(usize, usize)> {
    (0..dims.total())
        .map(|flat| {
            let digits = dims.split_index(flat);
            let fold = |parties: &[usize]| parties.iter().fold(0, |acc, &p| acc * dims.dim(p) + digits[p]);
            (fold(cut.left()), fold(cut.right()))
        })
        .collect()
}

/// Realignment across `cut`.
///
/// `R[(i_S·d_S + j_S), (i_S̄·d_S̄ + j_S̄)] = U[i, j]`, where `i_S` is the
/// flat index of the S-digits of `i` (parties of S in increasing order,
/// first most significant) and likewise for the other sub-indices. The
/// singular values of `R` are the operator Schmidt coefficients.
pub fn reshuffle(u: &MultipartiteOperator, cut: &Cut) -> Result<CMatrix> {
    let dims = u.dims();
    cut.check(dims)?;
    let ds = dims.subsystem_dim(cut.left());
    let dr = dims.subsystem_dim(cut.right());
    let coords = cut_coordinates(dims, cut);
    let m = u.matrix();
    let mut r = CMatrix::zeros(ds * ds, dr * dr);
    for (i, &(is, ir)) in coords.iter().enumerate() {
        for (j, &(js, jr)) in coords.iter().enumerate() {
            r[(is * ds + js, ir * dr + jr)] = m[(i, j)];
        }
    }
    Ok(r)
}

/// Inverse of [`reshuffle`].
pub fn unreshuffle(r: &CMatrix, dims: &PartyDims, cut: &Cut) -> Result<MultipartiteOperator> {
    cut.check(dims)?;
    let ds = dims.subsystem_dim(cut.left());
    let dr = dims.subsystem_dim(cut.right());
    if r.nrows() != ds * ds || r.ncols() != dr * dr {
        return Err(Error::DimensionMismatch { expected: ds * ds, found: r.nrows() });
    }
    let coords = cut_coordinates(dims, cut);
    let mut m = CMatrix::zeros(dims.total(), dims.total());
    for (i, &(is, ir)) in coords.iter().enumerate() {
        for (j, &(js, jr)) in coords.iter().enumerate() {
            m[(i, j)] = r[(is * ds + js, ir * dr + jr)];
        }
    }
    MultipartiteOperator::new(dims.clone(), m)
}

/// `A ⊗ B` with `A` on the S side of `cut` and `B` on the complement,
/// returned in party order.
pub fn embed_product(dims: &PartyDims, cut: &Cut, a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    cut.check(dims)?;
    let ds = dims.subsystem_dim(cut.left());
    let dr = dims.subsystem_dim(cut.right());
    if a.shape() != (ds, ds) {
        return Err(Error::DimensionMismatch { expected: ds, found: a.nrows() });
    }
    if b.shape() != (dr, dr) {
        return Err(Error::DimensionMismatch { expected: dr, found: b.nrows() });
    }
    let coords = cut_coordinates(dims, cut);
    let mut m = CMatrix::zeros(dims.total(), dims.total());
    for (i, &(is, ir)) in coords.iter().enumerate() {
        for (j, &(js, jr)) in coords.iter().enumerate() {
            m[(i, j)] = a[(is, js)] * b[(ir, jr)];
        }
    }
    Ok(m)
}

/// Hilbert–Schmidt inner product `Tr(A†B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(linalg::inner(a, b))
}

/// `‖M†M − I‖ ≤ tol.residual` in operator norm.
pub fn is_unitary(m: &CMatrix, tol: &Tolerances) -> bool {
    m.is_square() && linalg::unitarity_deviation(m) <= tol.residual
}

/// If `M = s·W` with `W` unitary, returns `s`.
///
/// Requires the singular values to agree within a relative spread of
/// `tol.rank_cut`. `|s|` is their mean; the phase of `s` is the phase of
/// the first row-major entry of `M` whose modulus exceeds
/// `tol.residual · max|M_ij|`, so that entry of `W` is real positive.
pub fn proportional_to_unitary(m: &CMatrix, tol: &Tolerances) -> Result<Option<C64>> {
    unitary_scale_within(m, tol.rank_cut, tol)
}

/// [`proportional_to_unitary`] with an explicit relative spread.
pub fn unitary_scale_within(m: &CMatrix, spread: f64, tol: &Tolerances) -> Result<Option<C64>> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let sigma = linalg::singular_values(m);
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let bottom = *sigma.last().unwrap();
    if (top - bottom) / top > spread {
        return Ok(None);
    }
    let modulus = sigma.iter().sum::<f64>() / sigma.len() as f64;
    let biggest = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (rows, cols) = m.shape();
    let pivot = (0..rows * cols)
        .map(|k| m[(k / cols, k % cols)])
        .find(|z| z.norm() > tol.residual * biggest)
        .expect("nonzero matrix has a pivot");
    Ok(Some(linalg::phase(pivot) * modulus))
}

/// A group of numerically equal eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenCluster {
    /// Mean of the member eigenvalues.
    pub value: C64,
    /// Positions of the members in the sorted eigenvalue list.
    pub members: Range<usize>,
}

/// Output of [`unitary_similarity_diagonalize`]: `transform · N · transform†`
/// is `diag(eigvals)`.
#[derive(Clone, Debug)]
pub struct SimilarityDiagonalization {
    pub transform: CMatrix,
    pub eigvals: Vec<C64>,
    pub clusters: Vec<EigenCluster>,
}

impl SimilarityDiagonalization {
    /// Orthogonal projector onto the eigenspace of cluster `k`.
    pub fn cluster_projector(&self, k: usize) -> CMatrix {
        let n = self.transform.ncols();
        let mut p = CMatrix::zeros(n, n);
        for r in self.clusters[k].members.clone() {
            let row = self.transform.row(r);
            p += row.adjoint() * row;
        }
        p
    }
}

/// Phase angle in `[0, 2π)`; angles within `snap` below `2π` map to 0.
fn phase_angle(z: C64, snap: f64) -> f64 {
    let mut a = z.im.atan2(z.re);
    if a < 0.0 {
        a += TAU;
    }
    if TAU - a <= snap {
        a = 0.0;
    }
    a
}

/// Unitary `S` with `S N S†` diagonal, for normal `N`.
///
/// Eigenvalues are grouped by single linkage with radius `tol.eig_cluster`;
/// clusters are ordered by the phase angle of their mean in `[0, 2π)`, ties
/// broken by modulus, and each cluster's members share one orthonormal
/// eigenbasis (consecutive rows of `S`).
pub fn unitary_similarity_diagonalize(n: &CMatrix, tol: &Tolerances) -> Result<SimilarityDiagonalization> {
    if !n.is_square() {
        return Err(Error::NotSquare { rows: n.nrows(), cols: n.ncols() });
    }
    let size = n.nrows();
    let scale = linalg::op_norm(n).max(1.0);
    let deviation = linalg::op_norm(&(n.adjoint() * n - n * n.adjoint()));
    if deviation > tol.residual * scale * scale {
        return Err(Error::NonNormal { deviation });
    }
    let (raw, q) = linalg::normal_eigen(n, 1e-6 * scale);

    // single-linkage clustering
    let mut label: Vec<usize> = (0..size).collect();
    for i in 0..size {
        for j in 0..i {
            if (raw[i] - raw[j]).norm() <= tol.eig_cluster * scale {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    let keep = a.min(b);
                    for l in label.iter_mut() {
                        if *l == a || *l == b {
                            *l = keep;
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<(C64, Vec<usize>)> = Vec::new();
    for i in 0..size {
        if label[i] == i {
            let members: Vec<usize> = (0..size).filter(|&k| label[k] == i).collect();
            let mean = members.iter().map(|&k| raw[k]).sum::<C64>() / members.len() as f64;
            groups.push((mean, members));
        }
    }
    let snap = tol.eig_cluster;
    groups.sort_by(|a, b| {
        phase_angle(a.0, snap)
            .total_cmp(&phase_angle(b.0, snap))
            .then(a.0.norm().total_cmp(&b.0.norm()))
    });

    let q_adj = q.adjoint();
    let mut transform = CMatrix::zeros(size, size);
    let mut eigvals = Vec::with_capacity(size);
    let mut clusters = Vec::with_capacity(groups.len());
    for (mean, members) in groups {
        let start = eigvals.len();
        for k in members {
            transform.set_row(eigvals.len(), &q_adj.row(k));
            eigvals.push(raw[k]);
        }
        clusters.push(EigenCluster { value: mean, members: start..eigvals.len() });
    }
    let off = linalg::offdiag_norm(&(&transform * n * transform.adjoint()));
    if off > tol.residual * scale {
        return Err(Error::NumericalFailure { stage: "similarity diagonalization", residual: off });
    }
    Ok(SimilarityDiagonalization { transform, eigvals, clusters })
}
