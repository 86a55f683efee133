//! Fully controlled and diagonal forms of operator-Schmidt-rank-2 unitaries,
//! and two-term control for the bipartite case.
//!
//! A [`ControlledFormCertificate`] lists local unitaries `(L_α, R_α)` for
//! every party. Applying only the control parties' locals,
//! `(⊗_c L_c ⊗ I) U (⊗_c R_c ⊗ I)†`, gives `Σ_k |k⟩⟨k| ⊗ W_k` with `k` the
//! multi-index of the control parties (ascending party order, first most
//! significant) and `W_k` acting on the target party. Applying the target's
//! locals as well gives the diagonal `diag(diagonal_phases)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg;
use crate::model::{apply_locals, embed_product, unitary_similarity_diagonalize, Cut};
use crate::schmidt::{decompose, product_rank2_decompose, ProductExpansion2};
use crate::simdiag::{gram_span, lemma2_diagonalize, AppendixBranch};
use crate::{CMatrix, Error, MultipartiteOperator, PartyDims, Result, Tolerances, C64};

/// Local unitaries of one party: the party contributes `L ⊗ …` on the left
/// and `R† ⊗ …` on the right.
#[derive(Clone, Debug, PartialEq)]
pub struct PartyLocals {
    pub party: usize,
    pub left: CMatrix,
    pub right: CMatrix,
}

impl PartyLocals {
    pub fn identity(party: usize, d: usize) -> Self {
        PartyLocals { party, left: CMatrix::identity(d, d), right: CMatrix::identity(d, d) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineBranch {
    Generic,
    VanishingCrossTerm,
    PartyFactored,
}

impl PipelineBranch {
    pub fn name(self) -> &'static str {
        match self {
            PipelineBranch::Generic => "generic",
            PipelineBranch::VanishingCrossTerm => "vanishing_cross_term",
            PipelineBranch::PartyFactored => "party_factored",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [PipelineBranch::Generic, PipelineBranch::VanishingCrossTerm, PipelineBranch::PartyFactored]
            .into_iter()
            .find(|b| b.name() == name)
    }
}

/// How each party was handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartyRoute {
    /// Simultaneous SVD of the party's Schmidt operators.
    Lemma2(AppendixBranch),
    /// Similarity diagonalization of `W₁^α† W₂^α` (vanishing cross term).
    Similarity,
    /// Diagonalization of the target blocks.
    Target,
}

/// Intermediate quantities of a pipeline run.
#[derive(Clone, Debug, Default)]
pub struct PipelineTrace {
    /// `{α}|rest` Schmidt ranks.
    pub schmidt_ranks: Vec<usize>,
    /// Dimension of the span of `{A_i†A_j}` over each party's Schmidt operators.
    pub span_dims: Vec<usize>,
    pub branch: Option<PipelineBranch>,
    pub factored_parties: Vec<usize>,
    pub routes: Vec<Option<PartyRoute>>,
    /// Party whose cross term `M₁†M₂` vanishes, if any.
    pub vanishing_party: Option<usize>,
    /// `c` with `c · M₁^{v†}M₁^v` an orthogonal projector, in the vanishing case.
    pub vanishing_constant: Option<f64>,
    /// `μ_kj` with `W_k = μ_k1 W₁ + μ_k2 W₂` (bipartite construction only).
    pub mu: Option<Vec<[C64; 2]>>,
    /// `(μ_k1 μ̄_k2, 1 − |μ_k1|² − |μ_k2|², μ̄_k1 μ_k2)` per `k`.
    pub quadratic_rows: Option<Vec<[C64; 3]>>,
    /// Sketch draws used by the product expansion.
    pub sketch_attempts: usize,
}

/// Verifiable controlled / diagonal form of a unitary.
#[derive(Clone, Debug)]
pub struct ControlledFormCertificate {
    pub dims: PartyDims,
    /// Control parties in ascending order.
    pub control_parties: Vec<PartyLocals>,
    pub target: PartyLocals,
    /// `W_k` over the control multi-index.
    pub blocks: Vec<CMatrix>,
    pub diagonal_phases: Vec<C64>,
    pub residual: f64,
    pub tolerances: Tolerances,
    pub trace: PipelineTrace,
}

impl ControlledFormCertificate {
    pub fn target_party(&self) -> usize {
        self.target.party
    }

    /// All locals indexed by party.
    pub fn locals(&self) -> Vec<&PartyLocals> {
        let mut all: Vec<&PartyLocals> = self.control_parties.iter().chain([&self.target]).collect();
        all.sort_by_key(|l| l.party);
        all
    }
}

fn locals_slots(p: usize, locals: &[&PartyLocals]) -> (Vec<Option<CMatrix>>, Vec<Option<CMatrix>>) {
    let mut lefts = vec![None; p];
    let mut rights = vec![None; p];
    for l in locals {
        lefts[l.party] = Some(l.left.clone());
        rights[l.party] = Some(l.right.clone());
    }
    (lefts, rights)
}

/// Blocks of `m` controlled by every party except `target`, and the
/// Frobenius norm of the entries that break the block structure.
fn split_blocks(m: &CMatrix, dims: &PartyDims, target: usize) -> (Vec<CMatrix>, f64) {
    let dt = dims.dim(target);
    let count = dims.total() / dt;
    let coords: Vec<(usize, usize)> = (0..dims.total())
        .map(|flat| {
            let digits = dims.split_index(flat);
            let k = (0..dims.len()).filter(|&a| a != target).fold(0, |acc, a| acc * dims.dim(a) + digits[a]);
            (k, digits[target])
        })
        .collect();
    let mut blocks = vec![CMatrix::zeros(dt, dt); count];
    let mut mismatch = 0.0;
    for (i, &(ki, ti)) in coords.iter().enumerate() {
        for (j, &(kj, tj)) in coords.iter().enumerate() {
            if ki == kj {
                blocks[ki][(ti, tj)] = m[(i, j)];
            } else {
                mismatch += m[(i, j)].norm_sqr();
            }
        }
    }
    (blocks, mismatch.sqrt())
}

/// Assemble `Σ_k |k⟩⟨k| ⊗ W_k` (control multi-index over all parties except
/// `target`) and undo the given locals: returns `(⊗L)† C (⊗R)`.
/// Parties without an entry in `basis_locals` get identities.
pub fn build_controlled(
    dims: &PartyDims,
    target: usize,
    basis_locals: &[PartyLocals],
    blocks: &[CMatrix],
    tol: &Tolerances,
) -> Result<MultipartiteOperator> {
    if target >= dims.len() {
        return Err(Error::InvalidDims(format!("target party {target} out of range")));
    }
    let dt = dims.dim(target);
    let count = dims.total() / dt;
    if blocks.len() != count {
        return Err(Error::DimensionMismatch { expected: count, found: blocks.len() });
    }
    for (index, w) in blocks.iter().enumerate() {
        if w.shape() != (dt, dt) {
            return Err(Error::DimensionMismatch { expected: dt, found: w.nrows() });
        }
        let deviation = linalg::unitarity_deviation(w);
        if deviation > tol.residual {
            return Err(Error::NonUnitaryBlock { index, deviation });
        }
    }
    let n = dims.total();
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        let di = dims.split_index(i);
        for j in 0..n {
            let dj = dims.split_index(j);
            if (0..dims.len()).all(|a| a == target || di[a] == dj[a]) {
                let k = (0..dims.len()).filter(|&a| a != target).fold(0, |acc, a| acc * dims.dim(a) + di[a]);
                c[(i, j)] = blocks[k][(di[target], dj[target])];
            }
        }
    }
    let controlled = MultipartiteOperator::new(dims.clone(), c)?;
    // (⊗L)† C (⊗R) = apply_locals with lefts L†, rights R†
    let inverted: Vec<PartyLocals> = basis_locals
        .iter()
        .map(|l| PartyLocals { party: l.party, left: l.left.adjoint(), right: l.right.adjoint() })
        .collect();
    let refs: Vec<&PartyLocals> = inverted.iter().collect();
    let (lefts, rights) = locals_slots(dims.len(), &refs);
    apply_locals(&controlled, &lefts, &rights, tol)
}

/// Recompute blocks, phases and the residual for the given locals.
fn certify(
    u: &MultipartiteOperator,
    controls: Vec<PartyLocals>,
    target: PartyLocals,
    trace: PipelineTrace,
    tol: &Tolerances,
) -> Result<ControlledFormCertificate> {
    let dims = u.dims();
    let p = dims.len();
    let control_refs: Vec<&PartyLocals> = controls.iter().collect();
    let (lefts, rights) = locals_slots(p, &control_refs);
    let partial = apply_locals(u, &lefts, &rights, tol)?;
    let (blocks, mismatch) = split_blocks(partial.matrix(), dims, target.party);

    let mut all = control_refs.clone();
    all.push(&target);
    let (lefts, rights) = locals_slots(p, &all);
    let full = apply_locals(u, &lefts, &rights, tol)?;
    let diagonal_phases = linalg::diagonal(full.matrix());

    let mut residual = linalg::offdiag_norm(full.matrix()).max(mismatch);
    for z in &diagonal_phases {
        residual = residual.max((z.norm() - 1.0).abs());
    }
    for w in &blocks {
        residual = residual.max(linalg::unitarity_deviation_frob(w));
    }
    for l in &all {
        residual = residual.max(linalg::unitarity_deviation_frob(&l.left)).max(linalg::unitarity_deviation_frob(&l.right));
    }
    Ok(ControlledFormCertificate {
        dims: dims.clone(),
        control_parties: controls,
        target,
        blocks,
        diagonal_phases,
        residual,
        tolerances: *tol,
        trace,
    })
}

/// Indices of the two blocks with the largest normalized Gram determinant
/// (first pair wins ties).
fn best_pair(blocks: &[CMatrix]) -> (usize, usize, f64) {
    let mut best = (0, 0, -1.0);
    for a in 0..blocks.len() {
        for b in a + 1..blocks.len() {
            let na = blocks[a].norm_squared();
            let nb = blocks[b].norm_squared();
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            let det = 1.0 - linalg::inner(&blocks[a], &blocks[b]).norm_sqr() / (na * nb);
            if det > best.2 {
                best = (a, b, det);
            }
        }
    }
    if blocks.len() == 1 {
        best.2 = 0.0;
    }
    best
}

/// Target locals `(S V₁†, S)` with `S` diagonalizing `V₁†V₂`.
fn target_locals(blocks: &[CMatrix], tol: &Tolerances) -> Result<(CMatrix, CMatrix)> {
    let (a, b, _) = best_pair(blocks);
    let v1_adj = blocks[a].adjoint();
    let x = &v1_adj * &blocks[b];
    let sim = unitary_similarity_diagonalize(&x, tol).map_err(|_| Error::NumericalFailure {
        stage: "target similarity diagonalization",
        residual: linalg::op_norm(&(x.adjoint() * &x - &x * x.adjoint())),
    })?;
    let left = &sim.transform * v1_adj;
    Ok(linalg::align_rows(&left, &sim.transform))
}

/// Fully controlled and diagonal form of a unitary of multipartite operator
/// Schmidt rank 2.
///
/// Parties whose `{α}|rest` Schmidt rank is 1 are controls with equal
/// blocks. If some party `v` has a vanishing cross term in the two-term
/// product expansion, `v` is diagonalized by simultaneous SVD of its
/// Schmidt operators and every other party except the target by similarity
/// diagonalization of its normalized factors. Otherwise the target is the
/// party whose product span exceeds dimension 2 (or the last party) and
/// every other party is diagonalized by simultaneous SVD. The target's
/// blocks span two dimensions and are diagonalized last.
pub fn theorem0_pipeline(u: &MultipartiteOperator, tol: &Tolerances, seed: u64) -> Result<ControlledFormCertificate> {
    tol.validate()?;
    let expansion = product_rank2_decompose(u, tol, seed)?;
    let dims = u.dims();
    let p = dims.len();

    let mut trace = PipelineTrace {
        factored_parties: expansion.factored_parties.clone(),
        routes: vec![None; p],
        sketch_attempts: expansion.attempts,
        ..PipelineTrace::default()
    };
    let mut local_ops = Vec::with_capacity(p);
    for party in 0..p {
        let dec = decompose(u, &Cut::single(party, p)?, tol)?;
        trace.schmidt_ranks.push(dec.rank());
        trace.span_dims.push(gram_span(&dec.left_ops, tol)?.dim);
        local_ops.push(dec.left_ops);
    }
    let factored = |a: usize| expansion.factored_parties.contains(&a);

    let ratios = expansion.cross_term_ratios();
    let vanishing = (0..p)
        .filter(|&a| !factored(a) && ratios[a] <= tol.residual)
        .min_by(|&a, &b| ratios[a].total_cmp(&ratios[b]));

    let mut controls: Vec<PartyLocals> = Vec::with_capacity(p - 1);
    let target;
    if let Some(v) = vanishing {
        trace.branch = Some(PipelineBranch::VanishingCrossTerm);
        trace.vanishing_party = Some(v);
        trace.vanishing_constant = Some(vanishing_constant(&expansion, v));
        target = (0..p).rev().find(|&a| a != v && !factored(a)).unwrap_or(if v == p - 1 { p - 2 } else { p - 1 });
        for party in (0..p).filter(|&a| a != target) {
            if party == v {
                controls.push(lemma2_control(party, &local_ops[party], tol, &mut trace)?);
            } else {
                controls.push(similarity_control(party, &expansion, tol)?);
                trace.routes[party] = Some(PartyRoute::Similarity);
            }
        }
    } else {
        trace.branch = Some(if expansion.factored_parties.is_empty() {
            PipelineBranch::Generic
        } else {
            PipelineBranch::PartyFactored
        });
        let wide: Vec<usize> = (0..p).filter(|&a| !factored(a) && trace.span_dims[a] > 2).collect();
        target = match wide.as_slice() {
            [] => (0..p).rev().find(|&a| !factored(a)).unwrap_or(p - 1),
            [one] => *one,
            _ => return Err(Error::NumericalFailure { stage: "target selection", residual: f64::NAN }),
        };
        for party in (0..p).filter(|&a| a != target) {
            controls.push(lemma2_control(party, &local_ops[party], tol, &mut trace)?);
        }
    }
    trace.routes[target] = Some(PartyRoute::Target);
    finish_target(u, controls, target, trace, tol)
}

/// Diagonalize the target blocks left by `controls` and certify.
fn finish_target(
    u: &MultipartiteOperator,
    controls: Vec<PartyLocals>,
    target: usize,
    trace: PipelineTrace,
    tol: &Tolerances,
) -> Result<ControlledFormCertificate> {
    let control_refs: Vec<&PartyLocals> = controls.iter().collect();
    let (lefts, rights) = locals_slots(u.parties(), &control_refs);
    let partial = apply_locals(u, &lefts, &rights, tol)?;
    let (blocks, _) = split_blocks(partial.matrix(), u.dims(), target);
    let (mut t_left, t_right) = target_locals(&blocks, tol)?;

    // global phase: first diagonal entry 1
    let probe = (&t_left * &blocks[0] * t_right.adjoint())[(0, 0)];
    t_left *= linalg::phase(probe).conj();

    let cert = certify(u, controls, PartyLocals { party: target, left: t_left, right: t_right }, trace, tol)?;
    if cert.residual > tol.residual {
        return Err(Error::NumericalFailure { stage: "controlled form certificate", residual: cert.residual });
    }
    Ok(cert)
}

/// Certificate for a controlled form whose control locals are already known:
/// every party but one is in `controls`, and `(⊗L) U (⊗R)†` must be block
/// diagonal over them with blocks spanning two dimensions.
pub fn certify_controls(u: &MultipartiteOperator, controls: Vec<PartyLocals>, tol: &Tolerances) -> Result<ControlledFormCertificate> {
    tol.validate()?;
    let p = u.parties();
    let mut seen = vec![false; p];
    for l in &controls {
        let bad = l.party >= p || seen[l.party] || {
            let d = u.dims().dim(l.party);
            l.left.shape() != (d, d) || l.right.shape() != (d, d)
        };
        if bad {
            return Err(Error::InvalidDims(format!("bad control locals for party {}", l.party)));
        }
        seen[l.party] = true;
    }
    let free: Vec<usize> = (0..p).filter(|&a| !seen[a]).collect();
    let [target] = free.as_slice() else {
        return Err(Error::InvalidDims(format!("expected exactly one non-control party, found {}", free.len())));
    };
    let mut trace = PipelineTrace { routes: vec![None; p], ..PipelineTrace::default() };
    trace.routes[*target] = Some(PartyRoute::Target);
    let mut controls = controls;
    controls.sort_by_key(|l| l.party);
    finish_target(u, controls, *target, trace, tol)
}

fn lemma2_control(party: usize, ops: &[CMatrix], tol: &Tolerances, trace: &mut PipelineTrace) -> Result<PartyLocals> {
    let diag = lemma2_diagonalize(ops, tol)?;
    trace.routes[party] = Some(PartyRoute::Lemma2(diag.branch));
    let (left, right) = linalg::align_rows(&diag.left, &diag.right);
    Ok(PartyLocals { party, left, right })
}

fn similarity_control(party: usize, expansion: &ProductExpansion2, tol: &Tolerances) -> Result<PartyLocals> {
    let w1 = linalg::polar_unitary(&expansion.terms[0][party]);
    let w2 = linalg::polar_unitary(&expansion.terms[1][party]);
    let sim = unitary_similarity_diagonalize(&(w1.adjoint() * &w2), tol)?;
    let left = &sim.transform * w1.adjoint();
    let (left, right) = linalg::align_rows(&left, &sim.transform);
    Ok(PartyLocals { party, left, right })
}

/// `∏_{α≠v} ‖M₁^α‖²_F / d_α`.
fn vanishing_constant(expansion: &ProductExpansion2, v: usize) -> f64 {
    (0..expansion.dims.len())
        .filter(|&a| a != v)
        .map(|a| expansion.terms[0][a].norm_squared() / expansion.dims.dim(a) as f64)
        .product()
}

/// Which case of the bipartite construction fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadraticBranch {
    /// Some quadratic row is nonzero: `W₁†W₂` has two eigenvalues and the
    /// target party controls with its eigenprojectors.
    EigenSplit,
    /// Every row vanishes: each block is a phase times `W₁` or `W₂` and the
    /// control party controls with two terms after a diagonal correction.
    DiagonalSelect,
}

impl QuadraticBranch {
    pub fn name(self) -> &'static str {
        match self {
            QuadraticBranch::EigenSplit => "eigen_split",
            QuadraticBranch::DiagonalSelect => "diagonal_select",
        }
    }
}

/// `(⊗L) U (⊗R)† = P₁ ⊗ W₁ + P₂ ⊗ W₂` with `P_j` on `control_party` and
/// `W_j` on the other party (tensor factors in party order).
#[derive(Clone, Debug)]
pub struct TwoTermControl {
    pub control_party: usize,
    pub projectors: [CMatrix; 2],
    pub unitaries: [CMatrix; 2],
    /// Locals of both parties, in party order.
    pub locals: [PartyLocals; 2],
    pub residual: f64,
    pub branch: QuadraticBranch,
}

impl TwoTermControl {
    /// `P₁ ⊗ W₁ + P₂ ⊗ W₂` in party order.
    pub fn controlled_form(&self, dims: &PartyDims) -> Result<CMatrix> {
        let cut = Cut::single(self.control_party, 2)?;
        Ok(embed_product(dims, &cut, &self.projectors[0], &self.unitaries[0])?
            + embed_product(dims, &cut, &self.projectors[1], &self.unitaries[1])?)
    }
}

/// Output of [`theorem8_bipartite`].
#[derive(Clone, Debug)]
pub struct BipartiteControl {
    pub two_term: TwoTermControl,
    /// `certificates[c]` has party `c` as its control.
    pub certificates: [ControlledFormCertificate; 2],
}

/// Two-term control of a bipartite rank-2 unitary, plus controlled-form
/// certificates with each party as control.
///
/// From the controlled form `Σ_k |k⟩⟨k| ⊗ W_k` the two most independent
/// blocks `W₁`, `W₂` are chosen and every block is expanded as
/// `μ_k1 W₁ + μ_k2 W₂`. Unitarity of `W_k` makes `X = W₁†W₂` satisfy
/// `μ_k1 μ̄_k2 + (|μ_k1|² + |μ_k2|² − 1) X + μ̄_k1 μ_k2 X² = 0`. If some
/// coefficient row is nonzero `X` has exactly two eigenvalues `λ_j` and the
/// target party controls with the eigenprojectors, the other side carrying
/// `diag(μ_k1 + λ_j μ_k2)`. Otherwise each block is a phase times `W₁` or
/// `W₂`, and removing those phases lets the control party control with two
/// terms.
///
/// Starting from [`theorem0_pipeline`] the base control comes from a
/// simultaneous SVD, whose blocks take at most two directions, so this entry
/// point lands in [`QuadraticBranch::DiagonalSelect`]; use
/// [`theorem8_from_controlled`] to start from another controlled form.
pub fn theorem8_bipartite(u: &MultipartiteOperator, tol: &Tolerances, seed: u64) -> Result<BipartiteControl> {
    if u.parties() != 2 {
        return Err(Error::InvalidDims(format!("bipartite construction needs 2 parties, got {}", u.parties())));
    }
    let base = theorem0_pipeline(u, tol, seed)?;
    theorem8_from_controlled(u, base, tol)
}

/// [`theorem8_bipartite`] from a given single-control certificate `base`,
/// e.g. one built by [`certify_controls`].
pub fn theorem8_from_controlled(u: &MultipartiteOperator, base: ControlledFormCertificate, tol: &Tolerances) -> Result<BipartiteControl> {
    if u.parties() != 2 || base.control_parties.len() != 1 {
        return Err(Error::InvalidDims("bipartite construction needs 2 parties and one control".into()));
    }
    if base.residual > tol.residual {
        return Err(Error::NumericalFailure { stage: "base controlled form", residual: base.residual });
    }
    let dims = u.dims().clone();
    let c = base.control_parties[0].party;
    let t = base.target.party;
    let ctrl = base.control_parties[0].clone();
    let blocks = &base.blocks;

    let (a, b, _) = best_pair(blocks);
    let (w1, w2) = (&blocks[a], &blocks[b]);
    let g = [[linalg::inner(w1, w1), linalg::inner(w1, w2)], [linalg::inner(w2, w1), linalg::inner(w2, w2)]];
    let mut mu = Vec::with_capacity(blocks.len());
    for w in blocks {
        let coeffs = linalg::solve2(g, [linalg::inner(w1, w), linalg::inner(w2, w)])
            .ok_or(Error::NumericalFailure { stage: "block coefficient solve", residual: f64::NAN })?;
        mu.push(coeffs);
    }
    let rows: Vec<[C64; 3]> = mu
        .iter()
        .map(|m| {
            [
                m[0] * m[1].conj(),
                C64::new(1.0 - m[0].norm_sqr() - m[1].norm_sqr(), 0.0),
                m[0].conj() * m[1],
            ]
        })
        .collect();
    let row_inf = rows.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);

    let n_c = dims.dim(c);
    let n_t = dims.dim(t);
    let (branch, control_party, projectors, unitaries, locals) = if row_inf > tol.residual {
        let x = w1.adjoint() * w2;
        let sim = unitary_similarity_diagonalize(&x, tol)?;
        if sim.clusters.len() != 2 {
            return Err(Error::ClusterCountMismatch { found: sim.clusters.len() });
        }
        let projectors = [sim.cluster_projector(0), sim.cluster_projector(1)];
        let q = [0, 1].map(|j| {
            let lambda = sim.clusters[j].value;
            let lambda = lambda / lambda.norm();
            linalg::from_diagonal(&mu.iter().map(|m| m[0] + lambda * m[1]).collect::<Vec<_>>())
        });
        let t_locals = PartyLocals { party: t, left: w1.adjoint(), right: CMatrix::identity(n_t, n_t) };
        (QuadraticBranch::EigenSplit, t, projectors, q, [ctrl.clone(), t_locals])
    } else {
        let mut phases = Vec::with_capacity(n_c);
        let mut p1 = vec![C64::new(0.0, 0.0); n_c];
        for (k, m) in mu.iter().enumerate() {
            let j = if m[0].norm_sqr() > 0.5 { 0 } else { 1 };
            phases.push(linalg::phase(m[j]).conj());
            if j == 0 {
                p1[k] = C64::new(1.0, 0.0);
            }
        }
        let p1 = linalg::from_diagonal(&p1);
        let p2 = CMatrix::identity(n_c, n_c) - &p1;
        let c_locals = PartyLocals { party: c, left: linalg::from_diagonal(&phases) * &ctrl.left, right: ctrl.right.clone() };
        (QuadraticBranch::DiagonalSelect, c, [p1, p2], [w1.clone(), w2.clone()], [c_locals, PartyLocals::identity(t, n_t)])
    };
    let mut locals = locals;
    locals.sort_by_key(|l| l.party);

    let mut two_term = TwoTermControl { control_party, projectors, unitaries, locals, residual: 0.0, branch };
    let refs: Vec<&PartyLocals> = two_term.locals.iter().collect();
    let (lefts, rights) = locals_slots(2, &refs);
    let transformed = apply_locals(u, &lefts, &rights, tol)?;
    let form = two_term.controlled_form(&dims)?;
    let mut residual = (transformed.matrix() - form).norm();
    let [p1, p2] = &two_term.projectors;
    residual = residual
        .max((p1 * p2).norm())
        .max((p1 + p2 - CMatrix::identity(p1.nrows(), p1.nrows())).norm());
    for w in &two_term.unitaries {
        residual = residual.max(linalg::unitarity_deviation_frob(w));
    }
    two_term.residual = residual;
    if residual > tol.residual {
        return Err(Error::NumericalFailure { stage: "two-term control", residual });
    }

    let mut trace = base.trace.clone();
    trace.mu = Some(mu);
    trace.quadratic_rows = Some(rows);
    let mut base = base;
    base.trace = trace.clone();
    // the diagonal form is symmetric in the two parties: swap roles
    let swapped = certify(
        u,
        vec![PartyLocals { party: t, left: base.target.left.clone(), right: base.target.right.clone() }],
        ctrl,
        trace,
        tol,
    )?;
    if swapped.residual > tol.residual {
        return Err(Error::NumericalFailure { stage: "swapped controlled form certificate", residual: swapped.residual });
    }
    let certificates = if c == 0 { [base, swapped] } else { [swapped, base] };
    Ok(BipartiteControl { two_term, certificates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cnot, gen_rank2, gen_vanishing, pauli_x, projector, swap, xyz_gate};
    use crate::model::kron;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn build_controlled_cnot() {
        let dims = PartyDims::new([2, 2]).unwrap();
        let u = build_controlled(&dims, 1, &[], &[CMatrix::identity(2, 2), pauli_x()], &tol()).unwrap();
        assert!((u.matrix() - cnot().matrix()).norm() < 1e-15);
    }

    #[test]
    fn build_controlled_rejects_non_unitary_block() {
        let dims = PartyDims::new([2, 2]).unwrap();
        let err = build_controlled(&dims, 1, &[], &[CMatrix::identity(2, 2), projector(2, 0)], &tol()).unwrap_err();
        assert!(matches!(err, Error::NonUnitaryBlock { index: 1, .. }));
    }

    #[test]
    fn cnot_certificate() {
        let cert = theorem0_pipeline(&cnot(), &tol(), 0).unwrap();
        assert!(cert.residual <= 1e-10);
        assert_eq!(cert.control_parties.len(), 1);
        assert!((cert.diagonal_phases[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        // controlled phase: product of the four phases is -1 times a square
        let d = &cert.diagonal_phases;
        let invariant = d[0] * d[3] / (d[1] * d[2]);
        assert!((invariant + C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn negative_fixtures() {
        assert!(matches!(theorem0_pipeline(&swap(), &tol(), 0), Err(Error::NotRank2(_))));
        assert!(matches!(theorem0_pipeline(&xyz_gate(), &tol(), 0), Err(Error::NotRank2(_))));
    }

    #[test]
    fn three_party_instances() {
        let dims = PartyDims::new([2, 3, 2]).unwrap();
        for seed in 0..4 {
            let cert = theorem0_pipeline(&gen_rank2(&dims, seed).unwrap(), &tol(), seed).unwrap();
            assert!(cert.residual <= 1e-8);
            assert_eq!(cert.control_parties.len(), 2);
            let cert = theorem0_pipeline(&gen_vanishing(&dims, seed).unwrap(), &tol(), seed).unwrap();
            assert!(cert.residual <= 1e-8);
        }
    }

    #[test]
    fn build_inverts_certificate() {
        let dims = PartyDims::new([3, 2]).unwrap();
        let u = gen_rank2(&dims, 11).unwrap();
        let cert = theorem0_pipeline(&u, &tol(), 1).unwrap();
        let locals: Vec<PartyLocals> = cert.control_parties.clone();
        let rebuilt = build_controlled(&dims, cert.target_party(), &locals, &cert.blocks, &tol()).unwrap();
        assert!((rebuilt.matrix() - u.matrix()).norm() < 1e-9);
    }

    #[test]
    fn cnot_two_term_control() {
        let out = theorem8_bipartite(&cnot(), &tol(), 0).unwrap();
        assert!(out.two_term.residual < 1e-10);
        for cert in &out.certificates {
            assert!(cert.residual < 1e-10);
        }
        assert_eq!(out.certificates[0].control_parties[0].party, 0);
        assert_eq!(out.certificates[1].control_parties[0].party, 1);
    }

    #[test]
    fn three_distinct_blocks_split_by_eigenvalues() {
        let dims = PartyDims::new([3, 2]).unwrap();
        let inst = crate::generate::gen_entangling_phase(&dims, 5).unwrap();
        let u = inst.operator;
        // party 0 controls in the unscrambled basis
        let control = PartyLocals { party: 0, left: inst.lefts[0].adjoint(), right: inst.rights[0].clone() };
        let base = certify_controls(&u, vec![control], &tol()).unwrap();
        assert_eq!(base.target_party(), 1);
        assert_eq!(theorem8_bipartite(&u, &tol(), 0).unwrap().two_term.branch, QuadraticBranch::DiagonalSelect);
        let out = theorem8_from_controlled(&u, base, &tol()).unwrap();
        for cert in &out.certificates {
            assert!(crate::verify::verify_certificate(&u, cert, &tol()).unwrap().passed);
        }
        assert_eq!(out.two_term.branch, QuadraticBranch::EigenSplit);
        assert!(out.two_term.residual < 1e-9);
        let rank = |p: &CMatrix| linalg::numerical_rank(&linalg::singular_values(p), 1e-9);
        assert!(rank(&out.two_term.projectors[0]) >= 1 && rank(&out.two_term.projectors[1]) >= 1);
    }

    #[test]
    fn product_is_not_rank2() {
        let dims = PartyDims::new([2, 2]).unwrap();
        let m = kron(&[projector(2, 0), pauli_x()]).unwrap() + kron(&[projector(2, 1), pauli_x()]).unwrap();
        let u = MultipartiteOperator::new(dims, m).unwrap();
        assert!(matches!(theorem8_bipartite(&u, &tol(), 0), Err(Error::NotRank2(_))));
    }
}
