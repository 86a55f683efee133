//! Operator Schmidt decomposition across a cut, and the two-term product
//! expansion of a multipartite unitary of operator Schmidt rank 2.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::generate::gaussian_matrix;
use crate::linalg::{self, Svd};
use crate::model::{embed_product, kron, reshuffle, Cut};
use crate::{CMatrix, Error, MultipartiteOperator, PartyDims, Result, Tolerances, C64};

/// Sketch draws tried before [`product_rank2_decompose`] gives up.
pub const SKETCH_RETRIES: usize = 8;

/// Relative size of the second singular value below which a pencil
/// element is accepted as rank 1.
const RAY_RANK_ONE: f64 = 1e-6;

/// Relative misfit of the recovered coefficient tensor above which a sketch
/// is discarded.
const TENSOR_FIT: f64 = 1e-10;

/// `U = Σ_j coeffs[j] · left_ops[j] ⊗ right_ops[j]` across `cut`.
///
/// Left operators act on the parties of `cut.left()` (in increasing order),
/// right operators on the complement. Both families are Hilbert–Schmidt
/// orthonormal and the coefficients are descending.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    pub dims: PartyDims,
    pub cut: Cut,
    pub coeffs: Vec<f64>,
    pub left_ops: Vec<CMatrix>,
    pub right_ops: Vec<CMatrix>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    /// `Σ_j λ_j A_j ⊗ B_j` in party order.
    pub fn reconstruct(&self) -> Result<CMatrix> {
        let n = self.dims.total();
        let mut acc = CMatrix::zeros(n, n);
        for ((&l, a), b) in self.coeffs.iter().zip(&self.left_ops).zip(&self.right_ops) {
            acc += embed_product(&self.dims, &self.cut, a, b)? * C64::new(l, 0.0);
        }
        Ok(acc)
    }
}

pub fn decompose(u: &MultipartiteOperator, cut: &Cut, tol: &Tolerances) -> Result<SchmidtDecomposition> {
    let r = reshuffle(u, cut)?;
    let dims = u.dims();
    let ds = dims.subsystem_dim(cut.left());
    let dr = dims.subsystem_dim(cut.right());
    let Svd { u: left, sigma, v_adj } = linalg::svd(&r);
    let rank = linalg::numerical_rank(&sigma, tol.rank_cut);
    let left_ops = (0..rank).map(|j| linalg::devectorize(left.column(j).iter().copied(), ds, ds)).collect();
    let right_ops = (0..rank).map(|j| linalg::devectorize(v_adj.row(j).iter().copied(), dr, dr)).collect();
    Ok(SchmidtDecomposition {
        dims: dims.clone(),
        cut: cut.clone(),
        coeffs: sigma[..rank].to_vec(),
        left_ops,
        right_ops,
    })
}

/// Number of operator Schmidt coefficients above `rank_cut · λ₁`.
pub fn schmidt_rank(u: &MultipartiteOperator, cut: &Cut, tol: &Tolerances) -> Result<usize> {
    let s = linalg::singular_values(&reshuffle(u, cut)?);
    Ok(linalg::numerical_rank(&s, tol.rank_cut))
}

/// The two left Schmidt operators across `{party} | rest`.
pub fn local_pair(u: &MultipartiteOperator, party: usize, tol: &Tolerances) -> Result<[CMatrix; 2]> {
    let cut = Cut::single(party, u.parties())?;
    let dec = decompose(u, &cut, tol)?;
    match <[CMatrix; 2]>::try_from(dec.left_ops) {
        Ok(pair) => Ok(pair),
        Err(ops) => Err(Error::RankMismatch { expected: 2, found: ops.len() }),
    }
}

/// `U = ⊗_α terms[0][α] + ⊗_α terms[1][α]`.
///
/// Every factor except the one on party 0 has Frobenius norm `√d_α`, so a
/// factor proportional to a unitary is exactly unitary up to phase.
#[derive(Clone, Debug)]
pub struct ProductExpansion2 {
    pub dims: PartyDims,
    pub terms: [Vec<CMatrix>; 2],
    /// Frobenius norm of `U − term₀ − term₁`.
    pub residual: f64,
    /// Parties whose `{α}|rest` Schmidt rank is 1; both terms share their factor.
    pub factored_parties: Vec<usize>,
    /// Sketch draws used (0 when no pencil search was needed).
    pub attempts: usize,
}

impl ProductExpansion2 {
    pub fn term(&self, j: usize) -> CMatrix {
        kron(&self.terms[j]).expect("factors are square")
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.term(0) + self.term(1)
    }

    /// `‖M₁^α† M₂^α‖_F / (‖M₁^α‖_F ‖M₂^α‖_F)` for every party.
    pub fn cross_term_ratios(&self) -> Vec<f64> {
        self.terms[0]
            .iter()
            .zip(&self.terms[1])
            .map(|(a, b)| (a.adjoint() * b).norm() / (a.norm() * b.norm()))
            .collect()
    }
}

/// Two-term product expansion of a unitary of multipartite operator
/// Schmidt rank 2.
///
/// Parties whose single-party cut has rank 1 factor out. On the remaining
/// parties `U` lives in the tensor product of the 2-dimensional local
/// Schmidt spans, so it is described by a `2×…×2` coefficient tensor. The
/// tensor is peeled from the left: the row space of its first unfolding is
/// a 2-dimensional pencil `c₁β₁ + c₂β₂`; compressing it with seeded random
/// sketches on both sides turns `det(c₁β̂₁ + c₂β̂₂) = 0` into a quadratic
/// whose roots are the candidate rank-1 elements, each verified on the
/// uncompressed pencil. Up to [`SKETCH_RETRIES`] sketches are drawn.
pub fn product_rank2_decompose(u: &MultipartiteOperator, tol: &Tolerances, seed: u64) -> Result<ProductExpansion2> {
    let deviation = linalg::unitarity_deviation(u.matrix());
    if deviation > tol.residual {
        return Err(Error::NonUnitary { deviation });
    }
    let dims = u.dims();
    let p = dims.len();
    if p < 2 {
        return Err(Error::NotRank2("single-party operator".to_string()));
    }

    let mut bases: Vec<Vec<CMatrix>> = Vec::with_capacity(p);
    for party in 0..p {
        let dec = decompose(u, &Cut::single(party, p)?, tol)?;
        match dec.rank() {
            1 | 2 => bases.push(dec.left_ops),
            r => return Err(Error::NotRank2(format!("party {party} has Schmidt rank {r} against the rest"))),
        }
    }
    let factored: Vec<usize> = (0..p).filter(|&a| bases[a].len() == 1).collect();
    let active: Vec<usize> = (0..p).filter(|&a| bases[a].len() == 2).collect();
    if active.len() < 2 {
        return Err(Error::NotRank2("operator Schmidt rank 1 (product operator)".to_string()));
    }

    // coefficient tensor over the active parties, row-major
    let m = active.len();
    let mut tensor = vec![C64::new(0.0, 0.0); 1 << m];
    for (flat, slot) in tensor.iter_mut().enumerate() {
        let mut factors = Vec::with_capacity(p);
        let mut bit = m;
        for party in 0..p {
            if bases[party].len() == 2 {
                bit -= 1;
                factors.push(bases[party][(flat >> bit) & 1].clone());
            } else {
                factors.push(bases[party][0].clone());
            }
        }
        *slot = linalg::inner(&kron(&factors)?, u.matrix());
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (modes, attempts) = cp_rank2(&tensor, m, &mut rng)?;

    let mut terms: [Vec<CMatrix>; 2] = [Vec::with_capacity(p), Vec::with_capacity(p)];
    for (k, term) in terms.iter_mut().enumerate() {
        let mut mode = 0;
        for party in 0..p {
            if bases[party].len() == 2 {
                let f = &modes[k][mode];
                term.push(&bases[party][0] * f[0] + &bases[party][1] * f[1]);
                mode += 1;
            } else {
                term.push(bases[party][0].clone());
            }
        }
        // unit-unitary normalization away from party 0
        for party in 1..p {
            let norm = term[party].norm();
            let target = (dims.dim(party) as f64).sqrt();
            let s = target / norm;
            term[party] *= C64::new(s, 0.0);
            term[0] *= C64::new(1.0 / s, 0.0);
        }
    }

    let mut expansion = ProductExpansion2 { dims: dims.clone(), terms, residual: 0.0, factored_parties: factored, attempts };
    expansion.residual = (u.matrix() - expansion.reconstruct()).norm();
    if expansion.residual > tol.residual {
        return Err(Error::NotRank2(format!(
            "two-term reconstruction residual {:.3e} exceeds tolerance",
            expansion.residual
        )));
    }
    let (t0, t1) = (expansion.term(0), expansion.term(1));
    let overlap = linalg::inner(&t0, &t1).norm() / (t0.norm() * t1.norm());
    if overlap > 1.0 - tol.rank_cut {
        return Err(Error::NotRank2("the two product terms are parallel".to_string()));
    }
    Ok(expansion)
}

/// Rank-2 CP decomposition of a tensor with `m >= 2` modes of size 2.
/// Returns per-term mode factors (length-2 coefficient vectors) and the
/// number of sketches drawn.
fn cp_rank2(tensor: &[C64], m: usize, rng: &mut ChaCha20Rng) -> Result<([Vec<[C64; 2]>; 2], usize)> {
    let n = tensor.len() / 2;
    let unfold = CMatrix::from_row_slice(2, n, tensor);
    let s = linalg::svd(&unfold);
    if s.rank(1e-12) < 2 {
        return Err(Error::NotRank2("first unfolding of the coefficient tensor has rank 1".to_string()));
    }
    if m == 2 {
        let modes = [0usize, 1].map(|k| {
            let sig = C64::new(s.sigma[k], 0.0);
            vec![[s.u[(0, k)] * sig, s.u[(1, k)] * sig], [s.v_adj[(k, 0)], s.v_adj[(k, 1)]]]
        });
        return Ok((modes, 0));
    }

    let half = n / 2;
    let beta: Vec<CMatrix> =
        (0..2).map(|k| CMatrix::from_row_slice(2, half, s.v_adj.row(k).transpose().as_slice())).collect();
    for attempt in 1..=SKETCH_RETRIES {
        let omega_l = gaussian_matrix(2, 2, rng);
        let omega_r = gaussian_matrix(half, 2, rng);
        let x = &omega_l * &beta[0] * &omega_r;
        let y = &omega_l * &beta[1] * &omega_r;
        let Some(roots) = pencil_roots(&x, &y) else { continue };

        let mut rays: Vec<Vec<C64>> = Vec::with_capacity(2);
        for (c1, c2) in roots {
            let z = &beta[0] * c1 + &beta[1] * c2;
            let sv = linalg::singular_values(&z);
            if sv[0] == 0.0 || sv[1] > RAY_RANK_ONE * sv[0] {
                break;
            }
            rays.push(z.transpose().iter().copied().collect());
        }
        if rays.len() != 2 {
            continue;
        }
        // unfold = A · [ρ₁; ρ₂]
        let rho = CMatrix::from_fn(2, n, |k, j| rays[k][j]);
        let gram = &rho * rho.adjoint();
        let Some(gram_inv) = gram.try_inverse() else { continue };
        let a = &unfold * rho.adjoint() * gram_inv;
        let mut modes: [Vec<[C64; 2]>; 2] = [Vec::with_capacity(m), Vec::with_capacity(m)];
        let mut ok = true;
        for k in 0..2 {
            modes[k].push([a[(0, k)], a[(1, k)]]);
            match peel_rank_one(&rays[k], m - 1) {
                Some(rest) => modes[k].extend(rest),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let fit = expand_modes(&modes);
            let err: f64 = fit.iter().zip(tensor).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if err <= TENSOR_FIT * unfold.norm() {
                return Ok((modes, attempt));
            }
        }
    }
    Err(Error::NotRank2(format!("no verified rank-1 pair after {SKETCH_RETRIES} sketches")))
}

/// `Σ_k ⊗_mode f_k` as a flat row-major tensor.
fn expand_modes(modes: &[Vec<[C64; 2]>; 2]) -> Vec<C64> {
    let m = modes[0].len();
    (0..1usize << m)
        .map(|flat| {
            modes
                .iter()
                .map(|term| (0..m).map(|mode| term[mode][(flat >> (m - 1 - mode)) & 1]).product::<C64>())
                .sum()
        })
        .collect()
}

/// Factor a vector of length `2^modes` as a Kronecker product of length-2
/// vectors, or `None` if it is not rank 1 across every split.
fn peel_rank_one(v: &[C64], modes: usize) -> Option<Vec<[C64; 2]>> {
    let mut out = Vec::with_capacity(modes);
    let mut rest: Vec<C64> = v.to_vec();
    for _ in 1..modes {
        let mat = CMatrix::from_row_slice(2, rest.len() / 2, &rest);
        let s = linalg::svd(&mat);
        if s.sigma[0] == 0.0 || s.sigma[1] > RAY_RANK_ONE * s.sigma[0] {
            return None;
        }
        out.push([s.u[(0, 0)], s.u[(1, 0)]]);
        let sig = C64::new(s.sigma[0], 0.0);
        rest = s.v_adj.row(0).iter().map(|z| z * sig).collect();
    }
    out.push([rest[0], rest[1]]);
    Some(out)
}

/// The two projective roots `(c₁, c₂)` of `det(c₁X + c₂Y) = 0` for 2x2
/// `X`, `Y`; `None` for an identically vanishing or double root.
fn pencil_roots(x: &CMatrix, y: &CMatrix) -> Option<[(C64, C64); 2]> {
    let a = x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)];
    let b = x[(0, 0)] * y[(1, 1)] + x[(1, 1)] * y[(0, 0)] - x[(0, 1)] * y[(1, 0)] - x[(1, 0)] * y[(0, 1)];
    let c = y[(0, 0)] * y[(1, 1)] - y[(0, 1)] * y[(1, 0)];
    let scale = a.norm().max(b.norm()).max(c.norm());
    if scale == 0.0 {
        return None;
    }
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let tiny = 1e-14 * scale;
    let roots = if a.norm() >= c.norm() && a.norm() > tiny {
        let (t1, t2) = quadratic_roots(a, b, c)?;
        [(t1, one), (t2, one)]
    } else if c.norm() > tiny {
        let (s1, s2) = quadratic_roots(c, b, a)?;
        [(one, s1), (one, s2)]
    } else {
        [(one, zero), (zero, one)]
    };
    let normalize = |(p, q): (C64, C64)| {
        let r = (p.norm_sqr() + q.norm_sqr()).sqrt();
        (p / r, q / r)
    };
    let [r1, r2] = roots.map(normalize);
    if (r1.0 * r2.1 - r1.1 * r2.0).norm() < 1e-8 {
        return None;
    }
    Some([r1, r2])
}

/// Roots of `a t² + b t + c` for `a ≠ 0`, cancellation-free.
fn quadratic_roots(a: C64, b: C64, c: C64) -> Option<(C64, C64)> {
    let mut disc = (b * b - a * c * 4.0).sqrt();
    if (b.conj() * disc).re < 0.0 {
        disc = -disc;
    }
    let q = -(b + disc) * 0.5;
    if q.norm() == 0.0 {
        return None;
    }
    Some((q / a, c / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cnot, gen_rank2, gen_vanishing, haar_unitary, pauli_x, projector, swap, xyz_gate};
    use crate::model::hs_inner;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn cut0(p: usize) -> Cut {
        Cut::single(0, p).unwrap()
    }

    #[test]
    fn cnot_decomposition() {
        let dec = decompose(&cnot(), &cut0(2), &tol()).unwrap();
        assert_eq!(dec.rank(), 2);
        for &l in &dec.coeffs {
            assert!((l - 2f64.sqrt()).abs() < 1e-12);
        }
        assert!((dec.reconstruct().unwrap() - cnot().matrix()).norm() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((hs_inner(&dec.left_ops[i], &dec.left_ops[j]).unwrap().re - want).abs() < 1e-12);
                assert!((hs_inner(&dec.right_ops[i], &dec.right_ops[j]).unwrap().re - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_has_rank_one() {
        let dims = PartyDims::new([2, 3]).unwrap();
        let u = MultipartiteOperator::new(dims, CMatrix::identity(6, 6)).unwrap();
        let dec = decompose(&u, &cut0(2), &tol()).unwrap();
        assert_eq!(dec.rank(), 1);
        assert!((dec.coeffs[0] - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fixture_ranks() {
        assert_eq!(schmidt_rank(&swap(), &cut0(2), &tol()).unwrap(), 4);
        let xyz = xyz_gate();
        for party in 0..3 {
            assert_eq!(schmidt_rank(&xyz, &Cut::single(party, 3).unwrap(), &tol()).unwrap(), 3);
        }
        let dims = PartyDims::new([2, 3, 2]).unwrap();
        assert_eq!(schmidt_rank(&gen_rank2(&dims, 5).unwrap(), &Cut::new(&[0, 2], 3).unwrap(), &tol()).unwrap(), 2);
    }

    #[test]
    fn local_pair_spans_projectors_for_cnot() {
        let [a1, a2] = local_pair(&cnot(), 0, &tol()).unwrap();
        // span{a1, a2} = span{P0, P1}: both projectors are reproduced by projection
        for p in [projector(2, 0), projector(2, 1)] {
            let proj = &a1 * hs_inner(&a1, &p).unwrap() + &a2 * hs_inner(&a2, &p).unwrap();
            assert!((proj - p).norm() < 1e-12);
        }
    }

    #[test]
    fn local_pair_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let dims = PartyDims::new([2, 2]).unwrap();
        let prod = MultipartiteOperator::new(dims, haar_unitary(2, &mut rng).kronecker(&haar_unitary(2, &mut rng))).unwrap();
        assert_eq!(local_pair(&prod, 0, &tol()).unwrap_err(), Error::RankMismatch { expected: 2, found: 1 });
        assert_eq!(local_pair(&xyz_gate(), 0, &tol()).unwrap_err(), Error::RankMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn product_expansion_of_cnot() {
        let exp = product_rank2_decompose(&cnot(), &tol(), 0).unwrap();
        assert!(exp.residual < 1e-12);
        // terms span {P0 ⊗ I, P1 ⊗ X}
        let basis = [projector(2, 0).kronecker(&CMatrix::identity(2, 2)), projector(2, 1).kronecker(&pauli_x())];
        for j in 0..2 {
            let t = exp.term(j);
            let proj: CMatrix = basis.iter().map(|b| b * (hs_inner(b, &t).unwrap() / 2.0)).fold(CMatrix::zeros(4, 4), |a, b| a + b);
            assert!((proj - t).norm() < 1e-12);
        }
    }

    #[test]
    fn product_expansion_recovers_three_party_construction() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let dims = PartyDims::new([2, 3, 2]).unwrap();
        let t1 = kron(&[projector(2, 0), haar_unitary(3, &mut rng), haar_unitary(2, &mut rng)]).unwrap();
        let t2 = kron(&[projector(2, 1), haar_unitary(3, &mut rng), haar_unitary(2, &mut rng)]).unwrap();
        let u = MultipartiteOperator::new(dims, &t1 + &t2).unwrap();
        let exp = product_rank2_decompose(&u, &tol(), 4).unwrap();
        assert!(exp.residual < 1e-9);
        // unique up to order and scaling for three nontrivial parties
        let (a, b) = (exp.term(0), exp.term(1));
        let close = |x: &CMatrix, y: &CMatrix| (x - y).norm() < 1e-9;
        assert!((close(&a, &t1) && close(&b, &t2)) || (close(&a, &t2) && close(&b, &t1)));
        assert!(exp.cross_term_ratios()[0] < 1e-10);
    }

    #[test]
    fn product_expansion_on_generated_instances() {
        for (k, dims) in [[2usize, 2, 2, 2].as_slice(), &[3, 2, 3], &[4, 5], &[2, 3, 2]].iter().enumerate() {
            let dims = PartyDims::new(dims.to_vec()).unwrap();
            for seed in 0..5 {
                let u = gen_rank2(&dims, seed + 10 * k as u64).unwrap();
                let exp = product_rank2_decompose(&u, &tol(), seed).unwrap();
                assert!(exp.residual < 1e-9, "{dims:?} {seed}: {}", exp.residual);
                let v = gen_vanishing(&dims, seed).unwrap();
                let exp = product_rank2_decompose(&v, &tol(), seed).unwrap();
                assert!(exp.residual < 1e-9);
            }
        }
    }

    #[test]
    fn product_expansion_rejects_counterexamples() {
        assert!(matches!(product_rank2_decompose(&swap(), &tol(), 0), Err(Error::NotRank2(_))));
        assert!(matches!(product_rank2_decompose(&xyz_gate(), &tol(), 0), Err(Error::NotRank2(_))));
        let dims = PartyDims::new([2, 2]).unwrap();
        let id = MultipartiteOperator::new(dims, CMatrix::identity(4, 4)).unwrap();
        assert!(matches!(product_rank2_decompose(&id, &tol(), 0), Err(Error::NotRank2(_))));
    }

    #[test]
    fn quadratic_roots_are_roots() {
        let (a, b, c) = (C64::new(1.0, 2.0), C64::new(-3.0, 0.5), C64::new(0.25, -1.0));
        let (r1, r2) = quadratic_roots(a, b, c).unwrap();
        for r in [r1, r2] {
            assert!((a * r * r + b * r + c).norm() < 1e-13);
        }
    }
}
