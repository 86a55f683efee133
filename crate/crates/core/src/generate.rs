//! Seeded instance families and named fixtures.
//!
//! All generators draw from `ChaCha20Rng::seed_from_u64(seed)`, so identical
//! arguments give bit-identical matrices on every platform.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{kron, Cut};
use crate::schmidt::schmidt_rank;
use crate::{linalg, CMatrix, Error, MultipartiteOperator, PartyDims, Result, Tolerances, C64};

/// Redraw budget for degenerate draws.
const MAX_REDRAWS: usize = 64;

/// Instance families understood by [`generate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// [`gen_rank2`].
    Rank2Generic,
    /// [`gen_vanishing`].
    Rank2Vanishing,
    /// Three-qubit `(I⊗I⊗I + iX⊗X⊗X + iZ⊗Z⊗Z)/√3`.
    CounterexampleXyz,
    /// Two-qubit SWAP.
    Swap,
    /// Two-qubit CNOT, party 0 controlling.
    Cnot,
    /// A product of independent Haar local unitaries (operator Schmidt rank 1).
    HaarLocalScramble,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Rank2Generic,
        Family::Rank2Vanishing,
        Family::CounterexampleXyz,
        Family::Swap,
        Family::Cnot,
        Family::HaarLocalScramble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rank2Generic => "rank2",
            Family::Rank2Vanishing => "vanishing",
            Family::CounterexampleXyz => "xyz",
            Family::Swap => "swap",
            Family::Cnot => "cnot",
            Family::HaarLocalScramble => "scramble",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        match name {
            "rank2" | "rank2_generic" => Some(Family::Rank2Generic),
            "vanishing" | "rank2_vanishing" => Some(Family::Rank2Vanishing),
            "xyz" | "counterexample_xyz" => Some(Family::CounterexampleXyz),
            "swap" => Some(Family::Swap),
            "cnot" => Some(Family::Cnot),
            "scramble" | "haar_local_scramble" => Some(Family::HaarLocalScramble),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub dims: PartyDims,
    pub seed: u64,
    pub family: Family,
}

/// A generated operator and the number of degenerate draws that were rejected.
#[derive(Clone, Debug)]
pub struct Generated {
    pub operator: MultipartiteOperator,
    pub redraws: usize,
}

/// Dispatch on `spec.family`. Fixture families ignore `dims` and `seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    let fixed = |operator| Ok(Generated { operator, redraws: 0 });
    match spec.family {
        Family::Rank2Generic => {
            let inst = gen_rank2_detailed(&spec.dims, spec.seed)?;
            Ok(Generated { operator: inst.operator, redraws: inst.redraws })
        }
        Family::Rank2Vanishing => {
            let inst = gen_vanishing_detailed(&spec.dims, spec.seed)?;
            Ok(Generated { operator: inst.operator, redraws: inst.redraws })
        }
        Family::CounterexampleXyz => fixed(xyz_gate()),
        Family::Swap => fixed(swap()),
        Family::Cnot => fixed(cnot()),
        Family::HaarLocalScramble => fixed(haar_local_scramble(&spec.dims, spec.seed)),
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `|k⟩⟨k|` on a `d`-dimensional space.
pub fn projector(d: usize, k: usize) -> CMatrix {
    let mut p = CMatrix::zeros(d, d);
    p[(k, k)] = c(1.0, 0.0);
    p
}

fn two_qubits() -> PartyDims {
    PartyDims::new([2, 2]).expect("valid dims")
}

pub fn cnot() -> MultipartiteOperator {
    let i2 = CMatrix::identity(2, 2);
    let m = projector(2, 0).kronecker(&i2) + projector(2, 1).kronecker(&pauli_x());
    MultipartiteOperator::new(two_qubits(), m).expect("4x4")
}

/// `(I⊗I + X⊗X + Y⊗Y + Z⊗Z) / 2`.
pub fn swap() -> MultipartiteOperator {
    let i2 = CMatrix::identity(2, 2);
    let m = (i2.kronecker(&i2) + pauli_x().kronecker(&pauli_x()) + pauli_y().kronecker(&pauli_y())
        + pauli_z().kronecker(&pauli_z()))
    .scale(0.5);
    MultipartiteOperator::new(two_qubits(), m).expect("4x4")
}

/// `(I⊗I⊗I + i X⊗X⊗X + i Z⊗Z⊗Z) / √3`; unitary because `XZ + ZX = 0`.
pub fn xyz_gate() -> MultipartiteOperator {
    let i = c(0.0, 1.0);
    let id = CMatrix::identity(8, 8);
    let xxx = kron(&[pauli_x(), pauli_x(), pauli_x()]).expect("square");
    let zzz = kron(&[pauli_z(), pauli_z(), pauli_z()]).expect("square");
    let m = (id + xxx * i + zzz * i).unscale(3f64.sqrt());
    MultipartiteOperator::new(PartyDims::new([2, 2, 2]).expect("valid dims"), m).expect("8x8")
}

/// The two named operators that are not controlled.
#[derive(Clone, Debug)]
pub struct Counterexamples {
    pub xyz: MultipartiteOperator,
    pub swap: MultipartiteOperator,
}

pub fn gen_counterexamples() -> Counterexamples {
    Counterexamples { xyz: xyz_gate(), swap: swap() }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

/// Haar-random `n×n` unitary: QR of a complex Gaussian matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let ph = linalg::phase(r[(j, j)]);
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Complex Gaussian matrix (entries with unit variance per component).
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| C64::from_polar(1.0, rng.random::<f64>() * TAU)).collect()
}

/// Uniformly random subset of `0..n` that is neither empty nor everything.
pub fn random_split<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    assert!(n >= 2, "split needs at least two basis states");
    loop {
        let s: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if s.iter().any(|&b| b) && s.iter().any(|&b| !b) {
            return s;
        }
    }
}

/// Independent Haar unitaries, one per party.
pub fn random_locals<R: Rng + ?Sized>(dims: &PartyDims, rng: &mut R) -> Vec<CMatrix> {
    dims.dims().iter().map(|&d| haar_unitary(d, rng)).collect()
}

pub fn haar_local_scramble(dims: &PartyDims, seed: u64) -> MultipartiteOperator {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let locals = random_locals(dims, &mut rng);
    MultipartiteOperator::new(dims.clone(), kron(&locals).expect("square")).expect("consistent dims")
}

/// `(⊗ lefts) U (⊗ rights)`.
pub fn scramble(u: &MultipartiteOperator, lefts: &[CMatrix], rights: &[CMatrix]) -> Result<MultipartiteOperator> {
    let l = kron(lefts)?;
    let r = kron(rights)?;
    MultipartiteOperator::new(u.dims().clone(), l * u.matrix() * r)
}

/// A scrambled instance together with its unscrambled form.
#[derive(Clone, Debug)]
pub struct ScrambledInstance {
    /// The unscrambled operator.
    pub canonical: MultipartiteOperator,
    pub lefts: Vec<CMatrix>,
    pub rights: Vec<CMatrix>,
    /// `(⊗ lefts) canonical (⊗ rights)`.
    pub operator: MultipartiteOperator,
    pub redraws: usize,
}

/// Diagonal `(⊗_{α<P-1} D₁^α) ⊗ Q₁ + (⊗_{α<P-1} D₂^α) ⊗ Q₂` where `Q₁` is
/// the diagonal projector selected by `split` on the last party and
/// `Q₂ = I − Q₁`.
pub fn controlled_diagonal(dims: &PartyDims, first: &[Vec<C64>], second: &[Vec<C64>], split: &[bool]) -> Result<MultipartiteOperator> {
    let p = dims.len();
    if p < 2 {
        return Err(Error::InvalidDims("need at least two parties".to_string()));
    }
    if first.len() != p - 1 || second.len() != p - 1 || split.len() != dims.dim(p - 1) {
        return Err(Error::InvalidDims("phase lists do not match dims".to_string()));
    }
    let mut diag = Vec::with_capacity(dims.total());
    for flat in 0..dims.total() {
        let digits = dims.split_index(flat);
        let phases = if split[digits[p - 1]] { first } else { second };
        let z = (0..p - 1).map(|a| phases[a][digits[a]]).product::<C64>();
        diag.push(z);
    }
    MultipartiteOperator::new(dims.clone(), linalg::from_diagonal(&diag))
}

/// Random multipartite unitary of operator Schmidt rank exactly 2.
///
/// Draws random diagonal unitaries `D_j^α` for every party but the last and
/// a nontrivial diagonal projector split on the last party, forms
/// [`controlled_diagonal`], and scrambles it with independent Haar local
/// unitaries on both sides of every party. Rank-1 draws are redrawn.
pub fn gen_rank2(dims: &PartyDims, seed: u64) -> Result<MultipartiteOperator> {
    gen_rank2_detailed(dims, seed).map(|inst| inst.operator)
}

pub fn gen_rank2_detailed(dims: &PartyDims, seed: u64) -> Result<ScrambledInstance> {
    let p = dims.len();
    if p < 2 {
        return Err(Error::InvalidDims("gen_rank2 needs at least two parties".to_string()));
    }
    if dims.dim(p - 1) < 2 {
        return Err(Error::InvalidDims(format!("target party dimension {} < 2", dims.dim(p - 1))));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let tol = Tolerances::default();
    let target_cut = Cut::single(p - 1, p)?;
    for redraws in 0..MAX_REDRAWS {
        let first: Vec<Vec<C64>> = (0..p - 1).map(|a| random_phases(dims.dim(a), &mut rng)).collect();
        let second: Vec<Vec<C64>> = (0..p - 1).map(|a| random_phases(dims.dim(a), &mut rng)).collect();
        let split = random_split(dims.dim(p - 1), &mut rng);
        let canonical = controlled_diagonal(dims, &first, &second, &split)?;
        if schmidt_rank(&canonical, &target_cut, &tol)? != 2 {
            continue;
        }
        return finish_scramble(canonical, redraws, &mut rng);
    }
    Err(Error::NumericalFailure { stage: "gen_rank2 redraw budget", residual: f64::NAN })
}

fn finish_scramble(canonical: MultipartiteOperator, redraws: usize, rng: &mut ChaCha20Rng) -> Result<ScrambledInstance> {
    let lefts = random_locals(canonical.dims(), rng);
    let rights = random_locals(canonical.dims(), rng);
    let operator = scramble(&canonical, &lefts, &rights)?;
    Ok(ScrambledInstance { canonical, lefts, rights, operator, redraws })
}

/// Rank-2 unitary with a vanishing cross term on party 0:
/// `P₀⊗V₂⊗…⊗V_P + P₁⊗V₂′⊗…⊗V_P′` with Haar `V`, `V′` and a nontrivial
/// diagonal projector split `P₀ + P₁ = I` on party 0, then Haar-scrambled.
pub fn gen_vanishing(dims: &PartyDims, seed: u64) -> Result<MultipartiteOperator> {
    gen_vanishing_detailed(dims, seed).map(|inst| inst.operator)
}

pub fn gen_vanishing_detailed(dims: &PartyDims, seed: u64) -> Result<ScrambledInstance> {
    let p = dims.len();
    if p < 2 {
        return Err(Error::InvalidDims("gen_vanishing needs at least two parties".to_string()));
    }
    if dims.dim(0) < 2 {
        return Err(Error::InvalidDims(format!("party 0 dimension {} < 2", dims.dim(0))));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let tol = Tolerances::default();
    let cut = Cut::single(0, p)?;
    for redraws in 0..MAX_REDRAWS {
        let split = random_split(dims.dim(0), &mut rng);
        let p0 = linalg::from_diagonal(&split.iter().map(|&b| c(b as u8 as f64, 0.0)).collect::<Vec<_>>());
        let p1 = CMatrix::identity(dims.dim(0), dims.dim(0)) - &p0;
        let mut first = vec![p0];
        let mut second = vec![p1];
        for a in 1..p {
            first.push(haar_unitary(dims.dim(a), &mut rng));
            second.push(haar_unitary(dims.dim(a), &mut rng));
        }
        let m = kron(&first)? + kron(&second)?;
        let canonical = MultipartiteOperator::new(dims.clone(), m)?;
        if schmidt_rank(&canonical, &cut, &tol)? != 2 {
            continue;
        }
        return finish_scramble(canonical, redraws, &mut rng);
    }
    Err(Error::NumericalFailure { stage: "gen_vanishing redraw budget", residual: f64::NAN })
}

/// `exp(i H ⊗ Z₂ ⊗ … ⊗ Z_P) = cos H ⊗ I + i sin H ⊗ Z₂ ⊗ … ⊗ Z_P` for a
/// random real diagonal `H` on party 0 with entries in `(0.2, 1.4)` and
/// random Hermitian unitary diagonals `Z_α ≠ ±I`, Haar-scrambled. Rank 2
/// with no vanishing cross term on any party.
pub fn gen_entangling_phase(dims: &PartyDims, seed: u64) -> Result<ScrambledInstance> {
    if dims.len() < 2 || dims.dims().iter().any(|&d| d < 2) {
        return Err(Error::InvalidDims("every party needs dimension >= 2".to_string()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let angles: Vec<f64> = (0..dims.dim(0)).map(|_| 0.2 + rng.random::<f64>() * 1.2).collect();
    let signs: Vec<CMatrix> = dims.dims()[1..]
        .iter()
        .map(|&d| {
            let split = random_split(d, &mut rng);
            linalg::from_diagonal(&split.iter().map(|&b| c(if b { 1.0 } else { -1.0 }, 0.0)).collect::<Vec<_>>())
        })
        .collect();
    let zs = kron(&signs)?;
    let n_rest = zs.nrows();
    let cos_h = linalg::from_diagonal(&angles.iter().map(|t| c(t.cos(), 0.0)).collect::<Vec<_>>());
    let sin_h = linalg::from_diagonal(&angles.iter().map(|t| c(0.0, t.sin())).collect::<Vec<_>>());
    let m = cos_h.kronecker(&CMatrix::identity(n_rest, n_rest)) + sin_h.kronecker(&zs);
    let canonical = MultipartiteOperator::new(dims.clone(), m)?;
    finish_scramble(canonical, 0, &mut rng)
}

/// Shape of the families drawn by [`gen_diagonalizable_family`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyShape {
    /// Generic moduli; the largest member is not proportional to a unitary.
    Generic,
    /// Every member is proportional to a unitary.
    AllUnitary,
    /// The largest member is a scaled projector, the rest are proportional to
    /// unitaries.
    SingularLead,
}

impl FamilyShape {
    pub const ALL: [FamilyShape; 3] = [FamilyShape::Generic, FamilyShape::AllUnitary, FamilyShape::SingularLead];
}

/// `R_i = U₀ (α_i P + β_i Q) V₀` for Haar `U₀`, `V₀` and a nontrivial
/// diagonal projector pair `P + Q = I`, so that every `R_i†R_j` lies in
/// `span{P, Q}`.
pub fn gen_diagonalizable_family(n: usize, members: usize, shape: FamilyShape, seed: u64) -> Result<Vec<CMatrix>> {
    if n < 2 || members < 2 {
        return Err(Error::InvalidDims(format!("need n >= 2 and at least 2 members, got n = {n}, {members}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let u0 = haar_unitary(n, &mut rng);
    let v0 = haar_unitary(n, &mut rng);
    let split = random_split(n, &mut rng);
    let mut coeffs: Vec<(C64, C64)> = Vec::with_capacity(members);
    for i in 0..members {
        let a = random_phases(1, &mut rng)[0];
        let b = random_phases(1, &mut rng)[0];
        let r = 0.5 + rng.random::<f64>();
        let pair = match shape {
            FamilyShape::Generic => (a * r, b * (0.2 + 1.6 * rng.random::<f64>())),
            FamilyShape::AllUnitary => (a * r, b * r),
            // the lead is scaled past every other member's norm
            FamilyShape::SingularLead if i == 0 => (a * (4.0 * n as f64), c(0.0, 0.0)),
            FamilyShape::SingularLead => (a * r, b * r),
        };
        coeffs.push(pair);
    }
    Ok(coeffs
        .into_iter()
        .map(|(a, b)| {
            let d: Vec<C64> = split.iter().map(|&p| if p { a } else { b }).collect();
            &u0 * linalg::from_diagonal(&d) * &v0
        })
        .collect())
}
