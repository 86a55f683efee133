//! Independent re-verification of [`ControlledFormCertificate`]s.
//!
//! Nothing computed by the pipelines is reused except the certificate's own
//! fields; Kronecker products and block extraction are done here with
//! explicit index loops.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// shadowed by inherent methods whenever std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::controlize::{ControlledFormCertificate, PartyLocals};
use crate::{CMatrix, Error, MultipartiteOperator, PartyDims, Result, Tolerances, C64};

/// Individual residuals, all Frobenius-norm based, and the verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub local_unitarity: f64,
    /// Mass outside the control-diagonal block structure after applying the
    /// control locals.
    pub block_structure: f64,
    /// Largest difference between recomputed and recorded blocks.
    pub block_mismatch: f64,
    pub block_unitarity: f64,
    pub diagonality: f64,
    pub phase_mismatch: f64,
    pub unimodularity: f64,
    /// `‖U − (⊗L)† diag(phases) (⊗R)‖`.
    pub reconstruction: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn malformed(msg: impl Into<alloc::string::String>) -> Error {
    Error::MalformedCertificate(msg.into())
}

fn check_shape(cert: &ControlledFormCertificate, u: &MultipartiteOperator) -> Result<()> {
    let dims = &cert.dims;
    if dims != u.dims() {
        return Err(malformed(format!("certificate dims {:?} differ from operator dims {:?}", dims.dims(), u.dims().dims())));
    }
    let p = dims.len();
    let mut seen = vec![false; p];
    for l in cert.control_parties.iter().chain([&cert.target]) {
        if l.party >= p {
            return Err(malformed(format!("party {} out of range", l.party)));
        }
        if seen[l.party] {
            return Err(malformed(format!("party {} listed twice", l.party)));
        }
        seen[l.party] = true;
        let d = dims.dim(l.party);
        if l.left.shape() != (d, d) || l.right.shape() != (d, d) {
            return Err(malformed(format!("locals of party {} are not {d}x{d}", l.party)));
        }
    }
    let control_dim: usize = cert.control_parties.iter().map(|l| dims.dim(l.party)).product();
    let block_dim = dims.total() / control_dim;
    if cert.blocks.len() != control_dim {
        return Err(malformed(format!("expected {control_dim} blocks, found {}", cert.blocks.len())));
    }
    if cert.blocks.iter().any(|b| b.shape() != (block_dim, block_dim)) {
        return Err(malformed(format!("blocks must be {block_dim}x{block_dim}")));
    }
    if cert.diagonal_phases.len() != dims.total() {
        return Err(malformed(format!("expected {} diagonal phases, found {}", dims.total(), cert.diagonal_phases.len())));
    }
    Ok(())
}

/// `⊗_α M_α` with `None` for identities, by direct index arithmetic.
fn party_product(dims: &PartyDims, mats: &[Option<&CMatrix>]) -> CMatrix {
    let n = dims.total();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| dims.split_index(i)).collect();
    CMatrix::from_fn(n, n, |i, j| {
        let mut z = C64::new(1.0, 0.0);
        for (a, m) in mats.iter().enumerate() {
            let (x, y) = (digits[i][a], digits[j][a]);
            match m {
                Some(m) => z *= m[(x, y)],
                None if x != y => return C64::new(0.0, 0.0),
                None => {}
            }
        }
        z
    })
}

fn unitarity_frob(m: &CMatrix) -> f64 {
    let n = m.ncols();
    (m.adjoint() * m - CMatrix::identity(n, n)).norm()
}

/// Re-check a certificate against `u` with thresholds from `tol`.
pub fn verify_certificate(u: &MultipartiteOperator, cert: &ControlledFormCertificate, tol: &Tolerances) -> Result<VerificationReport> {
    check_shape(cert, u)?;
    let dims = &cert.dims;
    let p = dims.len();

    let mut local_unitarity = 0.0f64;
    for l in cert.control_parties.iter().chain([&cert.target]) {
        local_unitarity = local_unitarity.max(unitarity_frob(&l.left)).max(unitarity_frob(&l.right));
    }

    let slots = |list: &[&PartyLocals], right: bool| -> CMatrix {
        let mut mats: Vec<Option<&CMatrix>> = vec![None; p];
        for l in list {
            mats[l.party] = Some(if right { &l.right } else { &l.left });
        }
        party_product(dims, &mats)
    };

    // block structure after the control locals
    let controls: Vec<&PartyLocals> = cert.control_parties.iter().collect();
    let partial = slots(&controls, false) * u.matrix() * slots(&controls, true).adjoint();
    let is_control: Vec<bool> = (0..p).map(|a| controls.iter().any(|l| l.party == a)).collect();
    let n = dims.total();
    let block_dim = cert.blocks.first().map_or(n, |b| b.nrows());
    let mut extracted = vec![CMatrix::zeros(block_dim, block_dim); cert.blocks.len()];
    let mut outside = 0.0;
    let index_of = |flat: usize| {
        let digits = dims.split_index(flat);
        let mut k = 0;
        let mut r = 0;
        for a in 0..p {
            if is_control[a] {
                k = k * dims.dim(a) + digits[a];
            } else {
                r = r * dims.dim(a) + digits[a];
            }
        }
        (k, r)
    };
    let coords: Vec<(usize, usize)> = (0..n).map(index_of).collect();
    for i in 0..n {
        for j in 0..n {
            let (ki, ri) = coords[i];
            let (kj, rj) = coords[j];
            if ki == kj {
                extracted[ki][(ri, rj)] = partial[(i, j)];
            } else {
                outside += partial[(i, j)].norm_sqr();
            }
        }
    }
    let block_structure = outside.sqrt();
    let block_mismatch = extracted.iter().zip(&cert.blocks).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let block_unitarity = extracted.iter().map(unitarity_frob).fold(0.0, f64::max);

    // diagonal form after all locals
    let mut all = controls.clone();
    all.push(&cert.target);
    let left = slots(&all, false);
    let right = slots(&all, true);
    let full = &left * u.matrix() * right.adjoint();
    let mut off = 0.0;
    let mut phase_mismatch = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += full[(i, j)].norm_sqr();
            }
        }
        phase_mismatch = phase_mismatch.max((full[(i, i)] - cert.diagonal_phases[i]).norm());
    }
    let diagonality = off.sqrt();
    let unimodularity = cert.diagonal_phases.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    let diag = CMatrix::from_fn(n, n, |i, j| if i == j { cert.diagonal_phases[i] } else { C64::new(0.0, 0.0) });
    let reconstruction = (u.matrix() - left.adjoint() * diag * right).norm();

    let residual = [
        local_unitarity,
        block_structure,
        block_mismatch,
        block_unitarity,
        diagonality,
        phase_mismatch,
        unimodularity,
        reconstruction,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(VerificationReport {
        local_unitarity,
        block_structure,
        block_mismatch,
        block_unitarity,
        diagonality,
        phase_mismatch,
        unimodularity,
        reconstruction,
        residual,
        tolerance: tol.residual,
        passed: residual <= tol.residual,
    })
}
