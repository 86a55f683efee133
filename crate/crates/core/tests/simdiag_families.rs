use std::collections::HashMap;

use ctrlrank_core::generate::{gen_diagonalizable_family, pauli_x, pauli_z, FamilyShape};
use ctrlrank_core::linalg;
use ctrlrank_core::simdiag::{gram_span, lemma2_diagonalize, AppendixBranch};
use ctrlrank_core::{CMatrix, Error, Tolerances, C64};
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn offdiag_after(u: &CMatrix, r: &CMatrix, v: &CMatrix) -> f64 {
    linalg::offdiag_norm(&(u * r * v.adjoint()))
}

#[test]
fn each_shape_takes_its_branch() {
    let expect = [
        (FamilyShape::Generic, AppendixBranch::PivotSvd),
        (FamilyShape::AllUnitary, AppendixBranch::UnitaryPair),
        (FamilyShape::SingularLead, AppendixBranch::HermitianSquare),
    ];
    for (shape, branch) in expect {
        let mut seen: HashMap<AppendixBranch, usize> = HashMap::new();
        for seed in 0..40 {
            let fam = gen_diagonalizable_family(2 + (seed as usize % 4), 2 + (seed as usize % 3), shape, seed).unwrap();
            let diag = lemma2_diagonalize(&fam, &tol()).unwrap();
            *seen.entry(diag.branch).or_default() += 1;
        }
        assert_eq!(seen.get(&branch), Some(&40), "{shape:?}: {seen:?}");
    }
}

#[test]
fn anticommuting_paulis_are_rejected() {
    let fam = [CMatrix::identity(2, 2), pauli_x(), pauli_z()];
    assert!(matches!(lemma2_diagonalize(&fam, &tol()), Err(Error::PreconditionFailed(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn families_are_diagonalized(
        n in 2usize..7,
        members in 2usize..6,
        shape in prop::sample::select(FamilyShape::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let fam = gen_diagonalizable_family(n, members, shape, seed).unwrap();
        let scale = fam.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let diag = lemma2_diagonalize(&fam, &tol()).unwrap();
        for r in &fam {
            prop_assert!(offdiag_after(&diag.left, r, &diag.right) <= 1e-9 * scale);
        }
        prop_assert!(linalg::unitarity_deviation(&diag.left) < 1e-10);
        prop_assert!(linalg::unitarity_deviation(&diag.right) < 1e-10);
    }

    #[test]
    fn span_dim_survives_recombination_and_rotation(
        n in 2usize..6,
        seed in any::<u64>(),
        w in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let fam = gen_diagonalizable_family(n, 2, FamilyShape::Generic, seed).unwrap();
        let base = gram_span(&fam, &tol()).unwrap();
        // invertible 2x2 recombination
        let (a, b) = (C64::new(1.0 + w[0].abs(), w[1]), C64::new(w[2], w[3]));
        let mixed = vec![&fam[0] * a + &fam[1] * b, &fam[0] * b.conj() * C64::new(-1.0, 0.0) + &fam[1] * a.conj()];
        prop_assert_eq!(gram_span(&mixed, &tol()).unwrap().dim, base.dim);
        let x = linalg::polar_unitary(&(CMatrix::identity(n, n) + &fam[0] * C64::new(0.0, 0.3)));
        let rotated: Vec<CMatrix> = fam.iter().map(|r| &x * r * x.adjoint()).collect();
        let report = gram_span(&rotated, &tol()).unwrap();
        prop_assert_eq!(report.dim, base.dim);
        prop_assert_eq!(report.contains_identity, base.contains_identity);
    }
}
