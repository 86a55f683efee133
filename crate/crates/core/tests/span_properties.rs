use ctrlrank_core::detect::{stacked_span_dims, theorem4_check, unitarity_expansion};
use ctrlrank_core::generate::{gaussian_matrix, gen_entangling_phase, gen_rank2, gen_vanishing};
use ctrlrank_core::{CMatrix, Cut, PartyDims, Tolerances};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unitarity_expansions_satisfy_span_bound(
        dims in prop::sample::select(vec![vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 2, 2], vec![2, 3, 2]]),
        seed in any::<u64>(),
        which in 0usize..3,
    ) {
        let dims = PartyDims::new(dims).unwrap();
        let u = match which {
            0 => gen_rank2(&dims, seed).unwrap(),
            1 => gen_vanishing(&dims, seed).unwrap(),
            _ => gen_entangling_phase(&dims, seed).unwrap().operator,
        };
        for party in 0..dims.len() {
            let cut = Cut::single(party, dims.len()).unwrap();
            let (terms, coeffs) = unitarity_expansion(&u, &cut, &tol()).unwrap();
            let report = theorem4_check(&terms, &coeffs, &tol()).unwrap();
            prop_assert!(report.holds, "{:?}", report);
        }
    }

    #[test]
    fn stacking_never_shrinks_the_span(
        n in 1usize..7,
        da in 1usize..4,
        db in 1usize..4,
        low_rank in 0usize..3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        // draw from a small span so dependencies actually occur
        let basis: Vec<CMatrix> = (0..low_rank + 1).map(|_| gaussian_matrix(da, da, &mut rng)).collect();
        let alpha: Vec<CMatrix> = (0..n)
            .map(|_| {
                let w = gaussian_matrix(basis.len(), 1, &mut rng);
                basis.iter().zip(w.iter()).fold(CMatrix::zeros(da, da), |acc, (b, c)| acc + b * *c)
            })
            .collect();
        let beta: Vec<CMatrix> = (0..n).map(|_| gaussian_matrix(db, db, &mut rng)).collect();
        let report = stacked_span_dims(&alpha, &beta, &tol()).unwrap();
        prop_assert!(report.stacked >= report.alpha, "{:?}", report);
    }
}
