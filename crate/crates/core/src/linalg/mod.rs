//! Dense complex linear algebra: the matrix type, Kronecker products, partial
//! traces, (normalized) vectorization and reshuffling, Jacobi eigen/singular
//! value decompositions, and projection onto density matrices.

mod decomp;
mod matrix;
mod ops;

pub use decomp::{
    cluster_ranges, fix_phase, hermitian_eig, hermitian_eig_with_gap, svd, unitary_eigenphases,
    EigenDecomposition, Svd, DEFAULT_CLUSTER_GAP,
};
pub use matrix::{gates, inner, norm, CMatrix, C64};
pub(crate) use matrix::ZERO;
pub use ops::{
    frobenius, index_permutation, kron, kron_all, kron_vec, nearest_density_matrix, partial_trace,
    permute_subsystems, project_simplex,
    reshuffle, reshuffle_dims, spectral, trace_norm, unreshuffle_dims, unvectorize, vectorize,
    BipartiteSplit,
};

/// Projector onto the span of the given orthonormal vectors.
pub fn span_projector(vectors: &[Vec<C64>]) -> CMatrix {
    let n = vectors.first().map_or(0, Vec::len);
    let mut p = CMatrix::zeros(n, n);
    for v in vectors {
        p += &CMatrix::outer(v, v);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::gates::*;
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn assert_close(got: &[C64], want: &[C64]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < 1e-15, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn kron_identity_and_diagonal() {
        assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(2)), CMatrix::identity(4));
        assert_eq!(kron(&pauli_z(), &pauli_z()), CMatrix::diag_real(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn kron_builds_cnot() {
        let p0 = CMatrix::diag_real(&[1.0, 0.0]);
        let p1 = CMatrix::diag_real(&[0.0, 1.0]);
        let built = &kron(&p0, &CMatrix::identity(2)) + &kron(&p1, &pauli_x());
        assert_eq!(built, cnot());
    }

    #[test]
    fn partial_trace_of_bell_pair_is_maximally_mixed() {
        let h = FRAC_1_SQRT_2;
        let phi = [c(h), c(0.0), c(0.0), c(h)];
        let rho = CMatrix::outer(&phi, &phi);
        let out = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(out.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut r = rng::seeded(3);
        let a = nearest_density_matrix(&rng::random_hermitian(2, &mut r)).unwrap();
        let b = nearest_density_matrix(&rng::random_hermitian(4, &mut r)).unwrap();
        let rho = kron(&a, &b);
        assert!(partial_trace(&rho, &[2, 4], &[0]).unwrap().max_abs_diff(&a) < 1e-14);
        assert!(partial_trace(&rho, &[2, 4], &[1]).unwrap().max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn partial_trace_keeps_middle_subsystem() {
        let mut r = rng::seeded(4);
        let a = nearest_density_matrix(&rng::random_hermitian(2, &mut r)).unwrap();
        let b = nearest_density_matrix(&rng::random_hermitian(3, &mut r)).unwrap();
        let cc = nearest_density_matrix(&rng::random_hermitian(2, &mut r)).unwrap();
        let rho = kron_all(&[a, b.clone(), cc]);
        assert!(partial_trace(&rho, &[2, 3, 2], &[1]).unwrap().max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = CMatrix::identity(4);
        assert!(partial_trace(&rho, &[2, 3], &[0]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[2]).is_err());
    }

    /// Choi state of CNOT built entry by entry from its definition, then traced
    /// over the B registers: two equal eigenvalues 1/2.
    #[test]
    fn cnot_choi_marginal_has_two_halves() {
        let u = cnot();
        // layout [A_ref, A_out, B_ref, B_out], one qubit each
        let mut psi = vec![C64::new(0.0, 0.0); 16];
        for ar in 0..2 {
            for br in 0..2 {
                for ao in 0..2 {
                    for bo in 0..2 {
                        psi[ar * 8 + ao * 4 + br * 2 + bo] = u[(ao * 2 + bo, ar * 2 + br)] * 0.5;
                    }
                }
            }
        }
        let rho = CMatrix::outer(&psi, &psi);
        let rho_a = partial_trace(&rho, &[2, 2, 2, 2], &[0, 1]).unwrap();
        let eig = hermitian_eig(&rho_a).unwrap();
        let expected = [0.5, 0.5, 0.0, 0.0];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14, "{:?}", eig.values);
        }
    }

    #[test]
    fn vectorize_conventions() {
        let v = vectorize(&CMatrix::identity(2)).unwrap();
        let h = FRAC_1_SQRT_2;
        assert_close(&v, &[c(h), c(0.0), c(0.0), c(h)]);

        let s2 = 2f64.sqrt();
        let a = vectorize(&CMatrix::diag_real(&[s2, 0.0])).unwrap();
        let b = vectorize(&CMatrix::diag_real(&[0.0, s2])).unwrap();
        assert!((norm(&a) - 1.0).abs() < 1e-15);
        assert!((norm(&b) - 1.0).abs() < 1e-15);
        assert_eq!(inner(&a, &b), c(0.0));

        let vx = vectorize(&pauli_x()).unwrap();
        let vy = vectorize(&pauli_y()).unwrap();
        assert!(inner(&vx, &vy).norm() < 1e-16);
        assert!((norm(&vx) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vectorize_layout_is_reference_then_output() {
        // Entry (i, j) of vec(A) is the amplitude of |i⟩_ref |j⟩_out.
        let a = CMatrix::from_fn(2, 2, |r, col| c((2 * r + col) as f64));
        let v = vectorize(&a).unwrap();
        let h = FRAC_1_SQRT_2;
        assert_close(&v, &[c(0.0), c(2.0 * h), c(h), c(3.0 * h)]);
    }

    #[test]
    fn vectorize_rejects_nonsquare() {
        assert!(vectorize(&CMatrix::zeros(2, 3)).is_err());
        assert!(unvectorize(&[c(1.0); 3], 2).is_err());
    }

    #[test]
    fn reshuffle_of_product_has_rank_one() {
        let mut r = rng::seeded(5);
        let a = rng::random_matrix(2, 2, &mut r);
        let b = rng::random_matrix(4, 4, &mut r);
        let split = BipartiteSplit::new(1, 2).unwrap();
        let sv = svd(&reshuffle(&kron(&a, &b), split).unwrap()).sigma;
        assert!(sv[0] > 0.1);
        assert!(sv[1..].iter().all(|&s| s < 1e-14 * sv[0]), "{sv:?}");
    }

    #[test]
    fn reshuffle_singular_values_of_swap_and_cnot() {
        let split = BipartiteSplit::new(1, 1).unwrap();
        let sw = svd(&reshuffle(&swap(), split).unwrap()).sigma;
        for s in sw {
            assert!((s - 0.5).abs() < 1e-15);
        }
        // R(CNOT) = (e_00 (1,0,0,1)ᵀ + e_11 (0,1,1,0)ᵀ)/2: two singular values √2/2.
        let cn = svd(&reshuffle(&cnot(), split).unwrap()).sigma;
        let expected = [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0];
        for (s, e) in cn.iter().zip(expected) {
            assert!((s - e).abs() < 1e-15, "{cn:?}");
        }
    }

    #[test]
    fn permuting_subsystems_swaps_kronecker_factors() {
        let mut r = rng::seeded(10);
        let a = rng::random_matrix(2, 2, &mut r);
        let b = rng::random_matrix(4, 4, &mut r);
        let cc = rng::random_matrix(2, 2, &mut r);
        let u = kron_all(&[a.clone(), b.clone(), cc.clone()]);
        let p = permute_subsystems(&u, &[2, 4, 2], &[2, 0, 1]).unwrap();
        assert!(p.max_abs_diff(&kron_all(&[cc, a, b])) < 1e-15);
        assert!(permute_subsystems(&u, &[2, 4, 2], &[0, 0, 1]).is_err());
        assert_eq!(permute_subsystems(&swap(), &[2, 2], &[1, 0]).unwrap(), swap());
    }

    #[test]
    fn reshuffle_rejects_wrong_dimension() {
        let split = BipartiteSplit::new(1, 2).unwrap();
        assert!(reshuffle(&CMatrix::identity(4), split).is_err());
    }

    #[test]
    fn split_validation() {
        assert!(BipartiteSplit::new(0, 1).is_err());
        assert!(BipartiteSplit::new(2, 1).is_err());
        let s = BipartiteSplit::new(1, 3).unwrap();
        assert_eq!((s.d_a(), s.d_b(), s.dim()), (2, 8, 16));
    }

    #[test]
    fn eig_diagonal_and_pauli_x() {
        let e = hermitian_eig(&CMatrix::diag_real(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);

        let e = hermitian_eig(&pauli_x()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] + 1.0).abs() < 1e-15);
        let h = FRAC_1_SQRT_2;
        let plus = e.vector(0);
        let minus = e.vector(1);
        assert!((plus[0] - c(h)).norm() < 1e-15 && (plus[1] - c(h)).norm() < 1e-15);
        // gauge: largest component (first, by tie-break) is real positive
        assert!((minus[0] - c(h)).norm() < 1e-15 && (minus[1] + c(h)).norm() < 1e-15);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(hermitian_eig(&m), Err(crate::Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_flags_degenerate_clusters() {
        let e = hermitian_eig(&CMatrix::diag_real(&[0.5, 0.0, 0.5, 0.0])).unwrap();
        assert_eq!(e.clusters, vec![0..2, 2..4]);
        assert!(e.is_degenerate(0));
    }

    #[test]
    fn svd_identity_and_norms() {
        let s = svd(&CMatrix::identity(3));
        assert!(s.sigma.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let m = CMatrix::diag_real(&[3.0, -4.0]);
        assert!((frobenius(&m) - 5.0).abs() < 1e-15);
        assert!((spectral(&m) - 4.0).abs() < 1e-15);
        assert!((trace_norm(&m) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_factor_norm_is_sqrt_dim() {
        let split = BipartiteSplit::new(1, 1).unwrap();
        let s = svd(&reshuffle(&cnot(), split).unwrap());
        let a1 = CMatrix::from_fn(2, 2, |i, j| s.left(0)[i * 2 + j] * 2f64.sqrt());
        assert!((frobenius(&a1) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trace_norm_bounds_observable_error() {
        let mut r = rng::seeded(6);
        for _ in 0..20 {
            let rho = nearest_density_matrix(&rng::random_hermitian(4, &mut r)).unwrap();
            let sigma = nearest_density_matrix(&rng::random_hermitian(4, &mut r)).unwrap();
            let obs = rng::random_hermitian(4, &mut r);
            let diff = (obs.matmul(&rho).trace() - obs.matmul(&sigma).trace()).norm();
            assert!(diff <= spectral(&obs) * trace_norm(&(&rho - &sigma)) + 1e-12);
        }
    }

    #[test]
    fn nearest_density_matrix_examples() {
        let out = nearest_density_matrix(&CMatrix::diag_real(&[0.6, 0.6, -0.2])).unwrap();
        assert!(out.max_abs_diff(&CMatrix::diag_real(&[0.5, 0.5, 0.0])) < 1e-15);

        let mut r = rng::seeded(8);
        let rho = nearest_density_matrix(&rng::random_hermitian(4, &mut r)).unwrap();
        assert!(nearest_density_matrix(&rho).unwrap().max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn unitary_eigenphases_of_cnot_and_diagonal() {
        let p = unitary_eigenphases(&cnot()).unwrap();
        let expected = [0.0, 0.0, 0.0, std::f64::consts::PI];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
        let mut r = rng::seeded(9);
        let v = rng::haar_unitary(4, &mut r);
        let phases = [0.3, -1.2, 2.0, 0.3];
        let d = CMatrix::diag(&phases.map(|t| C64::from_polar(1.0, t)));
        let u = v.matmul(&d).matmul(&v.adjoint());
        let got = unitary_eigenphases(&u).unwrap();
        let mut want = phases.to_vec();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{got:?}");
        }
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |v| {
            CMatrix::from_vec(rows, cols, v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn vectorization_round_trip_and_inner_product(a in arb_matrix(4, 4), b in arb_matrix(4, 4)) {
            let va = vectorize(&a).unwrap();
            let vb = vectorize(&b).unwrap();
            prop_assert_eq!(unvectorize(&va, 4).unwrap(), a.clone());
            let lhs = inner(&va, &vb);
            let rhs = a.hs_inner(&b) / 4.0;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn reshuffle_inverse_recovers_operator(u in arb_matrix(8, 8)) {
            let r = reshuffle_dims(&u, 2, 4).unwrap();
            let back = unreshuffle_dims(&r, 2, 4).unwrap();
            prop_assert!(back.max_abs_diff(&u) <= 4.0 * f64::EPSILON);
        }

        #[test]
        fn eig_reconstructs(seed in 0u64..1000, n in 1usize..9) {
            let mut r = rng::seeded(seed);
            let h = rng::random_hermitian(n, &mut r);
            let e = hermitian_eig(&h).unwrap();
            prop_assert!((&e.reconstruct() - &h).frobenius_norm() <= 1e-9 * h.frobenius_norm());
            let v = &e.vectors;
            prop_assert!(v.unitarity_defect() < 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn svd_reconstructs(seed in 0u64..1000, rows in 1usize..7, cols in 1usize..7) {
            let mut r = rng::seeded(seed);
            let m = rng::random_matrix(rows, cols, &mut r);
            let s = svd(&m);
            prop_assert!((&s.reconstruct() - &m).frobenius_norm() <= 1e-9 * m.frobenius_norm());
            prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            let f2: f64 = s.sigma.iter().map(|x| x * x).sum();
            prop_assert!((f2.sqrt() - m.frobenius_norm()).abs() < 1e-10);
        }

        #[test]
        fn nearest_density_matrix_is_a_state(seed in 0u64..1000, n in 1usize..7) {
            let mut r = rng::seeded(seed);
            let out = nearest_density_matrix(&rng::random_hermitian(n, &mut r)).unwrap();
            let e = hermitian_eig(&out).unwrap();
            prop_assert!(e.values.iter().all(|&x| x >= -1e-12));
            prop_assert!((out.trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn reshuffled_haar_unitary_has_unit_weight(seed in 0u64..1000) {
            let mut r = rng::seeded(seed);
            let u = rng::haar_unitary(8, &mut r);
            let s = svd(&reshuffle_dims(&u, 2, 4).unwrap()).sigma;
            let total: f64 = s.iter().map(|x| x * x).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
