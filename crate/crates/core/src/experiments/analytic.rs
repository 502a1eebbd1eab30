//! Closed forms for the two-qubit Heisenberg model.
//!
//! All terms of `H = −(J_x XX + J_y YY + J_z ZZ)` commute, so
//! `U(t) = g₀ 𝟙 + g_x XX + g_y YY + g_z ZZ` with coefficients built from
//! `c_i = cos(J_i t)` and `s_i = sin(J_i t)`.

use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitAnalytic {
    pub t: f64,
    /// `(g₀, g_x, g_y, g_z)`.
    pub g: [C64; 4],
    /// Non-zero `|g_i|`, descending.
    pub s: Vec<f64>,
    /// Reduced state of qubit 1 for the initial state `|10⟩`.
    pub rho1: CMatrix,
    /// `⟨Z⟩` on qubit 1.
    pub z_expectation: f64,
    /// von Neumann entropy of `rho1` in nats.
    pub entropy: f64,
    /// `−Σ|g_i|² ln|g_i|²`.
    pub nonlocality: f64,
    /// Swap-corrected entangling power on qubit 1.
    pub e1: f64,
}

impl TwoQubitAnalytic {
    /// `1/2 − ⟨Z⟩/2`.
    pub fn occupation(&self) -> f64 {
        0.5 - self.z_expectation / 2.0
    }

    pub fn entropy_norm(&self) -> f64 {
        self.entropy / std::f64::consts::LN_2
    }

    pub fn nonlocality_norm(&self) -> f64 {
        self.nonlocality / 4f64.ln()
    }
}

/// Entries below this are treated as vanished Schmidt coefficients.
const ZERO_COEFFICIENT: f64 = 1e-12;

fn xlnx(p: f64) -> f64 {
    if p > 1e-300 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `(g₀, g_x, g_y, g_z)` at time `t`.
pub fn heisenberg_coefficients(jx: f64, jy: f64, jz: f64, t: f64) -> [C64; 4] {
    let (sx, cx) = (jx * t).sin_cos();
    let (sy, cy) = (jy * t).sin_cos();
    let (sz, cz) = (jz * t).sin_cos();
    [
        C64::new(cx * cy * cz, sx * sy * sz),
        C64::new(cx * sy * sz, sx * cy * cz),
        C64::new(cy * sx * sz, sy * cx * cz),
        C64::new(cz * sy * sx, sz * cy * cx),
    ]
}

pub fn analytic_two_qubit(jx: f64, jy: f64, jz: f64, t: f64) -> TwoQubitAnalytic {
    let g = heisenberg_coefficients(jx, jy, jz, t);
    let mut s: Vec<f64> = g.iter().map(|z| z.norm()).filter(|&x| x > ZERO_COEFFICIENT).collect();
    s.sort_by(|a, b| b.total_cmp(a));

    let nonlocality = -g.iter().map(|z| xlnx(z.norm_sqr())).sum::<f64>();
    // US = ½ Σ_j (Σ_k ±g_k) P_j ⊗ P_j with the sign pattern of Pauli products
    let [g0, gx, gy, gz] = g;
    let swapped = [g0 + gx + gy + gz, g0 + gx - gy - gz, g0 - gx + gy - gz, g0 - gx - gy + gz];
    let s_swapped = -swapped.iter().map(|z| xlnx(z.norm_sqr() / 4.0)).sum::<f64>();
    let e1 = (nonlocality + s_swapped) / 4f64.ln() - 1.0;

    let (sn, cs) = ((jx + jy) * t).sin_cos();
    let (p0, p1) = (sn * sn, cs * cs);
    let rho1 = CMatrix::diag_real(&[p0, p1]);
    TwoQubitAnalytic {
        t,
        g,
        s,
        rho1,
        z_expectation: p0 - p1,
        entropy: -(xlnx(p0) + xlnx(p1)),
        nonlocality,
        e1,
    }
}

/// Reduced state of qubit 1 for the initial state `|1+⟩`.
pub fn rho1_from_one_plus(g: &[C64; 4]) -> CMatrix {
    let [g0, gx, gy, gz] = *g;
    let p1 = g0.norm_sqr() + gz.norm_sqr();
    let p0 = gx.norm_sqr() + gy.norm_sqr();
    let c10 = g0 * gx.conj() + gz * gy.conj();
    CMatrix::from_rows(&[vec![C64::new(p0, 0.0), c10.conj()], vec![c10, C64::new(p1, 0.0)]])
        .expect("2x2 rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{entangling_power_swap, nonlocality, observables, reduced_dynamics};
    use crate::experiments::model::{build_hamiltonian, Couplings, SpinModel};
    use crate::io::parse_product_state;
    use crate::linalg::gates::*;
    use crate::linalg::BipartiteSplit;
    use crate::statevector::exact_evolution;
    use crate::tpd::classical_tpd;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn split() -> BipartiteSplit {
        BipartiteSplit::new(1, 1).unwrap()
    }

    fn pauli_sum(g: &[C64; 4]) -> CMatrix {
        let ps = paulis();
        let mut u = CMatrix::zeros(4, 4);
        for (gk, p) in g.iter().zip(&ps) {
            u += &crate::linalg::kron(p, p).scale(*gk);
        }
        u
    }

    #[test]
    fn initial_time() {
        let a = analytic_two_qubit(1.0, 1.0, 1.0, 0.0);
        assert_eq!(a.g[0], C64::new(1.0, 0.0));
        assert_eq!(a.s, vec![1.0]);
        assert_eq!(a.z_expectation, -1.0);
        assert_eq!(a.entropy, 0.0);
        assert_eq!(a.occupation(), 1.0);
    }

    #[test]
    fn isotropic_identity_time_has_rank_one() {
        let a = analytic_two_qubit(1.0, 1.0, 1.0, PI / 2.0);
        assert_eq!(a.s.len(), 1);
        assert!((a.g[0].norm() - 1.0).abs() < 1e-12);
        assert!(a.nonlocality.abs() < 1e-12);
    }

    #[test]
    fn xy_model_reaches_iswap() {
        let a = analytic_two_qubit(1.0, 1.0, 0.0, PI / 4.0);
        assert_eq!(a.s.len(), 4);
        assert!(a.s.iter().all(|x| (x - 0.5).abs() < 1e-12));
        let i = C64::new(0.0, 1.0);
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let iswap = CMatrix::from_rows(&[
            vec![one, o, o, o],
            vec![o, o, i, o],
            vec![o, i, o, o],
            vec![o, o, o, one],
        ])
        .unwrap();
        assert!((&pauli_sum(&a.g) - &iswap).frobenius_norm() < 1e-12);
        assert!((a.nonlocality_norm() - 1.0).abs() < 1e-12);
        // iSWAP·SWAP is a controlled phase, so half of the maximum remains
        assert!((a.e1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn isotropic_model_reaches_swap() {
        let a = analytic_two_qubit(1.0, 1.0, 1.0, PI / 4.0);
        let u = pauli_sum(&a.g);
        let phase = u[(0, 0)];
        assert!((&u - &swap().scale(phase)).frobenius_norm() < 1e-12);
        assert!(a.e1.abs() < 1e-12);
        assert!((a.nonlocality_norm() - 1.0).abs() < 1e-12);
        assert!((a.occupation()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_forms_match_simulation(
            jx in -2.0..2.0f64, jy in -2.0..2.0f64, jz in -2.0..2.0f64, t in 0.0..4.0f64,
        ) {
            let a = analytic_two_qubit(jx, jy, jz, t);
            let h = build_hamiltonian(&SpinModel::pair(Couplings { jx, jy, jz })).unwrap();
            let u = exact_evolution(&h, t).unwrap();
            prop_assert!((&pauli_sum(&a.g) - &u).frobenius_norm() < 1e-10);

            let tpd = classical_tpd(&u, split()).unwrap();
            prop_assert!((nonlocality(&tpd.s).unwrap() - a.nonlocality).abs() < 1e-9);
            prop_assert!((entangling_power_swap(&u, split()).unwrap() - a.e1).abs() < 1e-9);

            let one = parse_product_state("1").unwrap();
            let zero = parse_product_state("0").unwrap();
            let rho = reduced_dynamics(&u, split(), &one, &zero).unwrap();
            prop_assert!(rho.max_abs_diff(&a.rho1) < 1e-10);
            let obs = observables(&rho, 1).unwrap();
            prop_assert!((obs.magnetization - a.z_expectation).abs() < 1e-10);
            prop_assert!((obs.entropy_norm - a.entropy_norm()).abs() < 1e-9);

            let plus = parse_product_state("+").unwrap();
            let rho_plus = reduced_dynamics(&u, split(), &one, &plus).unwrap();
            prop_assert!(rho_plus.max_abs_diff(&rho1_from_one_plus(&a.g)) < 1e-10);
        }
    }
}
