use rayon::prelude::*;

use super::{ChoiReducedState, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{nearest_density_matrix, partial_trace, BipartiteSplit, CMatrix, C64, ZERO};
use crate::rng;
use crate::statevector::{choi_state, pauli_expectation, sample_expectation, PauliString, A_OUT, A_REF};

/// Shots per measurement setting; `Infinite` uses exact expectation values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl Shots {
    fn count(self) -> Option<u64> {
        match self {
            Shots::Finite(n) => Some(n),
            Shots::Infinite => None,
        }
    }

    fn validate(self) -> Result<()> {
        if self == Shots::Finite(0) {
            return Err(Error::InvalidArgument("shots per setting must be at least 1".into()));
        }
        Ok(())
    }
}

/// Exact marginal of the simulated Choi state on `(A_ref, A_out)`.
pub fn choi_reduced_exact(u: &CMatrix, split: BipartiteSplit) -> Result<ChoiReducedState> {
    let choi = choi_state(u, split)?;
    let rho = choi.reduced_density_matrix(&[A_REF, A_OUT])?;
    Ok(ChoiReducedState { split, rho, provenance: Provenance::Exact, error_estimate: 0.0 })
}

/// Pauli linear-inversion tomography of `ρ` on `n` qubits: every non-identity
/// string is estimated from `shots` binomial draws on its own RNG stream.
/// Returns the raw (unprojected) estimate and the estimated Frobenius error.
fn pauli_tomography(rho: &CMatrix, n: usize, shots: Shots, seed: u64, stream_offset: u64) -> Result<(CMatrix, f64)> {
    let dim = 1usize << n;
    let strings: Vec<PauliString> = PauliString::all(n).collect();
    let estimates: Vec<(f64, f64)> = strings
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            let exact = pauli_expectation(rho, p)?;
            if p.is_identity() {
                return Ok((exact, 0.0));
            }
            Ok(match shots {
                Shots::Infinite => (exact, 0.0),
                Shots::Finite(n_shots) => {
                    let mut stream = rng::stream(seed, stream_offset + idx as u64);
                    let e = sample_expectation(exact, n_shots, &mut stream);
                    (e, (1.0 - e * e).max(0.0) / n_shots as f64)
                }
            })
        })
        .collect::<Result<_>>()?;
    let mut lin = CMatrix::zeros(dim, dim);
    let inv = 1.0 / dim as f64;
    let mut variance = 0.0;
    for (p, (e, var)) in strings.iter().zip(&estimates) {
        p.add_scaled_to(&mut lin, e * inv);
        variance += var;
    }
    // ‖δρ‖_F² = Σ_P δe_P² ‖P‖_F² / dim² = Σ_P δe_P² / dim
    Ok((lin, (variance * inv).sqrt()))
}

/// Simulated tomography of the Choi marginal: `4^{2 n_a}` Pauli settings on
/// `(A_ref, A_out)`, one binomial estimate each, linear inversion, then
/// projection onto density matrices.
pub fn tomographic_snapshot(u: &CMatrix, split: BipartiteSplit, shots: Shots, seed: u64) -> Result<ChoiReducedState> {
    shots.validate()?;
    let exact = choi_reduced_exact(u, split)?;
    let n = 2 * split.n_a();
    let (lin, error_estimate) = pauli_tomography(&exact.rho, n, shots, seed, 0)?;
    let rho = nearest_density_matrix(&lin)?;
    Ok(ChoiReducedState {
        split,
        rho,
        provenance: Provenance::Tomographic { shots_per_setting: shots.count(), seed, n_settings: 1 << (2 * n) },
        error_estimate,
    })
}

/// The B-averaged channel `E(X) = Tr_B[U (X ⊗ I) U†]/d_B = Σ_k s_k² A_k X A_k†`
/// on a pure input `|φ⟩⟨φ|`, accumulated over computational basis states of B.
fn averaged_output(u: &CMatrix, split: BipartiteSplit, phi: &[C64]) -> CMatrix {
    let (d_a, d_b) = (split.d_a(), split.d_b());
    let mut acc = CMatrix::zeros(d_a, d_a);
    let mut input = vec![ZERO; d_a * d_b];
    for jb in 0..d_b {
        input.iter_mut().for_each(|z| *z = ZERO);
        for (ia, &c) in phi.iter().enumerate() {
            input[ia * d_b + jb] = c;
        }
        let out = u.mat_vec(&input);
        let full = CMatrix::outer(&out, &out);
        acc += &partial_trace(&full, &[d_a, d_b], &[0]).expect("valid dims");
    }
    acc.scale_real(1.0 / d_b as f64)
}

/// Input states of the sequential protocol: `|i⟩` for every `i`, then for every
/// pair `i < i'` the four states `(|i⟩ ± |i'⟩)/√2`, `(|i⟩ ± i|i'⟩)/√2`.
fn sequential_inputs(d_a: usize) -> Vec<Vec<C64>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    for i in 0..d_a {
        let mut v = vec![ZERO; d_a];
        v[i] = C64::new(1.0, 0.0);
        out.push(v);
    }
    for i in 0..d_a {
        for j in i + 1..d_a {
            for c in [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)] {
                let mut v = vec![ZERO; d_a];
                v[i] = C64::new(h, 0.0);
                v[j] = c;
                out.push(v);
            }
        }
    }
    out
}

/// Marginal reconstructed without the doubled register.
///
/// For each input `|φ⟩` of A (averaged over basis states of B) the output on A
/// is `E(|φ⟩⟨φ|)`. Basis inputs give `E(|i⟩⟨i|)`; the polarization identity
/// `|i⟩⟨i'| = ½[(P₊ − P₋) + i(P₊ᵢ − P₋ᵢ)]` gives the coherences. Then
/// `ρ_A = (1/d_A) Σ_{i,i'} |i⟩⟨i'| ⊗ E(|i⟩⟨i'|)`. With finite shots every output
/// is estimated by `n_a`-qubit Pauli tomography and the result is projected
/// onto density matrices. This takes `d_A + 4·C(d_A, 2)` inputs with
/// `4^{n_a}` settings each, on a register half the size of the Choi route.
pub fn sequential_snapshot(u: &CMatrix, split: BipartiteSplit, shots: Shots, seed: u64) -> Result<ChoiReducedState> {
    shots.validate()?;
    split.check_operator(u)?;
    u.require_unitary(1e-9)?;
    let d_a = split.d_a();
    let n_a = split.n_a();
    let inputs = sequential_inputs(d_a);
    let settings_per_input = 1u64 << (2 * n_a);
    let outputs: Vec<(CMatrix, f64)> = inputs
        .par_iter()
        .enumerate()
        .map(|(idx, phi)| {
            let exact = averaged_output(u, split, phi);
            match shots {
                Shots::Infinite => Ok((exact, 0.0)),
                Shots::Finite(_) => pauli_tomography(&exact, n_a, shots, seed, idx as u64 * settings_per_input),
            }
        })
        .collect::<Result<_>>()?;

    let mut blocks = vec![vec![CMatrix::zeros(d_a, d_a); d_a]; d_a];
    let mut variance = 0.0;
    for i in 0..d_a {
        blocks[i][i] = outputs[i].0.clone();
        variance += outputs[i].1.powi(2);
    }
    let mut next = d_a;
    let i_unit = C64::new(0.0, 1.0);
    for i in 0..d_a {
        for j in i + 1..d_a {
            let (pp, pm, pi, pmi) = (&outputs[next].0, &outputs[next + 1].0, &outputs[next + 2].0, &outputs[next + 3].0);
            let real = pp - pm;
            let imag = (pi - pmi).scale(i_unit);
            let e_ij = (&real + &imag).scale_real(0.5);
            blocks[j][i] = e_ij.adjoint();
            blocks[i][j] = e_ij;
            // each coherence block (and its adjoint) carries a quarter of the four input variances
            variance += 2.0 * 0.25 * outputs[next..next + 4].iter().map(|o| o.1.powi(2)).sum::<f64>();
            next += 4;
        }
    }
    let dim = d_a * d_a;
    let inv = 1.0 / d_a as f64;
    let lin = CMatrix::from_fn(dim, dim, |r, c| blocks[r / d_a][c / d_a][(r % d_a, c % d_a)] * inv);
    let error_estimate = variance.sqrt() * inv;
    let rho = match shots {
        Shots::Infinite => lin.hermitian_part(),
        Shots::Finite(_) => nearest_density_matrix(&lin)?,
    };
    Ok(ChoiReducedState {
        split,
        rho,
        provenance: Provenance::Sequential {
            shots_per_setting: shots.count(),
            seed,
            n_settings: inputs.len() * settings_per_input as usize,
        },
        error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gates::*;
    use crate::linalg::{hermitian_eig, kron, vectorize};
    use crate::qtpd::extract_factors;
    use crate::tpd::classical_tpd;

    fn split(a: usize, b: usize) -> BipartiteSplit {
        BipartiteSplit::new(a, b).unwrap()
    }

    fn spectrum(rho: &CMatrix) -> Vec<f64> {
        hermitian_eig(rho).unwrap().values
    }

    #[test]
    fn exact_snapshots_of_reference_gates() {
        let snap = choi_reduced_exact(&CMatrix::identity(4), split(1, 1)).unwrap();
        let v = vectorize(&CMatrix::identity(2)).unwrap();
        assert!(snap.rho.max_abs_diff(&CMatrix::outer(&v, &v)) < 1e-15);

        let snap = choi_reduced_exact(&swap(), split(1, 1)).unwrap();
        assert!(snap.rho.max_abs_diff(&CMatrix::identity(4).scale_real(0.25)) < 1e-15);

        let snap = choi_reduced_exact(&cnot(), split(1, 1)).unwrap();
        for (x, y) in spectrum(&snap.rho).iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_snapshot_matches_factor_sum() {
        let mut r = rng::seeded(50);
        let sp = split(1, 2);
        let u = rng::haar_unitary(8, &mut r);
        let t = classical_tpd(&u, sp).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        for (a, s) in t.a_ops.iter().zip(&t.s) {
            let v = vectorize(a).unwrap();
            want += &CMatrix::outer(&v, &v).scale_real(s * s);
        }
        let snap = choi_reduced_exact(&u, sp).unwrap();
        assert!(snap.rho.max_abs_diff(&want) < 1e-12);
        assert!((snap.rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_snapshot_rejects_non_unitary() {
        let m = CMatrix::diag_real(&[1.0, 1.0, 1.0, 0.5]);
        assert!(choi_reduced_exact(&m, split(1, 1)).is_err());
    }

    #[test]
    fn infinite_shots_reproduce_exact_snapshot() {
        let mut r = rng::seeded(51);
        let u = rng::haar_unitary(8, &mut r);
        let exact = choi_reduced_exact(&u, split(1, 2)).unwrap();
        let tomo = tomographic_snapshot(&u, split(1, 2), Shots::Infinite, 1).unwrap();
        assert!(tomo.rho.max_abs_diff(&exact.rho) < 1e-12);
        assert_eq!(tomo.error_estimate, 0.0);
    }

    #[test]
    fn single_shot_snapshot_is_still_a_state() {
        let tomo = tomographic_snapshot(&cnot(), split(1, 1), Shots::Finite(1), 3).unwrap();
        let vals = spectrum(&tomo.rho);
        assert!(vals.iter().all(|&x| x >= -1e-12));
        assert!((tomo.rho.trace().re - 1.0).abs() < 1e-12);
        assert!(tomographic_snapshot(&cnot(), split(1, 1), Shots::Finite(0), 3).is_err());
    }

    #[test]
    fn tomography_is_deterministic_given_seed() {
        let a = tomographic_snapshot(&cnot(), split(1, 1), Shots::Finite(100), 9).unwrap();
        let b = tomographic_snapshot(&cnot(), split(1, 1), Shots::Finite(100), 9).unwrap();
        let c = tomographic_snapshot(&cnot(), split(1, 1), Shots::Finite(100), 10).unwrap();
        assert_eq!(a.rho, b.rho);
        assert_ne!(a.rho, c.rho);
        assert_eq!(a.provenance, Provenance::Tomographic { shots_per_setting: Some(100), seed: 9, n_settings: 16 });
    }

    #[test]
    fn error_estimate_tracks_actual_error() {
        let mut r = rng::seeded(52);
        let u = rng::haar_unitary(8, &mut r);
        let exact = choi_reduced_exact(&u, split(1, 2)).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let tomo = tomographic_snapshot(&u, split(1, 2), Shots::Finite(10_000), seed).unwrap();
            ratios.push((&tomo.rho - &exact.rho).frobenius_norm() / tomo.error_estimate);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        // projection only removes error, so the actual error sits below the estimate
        assert!(mean > 0.2 && mean < 1.5, "{ratios:?}");
    }

    #[test]
    fn sequential_exact_matches_choi_route() {
        let mut r = rng::seeded(53);
        for sp in [split(1, 1), split(1, 2), split(2, 2)] {
            let u = rng::haar_unitary(sp.dim(), &mut r);
            let choi = choi_reduced_exact(&u, sp).unwrap();
            let seq = sequential_snapshot(&u, sp, Shots::Infinite, 0).unwrap();
            assert!(seq.rho.max_abs_diff(&choi.rho) < 1e-9);
        }
        let seq = sequential_snapshot(&CMatrix::identity(4), split(1, 1), Shots::Infinite, 0).unwrap();
        let v = vectorize(&CMatrix::identity(2)).unwrap();
        assert!(seq.rho.max_abs_diff(&CMatrix::outer(&v, &v)) < 1e-14);

        let seq = sequential_snapshot(&cnot(), split(1, 1), Shots::Infinite, 0).unwrap();
        let f = extract_factors(&seq, None).unwrap();
        assert_eq!(f.rank(), 2);
        assert!(f.s.iter().all(|s| (s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12));
    }

    #[test]
    fn sequential_settings_count() {
        let seq = sequential_snapshot(&kron(&cnot(), &CMatrix::identity(2)), split(1, 2), Shots::Finite(10), 1).unwrap();
        // 2 basis inputs plus 4 superpositions, 4 single-qubit Pauli settings each
        assert!(matches!(seq.provenance, Provenance::Sequential { n_settings: 24, .. }));
        let choi = tomographic_snapshot(&kron(&cnot(), &CMatrix::identity(2)), split(1, 2), Shots::Finite(10), 1).unwrap();
        assert!(matches!(choi.provenance, Provenance::Tomographic { n_settings: 16, .. }));
    }

    #[test]
    fn sampled_sequential_snapshot_converges() {
        let mut r = rng::seeded(54);
        let u = rng::haar_unitary(8, &mut r);
        let exact = choi_reduced_exact(&u, split(1, 2)).unwrap();
        let coarse = sequential_snapshot(&u, split(1, 2), Shots::Finite(100), 4).unwrap();
        let fine = sequential_snapshot(&u, split(1, 2), Shots::Finite(1_000_000), 4).unwrap();
        let e_coarse = (&coarse.rho - &exact.rho).frobenius_norm();
        let e_fine = (&fine.rho - &exact.rho).frobenius_norm();
        assert!(e_fine < e_coarse / 10.0, "{e_coarse} {e_fine}");
        assert!(e_fine < 5.0 * fine.error_estimate);
    }
}
