use serde::{Deserialize, Serialize};

use super::ExtractedFactors;
use crate::error::{Error, Result};
use crate::linalg::{fix_phase, inner, kron_vec, CMatrix, C64, ZERO};
use crate::statevector::{bell_state, measure_projector, Block, StateVector, A_OUT, A_REF, B_OUT, NULL_BRANCH_TOL};

/// Outcome `k` of the distillation measurement.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub k: usize,
    /// `s_k² ‖B_k|ψ⟩‖²`.
    pub probability: f64,
    /// `B_k|ψ⟩/‖B_k|ψ⟩‖` with its largest entry real positive; `None` when the
    /// branch has (numerically) zero probability.
    pub state: Option<Vec<C64>>,
    /// Expected number of repetitions `1/p` to post-select this branch.
    pub post_selection_cost: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistillationResult {
    pub branches: Vec<Branch>,
    /// Probability of landing outside every retained projector.
    pub residual_prob: f64,
}

/// Projectors `P_k = vec(A_k) vec(A_k)†` on `(A_ref, A_out)`.
pub fn distillation_projectors(factors: &ExtractedFactors) -> Result<Vec<CMatrix>> {
    let vecs = factors.a_vectors();
    let mut defect = 0.0f64;
    for (i, v) in vecs.iter().enumerate() {
        for (j, w) in vecs.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((inner(v, w) - want).norm());
        }
    }
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal { deviation: defect });
    }
    Ok(vecs.iter().map(|v| CMatrix::outer(v, v)).collect())
}

/// Prepares `U_{A_out,B}(|Φ⁺⟩_{A_ref A_out} ⊗ |ψ⟩_B)` and measures every `P_k`.
pub fn distill(u: &CMatrix, factors: &ExtractedFactors, psi: &[C64]) -> Result<DistillationResult> {
    let split = factors.split;
    split.check_operator(u)?;
    u.require_unitary(1e-9)?;
    if psi.len() != split.d_b() {
        return Err(Error::Dimension(format!("input state of length {} for d_B = {}", psi.len(), split.d_b())));
    }
    let projectors = distillation_projectors(factors)?;
    let vecs = factors.a_vectors();
    let bell = bell_state(split.n_a())?;
    let layout = vec![Block::new(A_REF, split.n_a()), Block::new(A_OUT, split.n_a()), Block::new(B_OUT, split.n_b())];
    let input = StateVector::new(kron_vec(bell.amplitudes(), psi), layout)?;
    let state = crate::statevector::apply_block_unitary(&input, u, &[A_OUT, B_OUT])?;

    let d_b = split.d_b();
    let mut branches = Vec::with_capacity(projectors.len());
    let mut total = 0.0;
    for (k, (p, v)) in projectors.iter().zip(&vecs).enumerate() {
        let m = measure_projector(&state, p, &[A_REF, A_OUT])?;
        total += m.probability;
        let state = m.post_state.map(|post| {
            // post = vec(A_k) ⊗ b̂, so contracting with vec(A_k)† leaves b̂
            let amps = post.amplitudes();
            let mut b: Vec<C64> = (0..d_b)
                .map(|j| v.iter().enumerate().map(|(i, x)| x.conj() * amps[i * d_b + j]).sum())
                .collect();
            fix_phase(&mut b);
            b
        });
        let post_selection_cost = state.as_ref().map(|_| 1.0 / m.probability);
        branches.push(Branch { k, probability: m.probability, state, post_selection_cost });
    }
    Ok(DistillationResult { branches, residual_prob: (1.0 - total).max(0.0) })
}

/// Unnormalized branch vectors `(⟨vec(A_k)| ⊗ 1) U(|Φ⁺⟩ ⊗ |ψ⟩) = s_k B_k|ψ⟩`
/// taken from the pre-measurement state. Unlike the post-selected states these
/// keep the relative phases fixed by the gauge of each `A_k`, so their inner
/// products give the surrogate coefficients `λ_kl = s_k s_l ⟨ψ|B_l† B_k|ψ⟩`.
pub fn branch_vectors(u: &CMatrix, factors: &ExtractedFactors, psi: &[C64]) -> Result<Vec<Vec<C64>>> {
    let split = factors.split;
    split.check_operator(u)?;
    u.require_unitary(1e-9)?;
    if psi.len() != split.d_b() {
        return Err(Error::Dimension(format!("input state of length {} for d_B = {}", psi.len(), split.d_b())));
    }
    let bell = bell_state(split.n_a())?;
    let layout = vec![Block::new(A_REF, split.n_a()), Block::new(A_OUT, split.n_a()), Block::new(B_OUT, split.n_b())];
    let input = StateVector::new(kron_vec(bell.amplitudes(), psi), layout)?;
    let state = crate::statevector::apply_block_unitary(&input, u, &[A_OUT, B_OUT])?;
    let amps = state.amplitudes();
    let d_b = split.d_b();
    Ok(factors
        .a_vectors()
        .iter()
        .map(|v| (0..d_b).map(|j| v.iter().enumerate().map(|(i, x)| x.conj() * amps[i * d_b + j]).sum()).collect())
        .collect())
}

/// `B_k` recovered from distillation runs, with the columns whose basis input
/// gave a null branch set to zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BReconstruction {
    pub b: CMatrix,
    pub flagged_columns: Vec<usize>,
}

fn basis(d: usize, entries: &[(usize, C64)]) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    for &(i, c) in entries {
        v[i] = c;
    }
    v
}

/// Reconstructs `B_k` up to a global phase.
///
/// Basis inputs `|j⟩` give each column's direction and norm `√p_j/s_k`.
/// Relative phases against a reference column `r` come from the input
/// `(|r⟩+|j⟩)/√2`, whose distilled state is fitted as `a φ_r + b φ_j`. When
/// `φ_r` and `φ_j` are parallel the fit is singular and the phase is read off
/// the probabilities of `(|r⟩+|j⟩)/√2` and `(|r⟩+i|j⟩)/√2` instead.
pub fn reconstruct_b(u: &CMatrix, factors: &ExtractedFactors, k: usize) -> Result<BReconstruction> {
    if k >= factors.rank() {
        return Err(Error::InvalidArgument(format!("factor {k} out of range (rank {})", factors.rank())));
    }
    let d_b = factors.split.d_b();
    let s = factors.s[k];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let run = |psi: Vec<C64>| -> Result<Branch> { Ok(distill(u, factors, &psi)?.branches.swap_remove(k)) };

    let mut dirs: Vec<Option<Vec<C64>>> = Vec::with_capacity(d_b);
    let mut norms = Vec::with_capacity(d_b);
    let mut flagged_columns = Vec::new();
    for j in 0..d_b {
        let br = run(basis(d_b, &[(j, one)]))?;
        if br.probability < NULL_BRANCH_TOL || br.state.is_none() {
            flagged_columns.push(j);
            dirs.push(None);
            norms.push(0.0);
        } else {
            norms.push(br.probability.sqrt() / s);
            dirs.push(br.state);
        }
    }
    let mut b = CMatrix::zeros(d_b, d_b);
    let Some(r) = dirs.iter().position(Option::is_some) else {
        return Ok(BReconstruction { b, flagged_columns });
    };
    let phi_r = dirs[r].clone().expect("reference column");
    let mut phases = vec![one; d_b];
    for j in 0..d_b {
        let Some(phi_j) = &dirs[j] else { continue };
        if j == r {
            continue;
        }
        let overlap = inner(&phi_r, phi_j);
        if overlap.norm() < 1.0 - 1e-9 {
            let chi = run(basis(d_b, &[(r, C64::new(h, 0.0)), (j, C64::new(h, 0.0))]))?
                .state
                .ok_or_else(|| Error::Numerical("superposition input gave a null branch".into()))?;
            // normal equations for χ = a φ_r + b φ_j
            let (g, c_r, c_j) = (overlap, inner(&phi_r, &chi), inner(phi_j, &chi));
            let det = 1.0 - g.norm_sqr();
            let a = (c_r - g * c_j) / det;
            let bb = (c_j - g.conj() * c_r) / det;
            let ratio = bb / a;
            phases[j] = ratio / ratio.norm();
        } else {
            let (nr, nj) = (norms[r], norms[j]);
            let p_plus = run(basis(d_b, &[(r, C64::new(h, 0.0)), (j, C64::new(h, 0.0))]))?.probability;
            let p_imag = run(basis(d_b, &[(r, C64::new(h, 0.0)), (j, C64::new(0.0, h))]))?.probability;
            let base = nr * nr + nj * nj;
            let re = (2.0 * p_plus / (s * s) - base) / 2.0;
            let im = -(2.0 * p_imag / (s * s) - base) / 2.0;
            let cross = C64::new(re, im) / (overlap * nr * nj);
            phases[j] = cross / cross.norm();
        }
    }
    for j in 0..d_b {
        if let Some(phi) = &dirs[j] {
            let col: Vec<C64> = phi.iter().map(|z| z * phases[j] * norms[j]).collect();
            b.set_column(j, &col);
        }
    }
    let mut reference = b.column(r);
    let phase = fix_phase(&mut reference);
    Ok(BReconstruction { b: b.scale(phase), flagged_columns })
}

pub fn reconstruct_all_b(u: &CMatrix, factors: &ExtractedFactors) -> Result<Vec<BReconstruction>> {
    (0..factors.rank()).map(|k| reconstruct_b(u, factors, k)).collect()
}

/// Fixes the per-factor phase that distillation cannot observe by making each
/// overlap `Tr[(A_k ⊗ B_k)† U]` real positive. Needs `U`, so it is an oracle
/// step used for comparisons only.
pub fn align_b_phases(u: &CMatrix, factors: &ExtractedFactors, b_ops: &[CMatrix]) -> Vec<CMatrix> {
    factors
        .a_ops
        .iter()
        .zip(b_ops)
        .map(|(a, b)| {
            let c = crate::linalg::kron(a, b).hs_inner(u);
            if c.norm() == 0.0 {
                b.clone()
            } else {
                b.scale(c / c.norm())
            }
        })
        .collect()
}
