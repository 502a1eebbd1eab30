use serde::{Deserialize, Serialize};

use super::{ChoiReducedState, Provenance, EXACT_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, hermitian_eig_with_gap, inner, kron_vec, nearest_density_matrix, svd, CMatrix, C64};
use crate::rng;
use crate::statevector::{bell_state, measure_projector, Block, StateVector, A_OUT, A_REF, B_OUT};

/// Constant of the second-order term in the perturbation bounds.
pub const ERROR_BOUND_C: f64 = 10.0;

/// Comparison of the normalized distillation post-states for factor `k`.
///
/// `rhs` is the compact bound, derived for a diagonal drift matrix.
/// `rhs_general` keeps the first-order cross terms: with branch vectors
/// `χ_l = s_l B_l|ψ⟩` and `g = Σ_l ε_kl χ_l/‖χ_k‖` it is
/// `‖ε_k^A‖/√d_A + ‖g − Re⟨χ̂_k|g⟩ χ̂_k‖ + C ε²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BSideCheck {
    pub k: usize,
    /// `‖v_k^T ⊗ b̂_k^T − v_k ⊗ b̂_k‖`.
    pub lhs: f64,
    /// `(1 + 1/√2) ‖ε_k^A‖/√d_A + C ε²`.
    pub rhs: f64,
    pub holds: bool,
    pub rhs_general: f64,
    pub holds_general: bool,
}

/// How far a noisy snapshot is from the exact one, and whether the
/// first-order perturbation bounds hold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖ρ − ρ^T‖_F`.
    pub eps_t: f64,
    /// `|λ_k − λ_k^T|` over the whole spectrum.
    pub eps_s: Vec<f64>,
    /// `(Σ_k eps_s_k²)^{1/2}`.
    pub eps_d: f64,
    /// `√d_A ‖v_k − v_k^T‖` for every factor of the exact snapshot.
    pub eps_a: Vec<f64>,
    /// `‖V − V^T‖_F` after aligning the exact eigenbasis.
    pub eps_v: f64,
    /// `ε_jk = ⟨v_j^T | v_k − v_k^T⟩` over the exact factors.
    pub drift: CMatrix,
    /// `3ε + C ε²` with `ε = max(eps_d, eps_v)`.
    pub t_bound: f64,
    pub t_bound_holds: bool,
    pub rank_exact: usize,
    pub rank_noisy: usize,
    /// Factors kept in one snapshot with no partner in the other.
    pub unmatched: usize,
    pub b_side: Option<Vec<BSideCheck>>,
}

impl ErrorReport {
    pub fn all_bounds_hold(&self) -> bool {
        self.t_bound_holds && self.b_side.as_ref().map_or(true, |c| c.iter().all(|x| x.holds))
    }
}

/// Unitary polar factor of a square matrix.
fn polar_unitary(m: &CMatrix) -> CMatrix {
    let d = svd(m);
    d.u.matmul(&d.v_adjoint)
}

/// `|Ψ⟩ = U_{A_out,B}(|Φ⁺⟩ ⊗ |ψ⟩)` on `(A_ref, A_out, B_out)`.
fn distillation_state(u: &CMatrix, split: crate::linalg::BipartiteSplit, psi: &[C64]) -> Result<StateVector> {
    split.check_operator(u)?;
    if psi.len() != split.d_b() {
        return Err(Error::Dimension(format!("input state of length {} for d_B = {}", psi.len(), split.d_b())));
    }
    let bell = bell_state(split.n_a())?;
    let layout = vec![Block::new(A_REF, split.n_a()), Block::new(A_OUT, split.n_a()), Block::new(B_OUT, split.n_b())];
    let input = StateVector::new(kron_vec(bell.amplitudes(), psi), layout)?;
    crate::statevector::apply_block_unitary(&input, u, &[A_OUT, B_OUT])
}

/// Normalized `P|Ψ⟩` for `P = v v†`.
fn post_states(state: &StateVector, vecs: &[Vec<C64>]) -> Result<Vec<Option<Vec<C64>>>> {
    vecs.iter()
        .map(|v| Ok(measure_projector(state, &CMatrix::outer(v, v), &[A_REF, A_OUT])?.post_state.map(|s| s.into_amplitudes())))
        .collect()
}

/// `(v† ⊗ 𝟙)|Ψ⟩`.
fn contract(state: &StateVector, v: &[C64]) -> Vec<C64> {
    let amps = state.amplitudes();
    let d_b = amps.len() / v.len();
    (0..d_b).map(|b| v.iter().enumerate().map(|(a, va)| va.conj() * amps[a * d_b + b]).sum()).collect()
}

/// First-order distance between the normalized B parts, cross terms included.
fn b_cross_term(k: usize, w: &[C64], exact: &[Vec<C64>], chi: &[Vec<C64>]) -> f64 {
    let norm_k = crate::linalg::norm(&chi[k]);
    let hat: Vec<C64> = chi[k].iter().map(|z| z / norm_k).collect();
    let mut g = vec![C64::new(0.0, 0.0); hat.len()];
    for (l, (v, c)) in exact.iter().zip(chi).enumerate() {
        let eps = inner(w, v) - if l == k { 1.0 } else { 0.0 };
        g.iter_mut().zip(c).for_each(|(gi, ci)| *gi += eps * ci / norm_k);
    }
    let along = inner(&hat, &g).re;
    g.iter().zip(&hat).map(|(gi, hi)| (gi - hi * along).norm_sqr()).sum::<f64>().sqrt()
}

/// Compares a noisy snapshot against the exact one.
///
/// Eigenvectors are matched by position. Inside each degenerate cluster of the
/// exact spectrum the exact basis is rotated onto the noisy one by the
/// orthogonal Procrustes solution `W_c Q`, `Q = polar(W_c† V_c)`, so that an
/// arbitrary basis choice within a cluster does not count as error.
///
/// With `b_side = Some((u, ψ))` the distillation post-states for `ψ` are
/// compared as well.
pub fn error_report(
    exact: &ChoiReducedState,
    noisy: &ChoiReducedState,
    b_side: Option<(&CMatrix, &[C64])>,
) -> Result<ErrorReport> {
    if exact.split != noisy.split {
        return Err(Error::Dimension("snapshots of different splits".into()));
    }
    let d_a = exact.split.d_a();
    let dim = d_a * d_a;
    let eig_t = hermitian_eig_with_gap(&exact.rho, exact.cluster_gap())?;
    let eig = hermitian_eig(&noisy.rho)?;

    let eps_t = (&noisy.rho - &exact.rho).frobenius_norm();
    let eps_s: Vec<f64> = eig.values.iter().zip(&eig_t.values).map(|(x, y)| (x - y).abs()).collect();
    let eps_d = eps_s.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut aligned = eig_t.vectors.clone();
    for cluster in &eig_t.clusters {
        let w = CMatrix::from_fn(dim, cluster.len(), |i, j| eig_t.vectors[(i, cluster.start + j)]);
        let v = CMatrix::from_fn(dim, cluster.len(), |i, j| eig.vectors[(i, cluster.start + j)]);
        let rotated = w.matmul(&polar_unitary(&w.adjoint().matmul(&v)));
        for j in 0..cluster.len() {
            aligned.set_column(cluster.start + j, &rotated.column(j));
        }
    }
    let eps_v = (&eig.vectors - &aligned).frobenius_norm();

    let rank_exact = eig_t.values.iter().filter(|&&x| x >= EXACT_THRESHOLD).count();
    let noisy_threshold = noisy.default_threshold();
    let rank_noisy = eig.values.iter().filter(|&&x| x >= noisy_threshold).count();
    let diffs: Vec<Vec<C64>> = (0..rank_exact)
        .map(|k| eig.vector(k).iter().zip(&aligned.column(k)).map(|(x, y)| x - y).collect())
        .collect();
    let eps_a: Vec<f64> = diffs.iter().map(|d| (d_a as f64).sqrt() * crate::linalg::norm(d)).collect();
    let drift = CMatrix::from_fn(rank_exact, rank_exact, |j, k| inner(&aligned.column(j), &diffs[k]));

    let eps = eps_d.max(eps_v);
    let t_bound = 3.0 * eps + ERROR_BOUND_C * eps * eps;

    let b_side = match b_side {
        None => None,
        Some((u, psi)) => {
            let matched = rank_exact.min(rank_noisy);
            let exact_vecs: Vec<_> = (0..matched).map(|k| aligned.column(k)).collect();
            let noisy_vecs: Vec<_> = (0..matched).map(|k| eig.vector(k)).collect();
            let state = distillation_state(u, noisy.split, psi)?;
            let post_t = post_states(&state, &exact_vecs)?;
            let post = post_states(&state, &noisy_vecs)?;
            let all_exact: Vec<_> = (0..rank_exact).map(|k| aligned.column(k)).collect();
            let chi: Vec<Vec<C64>> = all_exact.iter().map(|v| contract(&state, v)).collect();
            let second = ERROR_BOUND_C * eps * eps;
            let checks = (0..matched)
                .filter_map(|k| match (&post_t[k], &post[k]) {
                    (Some(x), Some(y)) => {
                        let lhs = x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                        let first_a = eps_a[k] / (d_a as f64).sqrt();
                        let rhs = (1.0 + std::f64::consts::FRAC_1_SQRT_2) * first_a + second;
                        let rhs_general = first_a + b_cross_term(k, &noisy_vecs[k], &all_exact, &chi) + second;
                        Some(BSideCheck {
                            k,
                            lhs,
                            rhs,
                            holds: lhs <= rhs,
                            rhs_general,
                            holds_general: lhs <= rhs_general,
                        })
                    }
                    _ => None,
                })
                .collect();
            Some(checks)
        }
    };

    Ok(ErrorReport {
        eps_t,
        eps_s,
        eps_d,
        eps_a,
        eps_v,
        drift,
        t_bound,
        t_bound_holds: eps_t <= t_bound,
        rank_exact,
        rank_noisy,
        unmatched: rank_exact.abs_diff(rank_noisy),
        b_side,
    })
}

/// `ρ + δ G` projected back onto density matrices, with `G` a random
/// Hermitian matrix of unit Frobenius norm.
pub fn perturbed_snapshot(snapshot: &ChoiReducedState, delta: f64, seed: u64) -> Result<ChoiReducedState> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("perturbation strength {delta} must be finite and non-negative")));
    }
    let mut r = rng::seeded(seed);
    let g = rng::random_hermitian(snapshot.rho.rows(), &mut r);
    let g = g.scale_real(delta / g.frobenius_norm());
    let rho = nearest_density_matrix(&(&snapshot.rho + &g))?;
    Ok(ChoiReducedState {
        split: snapshot.split,
        rho,
        provenance: Provenance::Perturbed { delta, seed },
        error_estimate: delta,
    })
}
