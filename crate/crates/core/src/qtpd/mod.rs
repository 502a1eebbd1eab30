//! The quantum decomposition pipeline.
//!
//! 1. A snapshot of the Choi marginal `ρ_A(U) = Σ_k s_k² vec(A_k) vec(A_k)†` is
//!    taken, either exactly, by simulated Pauli tomography of the Choi state, or
//!    sequentially from basis-state inputs without the doubled register.
//! 2. [`extract_factors`] diagonalizes the snapshot: eigenvalues are `s_k²`,
//!    eigenvectors unvectorize to `A_k`.
//! 3. [`distill`] measures `P_k = vec(A_k) vec(A_k)†` on `U(|Φ⁺_A⟩ ⊗ |ψ⟩)` to
//!    obtain `B_k|ψ⟩/‖B_k|ψ⟩‖` with probability `s_k² ‖B_k|ψ⟩‖²`.

mod distill;
mod errors;
mod snapshot;

use serde::{Deserialize, Serialize};

pub use distill::{
    align_b_phases, branch_vectors, distill, distillation_projectors, reconstruct_all_b, reconstruct_b, BReconstruction, Branch,
    DistillationResult,
};
pub use errors::{error_report, perturbed_snapshot, BSideCheck, ErrorReport, ERROR_BOUND_C};
pub use snapshot::{choi_reduced_exact, sequential_snapshot, tomographic_snapshot, Shots};

use crate::error::{Error, Result};
use crate::linalg::{
    cluster_ranges, fix_phase, hermitian_eig_with_gap, unvectorize, vectorize, BipartiteSplit, CMatrix, C64,
    DEFAULT_CLUSTER_GAP,
};
use std::ops::Range;

/// Factor applied to the estimated tomography error when choosing the default
/// rank threshold: eigenvalues below `THRESHOLD_MULTIPLIER·ε̂/√d_A` are dropped.
pub const THRESHOLD_MULTIPLIER: f64 = 3.0;

/// Default eigenvalue cut for exact snapshots (keeps `s_k > 1e-6`).
pub const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Tomographic { shots_per_setting: Option<u64>, seed: u64, n_settings: usize },
    Sequential { shots_per_setting: Option<u64>, seed: u64, n_settings: usize },
    Perturbed { delta: f64, seed: u64 },
}

impl Provenance {
    /// Finite shot count, if the snapshot is sampled.
    pub fn shots(&self) -> Option<u64> {
        match self {
            Provenance::Tomographic { shots_per_setting, .. } | Provenance::Sequential { shots_per_setting, .. } => {
                *shots_per_setting
            }
            _ => None,
        }
    }
}

/// Snapshot of the Choi marginal on `(A_ref, A_out)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChoiReducedState {
    pub split: BipartiteSplit,
    pub rho: CMatrix,
    pub provenance: Provenance,
    /// Estimated Frobenius error `‖ρ − ρ^(T)‖` (zero for exact snapshots).
    pub error_estimate: f64,
}

impl ChoiReducedState {
    /// Eigenvalue gap below which eigenpairs are grouped: `1e-8` for exact
    /// snapshots, `3/√shots` for sampled ones.
    pub fn cluster_gap(&self) -> f64 {
        match self.provenance.shots() {
            Some(n) => 3.0 / (n as f64).sqrt(),
            None => match self.provenance {
                Provenance::Perturbed { delta, .. } => DEFAULT_CLUSTER_GAP.max(3.0 * delta),
                _ => DEFAULT_CLUSTER_GAP,
            },
        }
    }

    pub fn default_threshold(&self) -> f64 {
        if self.error_estimate > 0.0 {
            (THRESHOLD_MULTIPLIER * self.error_estimate / (self.split.d_a() as f64).sqrt()).clamp(EXACT_THRESHOLD, 0.5)
        } else {
            EXACT_THRESHOLD
        }
    }
}

/// Classically stored side of the decomposition: `s_k` and `A_k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractedFactors {
    pub split: BipartiteSplit,
    pub s: Vec<f64>,
    pub a_ops: Vec<CMatrix>,
    pub threshold: f64,
    /// Gap on the eigenvalues `s_k²` below which factors form one cluster.
    pub cluster_gap: f64,
    /// Eigenvalues below the threshold.
    pub dropped: Vec<f64>,
}

impl ExtractedFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn clusters(&self) -> Vec<Range<usize>> {
        let squares: Vec<f64> = self.s.iter().map(|x| x * x).collect();
        cluster_ranges(&squares, self.cluster_gap)
    }

    pub fn is_degenerate(&self, k: usize) -> bool {
        self.clusters().iter().any(|r| r.contains(&k) && r.len() > 1)
    }

    pub fn a_vectors(&self) -> Vec<Vec<C64>> {
        self.a_ops.iter().map(|a| vectorize(a).expect("square factor")).collect()
    }

    pub fn cluster_projectors(&self) -> Vec<CMatrix> {
        let vecs = self.a_vectors();
        self.clusters()
            .into_iter()
            .map(|r| crate::linalg::span_projector(&vecs[r]))
            .collect()
    }
}

/// Diagonalizes the snapshot and keeps eigenpairs with eigenvalue `≥ threshold`
/// (default [`ChoiReducedState::default_threshold`]).
pub fn extract_factors(snapshot: &ChoiReducedState, threshold: Option<f64>) -> Result<ExtractedFactors> {
    let threshold = threshold.unwrap_or_else(|| snapshot.default_threshold());
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    let d_a = snapshot.split.d_a();
    let gap = snapshot.cluster_gap();
    let eig = hermitian_eig_with_gap(&snapshot.rho, gap)?;
    let mut s = Vec::new();
    let mut a_ops = Vec::new();
    let mut dropped = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda < threshold {
            dropped.push(lambda);
            continue;
        }
        let mut a = unvectorize(&eig.vector(k), d_a)?;
        let nrm = a.frobenius_norm();
        a = a.scale_real((d_a as f64).sqrt() / nrm);
        fix_phase(a.data_mut());
        s.push(lambda.sqrt());
        a_ops.push(a);
    }
    Ok(ExtractedFactors { split: snapshot.split, s, a_ops, threshold, cluster_gap: gap, dropped })
}

/// How the Choi marginal is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnapshotMode {
    Exact,
    Tomographic { shots: Shots, seed: u64 },
    Sequential { shots: Shots, seed: u64 },
}

/// Snapshot followed by factor extraction.
pub fn run_pipeline(
    u: &CMatrix,
    split: BipartiteSplit,
    mode: SnapshotMode,
    threshold: Option<f64>,
) -> Result<(ChoiReducedState, ExtractedFactors)> {
    let snap = match mode {
        SnapshotMode::Exact => choi_reduced_exact(u, split)?,
        SnapshotMode::Tomographic { shots, seed } => tomographic_snapshot(u, split, shots, seed)?,
        SnapshotMode::Sequential { shots, seed } => sequential_snapshot(u, split, shots, seed)?,
    };
    let factors = extract_factors(&snap, threshold)?;
    Ok((snap, factors))
}
