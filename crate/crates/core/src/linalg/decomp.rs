//! Jacobi-based Hermitian eigendecomposition and singular value decomposition.

use std::ops::Range;

use super::matrix::{inner, norm, CMatrix, C64, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalue gap below which neighbouring eigenpairs are reported as one cluster.
pub const DEFAULT_CLUSTER_GAP: f64 = 1e-8;

/// Result of [`hermitian_eig`]: eigenvalues in descending order and the matching
/// orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    /// Index ranges of (near-)degenerate eigenvalues. Every index belongs to
    /// exactly one range; singletons are non-degenerate.
    pub clusters: Vec<Range<usize>>,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    pub fn is_degenerate(&self, k: usize) -> bool {
        self.clusters.iter().any(|r| r.contains(&k) && r.len() > 1)
    }

    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.vectors.rows();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let v = self.vector(k);
            for i in 0..n {
                let vi = v[i] * lambda;
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }
}

/// Groups indices of a descending sequence whose consecutive gaps are below `gap`.
pub fn cluster_ranges(values: &[f64], gap: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i - 1] - values[i]).abs() >= gap {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// 2x2 complex Jacobi rotation that annihilates the off-diagonal entry `b` of
/// the Hermitian block `[[a, b], [b*, d]]`. Returns `(c, s, e^{-iφ})` so that
/// `G = [[c, s], [-s e^{-iφ}, c e^{-iφ}]]`.
fn jacobi_rotation(a: f64, d: f64, b: C64) -> (f64, f64, C64) {
    let r = b.norm();
    let phase = (b / r).conj();
    let tau = (d - a) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c, phase)
}

/// Right-multiplies columns `p, q` of `m` by the rotation `G`.
fn rotate_columns(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    for r in 0..m.rows() {
        let x = m[(r, p)];
        let y = m[(r, q)];
        m[(r, p)] = x * c - y * phase * s;
        m[(r, q)] = x * s + y * phase * c;
    }
}

/// Left-multiplies rows `p, q` of `m` by `G†`.
fn rotate_rows_adjoint(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let pc = phase.conj();
    for r in 0..m.cols() {
        let x = m[(p, r)];
        let y = m[(q, r)];
        m[(p, r)] = x * c - y * pc * s;
        m[(q, r)] = x * s + y * pc * c;
    }
}

/// Rotates `v` by a global phase so that its largest-magnitude entry is real
/// positive. Ties within a relative 1e-9 go to the lowest index.
pub fn fix_phase(v: &mut [C64]) -> C64 {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return C64::new(1.0, 0.0);
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap_or(0);
    let phase = (v[pivot] / v[pivot].norm()).conj();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot] = C64::new(v[pivot].re, 0.0);
    phase
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Eigenvalues are sorted descending (stable, so ties keep Jacobi index order);
/// each eigenvector is phase-fixed with [`fix_phase`].
pub fn hermitian_eig(h: &CMatrix) -> Result<EigenDecomposition> {
    hermitian_eig_with_gap(h, DEFAULT_CLUSTER_GAP)
}

pub fn hermitian_eig_with_gap(h: &CMatrix, cluster_gap: f64) -> Result<EigenDecomposition> {
    let n = h.require_square()?;
    let scale = h.frobenius_norm();
    let deviation = h.hermiticity_defect();
    if deviation > 1e-10 * scale.max(f64::MIN_POSITIVE) && deviation > 1e-300 {
        return Err(Error::NotHermitian { deviation });
    }
    let mut a = h.hermitian_part();
    let mut v = CMatrix::identity(n);
    let floor = f64::EPSILON * 1e-2 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let r = b.norm();
                if r <= floor {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Negligible relative to both diagonal entries: rotation would be a no-op.
                if r <= f64::EPSILON * 1e-3 * (app.abs().min(aqq.abs())) {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(app, aqq, b);
                rotate_columns(&mut a, p, q, c, s, phase);
                rotate_rows_adjoint(&mut a, p, q, c, s, phase);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                rotate_columns(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i);
        fix_phase(&mut col);
        vectors.set_column(k, &col);
    }
    let clusters = cluster_ranges(&values, cluster_gap);
    Ok(EigenDecomposition { values, vectors, clusters })
}

/// Thin singular value decomposition `M = U Σ V†` with `k = min(rows, cols)`
/// singular values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v_adjoint: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let us = CMatrix::from_fn(self.u.rows(), self.u.cols(), |i, j| self.u[(i, j)] * self.sigma[j]);
        us.matmul(&self.v_adjoint)
    }

    /// Left singular vector `k`.
    pub fn left(&self, k: usize) -> Vec<C64> {
        self.u.column(k)
    }

    /// Right singular vector `k` (a column of `V`).
    pub fn right(&self, k: usize) -> Vec<C64> {
        self.v_adjoint.row(k).iter().map(|z| z.conj()).collect()
    }
}

/// One-sided (Hestenes) Jacobi SVD. Orthogonalizing the columns directly keeps
/// small singular values accurate to working precision relative to `‖M‖`,
/// which the rank decisions downstream rely on.
pub fn svd(m: &CMatrix) -> Svd {
    if m.rows() < m.cols() {
        let t = one_sided_jacobi(&m.adjoint());
        return Svd { u: t.v_adjoint.adjoint(), sigma: t.sigma, v_adjoint: t.u.adjoint() };
    }
    one_sided_jacobi(m)
}

fn one_sided_jacobi(m: &CMatrix) -> Svd {
    let (rows, cols) = (m.rows(), m.cols());
    let mut w = m.clone();
    let mut v = CMatrix::identity(cols);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = ZERO;
                for r in 0..rows {
                    let x = w[(r, p)];
                    let y = w[(r, q)];
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(alpha, beta, gamma);
                rotate_columns(&mut w, p, q, c, s, phase);
                rotate_columns(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..cols).map(|j| norm(&w.column(j))).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let tiny = sigma.first().copied().unwrap_or(0.0) * 1e-14 + f64::MIN_POSITIVE;

    let mut u_cols: Vec<Vec<C64>> = Vec::with_capacity(cols);
    let mut deficient = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if sigma[k] > tiny {
            u_cols.push(w.column(i).iter().map(|z| z / sigma[k]).collect());
        } else {
            u_cols.push(vec![ZERO; rows]);
            deficient.push(k);
        }
    }
    complete_orthonormal(&mut u_cols, &deficient);

    let u = CMatrix::from_columns(&u_cols).expect("equal column lengths");
    let v_sorted = CMatrix::from_fn(cols, cols, |i, k| v[(i, order[k])]);
    Svd { u, sigma, v_adjoint: v_sorted.adjoint() }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to all others,
/// drawn from the standard basis by Gram-Schmidt.
pub(crate) fn complete_orthonormal(columns: &mut [Vec<C64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let dim = columns[0].len();
    let mut candidate = 0;
    for &k in missing {
        while candidate < dim {
            let mut e = vec![ZERO; dim];
            e[candidate] = C64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for (j, col) in columns.iter().enumerate() {
                    if j == k || norm(col) == 0.0 {
                        continue;
                    }
                    let proj = inner(col, &e);
                    for (x, c) in e.iter_mut().zip(col) {
                        *x -= proj * c;
                    }
                }
            }
            let n = norm(&e);
            if n > 1e-6 {
                columns[k] = e.iter().map(|z| z / n).collect();
                break;
            }
        }
    }
}

/// Eigenphases `θ ∈ (-π, π]` of a unitary, ascending.
///
/// A unitary is normal, so any Hermitian combination `cos γ·Re U + sin γ·Im U`
/// shares its eigenvectors. Eigenvalues that collide under one combination are
/// separated by re-diagonalizing the compressed block with another angle.
pub fn unitary_eigenphases(u: &CMatrix) -> Result<Vec<f64>> {
    u.require_unitary(1e-8)?;
    let n = u.rows();
    let basis = CMatrix::identity(n);
    let mut phases = Vec::with_capacity(n);
    resolve_phases(u, &basis, 0, &mut phases)?;
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(phases)
}

const PHASE_ANGLES: [f64; 4] = [0.6180339887498949, 2.1, -1.3, 0.2718281828];

fn resolve_phases(u: &CMatrix, basis: &CMatrix, depth: usize, out: &mut Vec<f64>) -> Result<()> {
    // Compress U onto the subspace spanned by `basis` columns.
    let block = basis.adjoint().matmul(&u.matmul(basis));
    let k = block.rows();
    if k == 1 {
        out.push(block[(0, 0)].arg());
        return Ok(());
    }
    let gamma = PHASE_ANGLES[depth % PHASE_ANGLES.len()];
    let (cg, sg) = (gamma.cos(), gamma.sin());
    let herm = CMatrix::from_fn(k, k, |i, j| {
        let re = (block[(i, j)] + block[(j, i)].conj()) * 0.5;
        let im = (block[(i, j)] - block[(j, i)].conj()) * C64::new(0.0, -0.5);
        re * cg + im * sg
    });
    let eig = hermitian_eig_with_gap(&herm, 1e-7)?;
    for range in &eig.clusters {
        let sub = CMatrix::from_fn(k, range.len(), |i, j| eig.vectors[(i, range.start + j)]);
        let lifted = basis.matmul(&sub);
        if range.len() == 1 || depth + 1 >= 3 * PHASE_ANGLES.len() {
            for j in 0..range.len() {
                let v = lifted.column(j);
                let uv = u.mat_vec(&v);
                out.push(inner(&v, &uv).arg());
            }
        } else {
            // Either a true degeneracy of U or an accidental collision.
            let sub_block = lifted.adjoint().matmul(&u.matmul(&lifted));
            let mean = sub_block.trace() / range.len() as f64;
            let spread = (&sub_block - &CMatrix::identity(range.len()).scale(mean)).frobenius_norm();
            if spread < 1e-9 {
                for _ in 0..range.len() {
                    out.push(mean.arg());
                }
            } else {
                resolve_phases(u, &lifted, depth + 1, out)?;
            }
        }
    }
    Ok(())
}
