//! Classical tensor product decomposition and its algebra.
//!
//! A decomposition `U = Σ_k s_k A_k ⊗ B_k` is canonical when the factors are
//! Hilbert-Schmidt orthogonal with `‖A_k‖² = d_A`, `‖B_k‖² = d_B`, the
//! coefficients are real, non-negative and descending, and (gauge) the
//! largest-magnitude entry of every `A_k` is real positive.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cluster_ranges, fix_phase, hermitian_eig, inner, kron, kron_all, norm, permute_subsystems, reshuffle,
    reshuffle_dims, svd, vectorize, BipartiteSplit, CMatrix, C64, DEFAULT_CLUSTER_GAP, ZERO,
};

/// Singular values at or below this are treated as zero for exact inputs.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorProductDecomposition {
    pub split: BipartiteSplit,
    pub s: Vec<f64>,
    pub a_ops: Vec<CMatrix>,
    pub b_ops: Vec<CMatrix>,
    /// Coefficients closer than this are reported as one degenerate cluster.
    pub cluster_gap: f64,
}

impl TensorProductDecomposition {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn clusters(&self) -> Vec<Range<usize>> {
        cluster_ranges(&self.s, self.cluster_gap)
    }

    pub fn is_degenerate(&self, k: usize) -> bool {
        self.clusters().iter().any(|r| r.contains(&k) && r.len() > 1)
    }

    /// `Σ_k s_k²`; one for an untruncated decomposition of a unitary.
    pub fn weight(&self) -> f64 {
        self.s.iter().map(|x| x * x).sum()
    }

    /// Normalized vectorizations `vec(A_k)`.
    pub fn a_vectors(&self) -> Vec<Vec<C64>> {
        self.a_ops.iter().map(|a| vectorize(a).expect("square factor")).collect()
    }

    /// Projector onto `span{vec(A_k)}` for each coefficient cluster. These are
    /// the gauge-invariant content of the A side.
    pub fn cluster_projectors(&self) -> Vec<CMatrix> {
        let vecs = self.a_vectors();
        self.clusters()
            .into_iter()
            .map(|r| crate::linalg::span_projector(&vecs[r]))
            .collect()
    }
}

/// Flattened `A/√d` as a unit vector (row-major).
fn unit_of(a: &CMatrix) -> Vec<C64> {
    let s = 1.0 / (a.rows() as f64).sqrt();
    a.data().iter().map(|z| z * s).collect()
}

/// Inverse of [`unit_of`].
fn op_of(v: &[C64], d: usize) -> CMatrix {
    let s = (d as f64).sqrt();
    CMatrix::from_vec(d, d, v.iter().map(|z| z * s).collect()).expect("d*d entries")
}

/// Makes the largest entry of `a` real positive and moves the conjugate phase into `b`.
pub(crate) fn fix_gauge(a: &mut CMatrix, b: &mut CMatrix) {
    let phase = fix_phase(a.data_mut());
    let back = phase.conj();
    for z in b.data_mut() {
        *z *= back;
    }
}

/// Operator-Schmidt decomposition by SVD of the reshuffled operator.
pub fn classical_tpd(u: &CMatrix, split: BipartiteSplit) -> Result<TensorProductDecomposition> {
    classical_tpd_with_tol(u, split, DEFAULT_RANK_TOL)
}

pub fn classical_tpd_with_tol(u: &CMatrix, split: BipartiteSplit, rank_tol: f64) -> Result<TensorProductDecomposition> {
    let r = reshuffle(u, split)?;
    let dec = svd(&r);
    let (d_a, d_b) = (split.d_a(), split.d_b());
    let mut s = Vec::new();
    let mut a_ops = Vec::new();
    let mut b_ops = Vec::new();
    for (k, &sigma) in dec.sigma.iter().enumerate() {
        if sigma <= rank_tol {
            break;
        }
        let mut a = op_of(&dec.left(k), d_a);
        let right: Vec<C64> = dec.right(k).iter().map(|z| z.conj()).collect();
        let mut b = op_of(&right, d_b);
        fix_gauge(&mut a, &mut b);
        s.push(sigma);
        a_ops.push(a);
        b_ops.push(b);
    }
    Ok(TensorProductDecomposition { split, s, a_ops, b_ops, cluster_gap: DEFAULT_CLUSTER_GAP })
}

pub fn reconstruct(tpd: &TensorProductDecomposition) -> CMatrix {
    let n = tpd.split.dim();
    let mut out = CMatrix::zeros(n, n);
    for ((s, a), b) in tpd.s.iter().zip(&tpd.a_ops).zip(&tpd.b_ops) {
        out += &kron(a, b).scale_real(*s);
    }
    out
}

/// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt, plus
/// the expansion coefficients: `vectors[k] = Σ_i coeffs[k][i] basis[i]`.
fn gram_schmidt(vectors: &[Vec<C64>]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut coeffs = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        let mut c = vec![ZERO; basis.len()];
        for _ in 0..2 {
            for (i, e) in basis.iter().enumerate() {
                let p = inner(e, &w);
                c[i] += p;
                for (x, y) in w.iter_mut().zip(e) {
                    *x -= p * y;
                }
            }
        }
        let n = norm(&w);
        if n > 1e-12 * norm(v).max(1.0) {
            basis.push(w.iter().map(|z| z / n).collect());
            c.push(C64::new(n, 0.0));
        }
        coeffs.push(c);
    }
    (basis, coeffs)
}

/// Brings any sum `Σ_k c_k A_k ⊗ B_k` (complex coefficients, arbitrary factors)
/// into canonical form.
pub fn canonicalize_terms(
    split: BipartiteSplit,
    coeffs: &[C64],
    a: &[CMatrix],
    b: &[CMatrix],
) -> Result<TensorProductDecomposition> {
    if coeffs.len() != a.len() || coeffs.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} A and {} B factors",
            coeffs.len(),
            a.len(),
            b.len()
        )));
    }
    let (d_a, d_b) = (split.d_a(), split.d_b());
    for (x, d) in a.iter().map(|x| (x, d_a)).chain(b.iter().map(|x| (x, d_b))) {
        if x.rows() != d || x.cols() != d {
            return Err(Error::Dimension(format!("factor is {}x{}, expected {d}x{d}", x.rows(), x.cols())));
        }
    }
    let (ea, ca) = gram_schmidt(&a.iter().map(unit_of).collect::<Vec<_>>());
    let (eb, cb) = gram_schmidt(&b.iter().map(unit_of).collect::<Vec<_>>());
    // U = Σ_ij C_ij (√d_A e_i) ⊗ (√d_B f_j) with C = ca · diag(c) · cbᵀ
    let c = CMatrix::from_fn(ea.len(), eb.len(), |i, j| {
        (0..coeffs.len())
            .map(|k| {
                let x = ca[k].get(i).copied().unwrap_or(ZERO);
                let y = cb[k].get(j).copied().unwrap_or(ZERO);
                x * coeffs[k] * y
            })
            .sum()
    });
    let dec = svd(&c);
    let mut s = Vec::new();
    let mut a_ops = Vec::new();
    let mut b_ops = Vec::new();
    for (k, &sigma) in dec.sigma.iter().enumerate() {
        if sigma <= DEFAULT_RANK_TOL {
            break;
        }
        let x = dec.left(k);
        let y = dec.right(k);
        let mut va = vec![ZERO; d_a * d_a];
        for (xi, e) in x.iter().zip(&ea) {
            for (t, z) in va.iter_mut().zip(e) {
                *t += xi * z;
            }
        }
        let mut vb = vec![ZERO; d_b * d_b];
        for (yj, f) in y.iter().zip(&eb) {
            for (t, z) in vb.iter_mut().zip(f) {
                *t += yj.conj() * z;
            }
        }
        let mut am = op_of(&va, d_a);
        let mut bm = op_of(&vb, d_b);
        fix_gauge(&mut am, &mut bm);
        s.push(sigma);
        a_ops.push(am);
        b_ops.push(bm);
    }
    Ok(TensorProductDecomposition { split, s, a_ops, b_ops, cluster_gap: DEFAULT_CLUSTER_GAP })
}

pub fn canonicalize(tpd: &TensorProductDecomposition) -> Result<TensorProductDecomposition> {
    let coeffs: Vec<C64> = tpd.s.iter().map(|&x| C64::new(x, 0.0)).collect();
    let mut out = canonicalize_terms(tpd.split, &coeffs, &tpd.a_ops, &tpd.b_ops)?;
    out.cluster_gap = tpd.cluster_gap;
    Ok(out)
}

fn check_rank(tpd: &TensorProductDecomposition, r: usize) -> Result<()> {
    if r == 0 || r > tpd.rank() {
        return Err(Error::InvalidArgument(format!("truncation rank {r} outside 1..={}", tpd.rank())));
    }
    Ok(())
}

/// Keeps the `r` leading terms. Coefficients are not renormalized.
pub fn low_rank_truncate(tpd: &TensorProductDecomposition, r: usize) -> Result<TensorProductDecomposition> {
    check_rank(tpd, r)?;
    Ok(TensorProductDecomposition {
        split: tpd.split,
        s: tpd.s[..r].to_vec(),
        a_ops: tpd.a_ops[..r].to_vec(),
        b_ops: tpd.b_ops[..r].to_vec(),
        cluster_gap: tpd.cluster_gap,
    })
}

/// `√(Σ_{k>r} s_k²)`, which equals the normalized Frobenius distance
/// `‖U − U_r‖_F / √(d_A d_B)` between the full and truncated operators.
pub fn low_rank_error(tpd: &TensorProductDecomposition, r: usize) -> Result<f64> {
    check_rank(tpd, r)?;
    Ok(tpd.s[r..].iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Unitary polar factor of a square matrix together with its Frobenius distance.
#[derive(Clone, Debug)]
pub struct NearestUnitary {
    pub unitary: CMatrix,
    pub singular_values: Vec<f64>,
    /// `‖M − W‖_F = √Σ(σ_k − 1)²`.
    pub distance: f64,
}

/// Polar factor `U V†` of `m = U Σ V†`. Fails when `σ_min ≤ 1e-10`, where the
/// minimizer is not unique.
pub fn nearest_unitary_full(m: &CMatrix) -> Result<NearestUnitary> {
    m.require_square()?;
    let dec = svd(m);
    let sigma_min = dec.sigma.last().copied().unwrap_or(0.0);
    if sigma_min <= 1e-10 {
        return Err(Error::RankDeficient { sigma_min });
    }
    let distance = dec.sigma.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>().sqrt();
    Ok(NearestUnitary { unitary: dec.u.matmul(&dec.v_adjoint), singular_values: dec.sigma, distance })
}

pub fn nearest_unitary(m: &CMatrix) -> Result<CMatrix> {
    Ok(nearest_unitary_full(m)?.unitary)
}

/// `U = Σ_J s_J A^{(1)}_{j_1} ⊗ … ⊗ A^{(M)}_{j_M}` with per-site orthonormal
/// factors (`⟨A_j|A_k⟩ = δ_jk d_m`) and a complex coefficient tensor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultipartiteTPD {
    pub dims: Vec<usize>,
    pub factors: Vec<Vec<CMatrix>>,
    /// Row-major over `(j_1, …, j_M)` with extents [`Self::ranks`].
    pub coefficients: Vec<C64>,
}

impl MultipartiteTPD {
    pub fn ranks(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    pub fn coefficient(&self, index: &[usize]) -> C64 {
        let ranks = self.ranks();
        let flat = index.iter().zip(&ranks).fold(0, |acc, (&j, &r)| acc * r + j);
        self.coefficients[flat]
    }

    /// `s_{1…1}`, real and non-negative by construction.
    pub fn leading(&self) -> f64 {
        self.coefficients[0].re
    }

    pub fn weight(&self) -> f64 {
        self.coefficients.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multi-indices and values of all coefficients with `|s| > tol`.
    pub fn support(&self, tol: f64) -> Vec<(Vec<usize>, C64)> {
        let ranks = self.ranks();
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > tol)
            .map(|(mut flat, z)| {
                let mut idx = vec![0; ranks.len()];
                for (slot, &r) in idx.iter_mut().zip(&ranks).rev() {
                    *slot = flat % r;
                    flat /= r;
                }
                (idx, *z)
            })
            .collect()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n: usize = self.dims.iter().product();
        let mut out = CMatrix::zeros(n, n);
        for (idx, s) in self.support(0.0) {
            let ops: Vec<CMatrix> = idx.iter().enumerate().map(|(m, &j)| self.factors[m][j].clone()).collect();
            out += &kron_all(&ops).scale(s);
        }
        out
    }
}

/// Dense tensor with a row-major shape.
struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    /// Operator `u` on sites of dimension `dims` as a tensor with one mode of
    /// extent `d_m²` per site, indexed by `i_m·d_m + j_m` for entry `(i, j)`.
    fn from_operator(u: &CMatrix, dims: &[usize]) -> Self {
        let n = u.rows();
        let shape: Vec<usize> = dims.iter().map(|d| d * d).collect();
        let mut data = vec![ZERO; n * n];
        for (flat, slot) in data.iter_mut().enumerate() {
            let mut rem = flat;
            let (mut i, mut j) = (0, 0);
            let mut digits = vec![0; dims.len()];
            for (m, &s) in shape.iter().enumerate().rev() {
                digits[m] = rem % s;
                rem /= s;
            }
            for (m, &d) in dims.iter().enumerate() {
                i = i * d + digits[m] / d;
                j = j * d + digits[m] % d;
            }
            *slot = u[(i, j)];
        }
        Self { shape, data }
    }

    fn strides(&self) -> Vec<usize> {
        let mut st = vec![1; self.shape.len()];
        for m in (0..self.shape.len().saturating_sub(1)).rev() {
            st[m] = st[m + 1] * self.shape[m + 1];
        }
        st
    }

    /// Matrix with rows indexed by mode `mode` and columns by the other modes.
    fn unfold(&self, mode: usize) -> CMatrix {
        let st = self.strides();
        let rows = self.shape[mode];
        let cols = self.data.len() / rows;
        let mut out = CMatrix::zeros(rows, cols);
        for (flat, z) in self.data.iter().enumerate() {
            let r = flat / st[mode] % rows;
            let high = flat / (st[mode] * rows);
            let low = flat % st[mode];
            out[(r, high * st[mode] + low)] = *z;
        }
        out
    }

    /// Replaces mode `mode` by its components along the (unit) `basis` vectors.
    fn contract(&self, mode: usize, basis: &[Vec<C64>]) -> Self {
        let st = self.strides();
        let extent = self.shape[mode];
        let outer = self.data.len() / (st[mode] * extent);
        let inner_len = st[mode];
        let mut shape = self.shape.clone();
        shape[mode] = basis.len();
        let mut data = vec![ZERO; outer * basis.len() * inner_len];
        for o in 0..outer {
            for (k, e) in basis.iter().enumerate() {
                for l in 0..inner_len {
                    let mut acc = ZERO;
                    for (x, ex) in e.iter().enumerate() {
                        acc += ex.conj() * self.data[(o * extent + x) * inner_len + l];
                    }
                    data[(o * basis.len() + k) * inner_len + l] = acc;
                }
            }
        }
        Self { shape, data }
    }

    /// The sub-tensors obtained by fixing the first `count` indices, each
    /// unfolded along mode `count`.
    fn leading_slices(&self, count: usize) -> Vec<CMatrix> {
        let n_slices: usize = self.shape[..count].iter().product();
        let slice_len = self.data.len() / n_slices;
        let rows = self.shape[count];
        (0..n_slices)
            .map(|s| {
                let chunk = &self.data[s * slice_len..(s + 1) * slice_len];
                CMatrix::from_vec(rows, slice_len / rows, chunk.to_vec()).expect("exact chunk")
            })
            .collect()
    }
}

/// Adds the candidates (projected onto `support`) to an orthonormal basis until
/// it spans `support`.
fn extend_basis(basis: &mut Vec<Vec<C64>>, candidates: &[Vec<C64>], support: &[Vec<C64>]) {
    for cand in candidates {
        if basis.len() == support.len() {
            return;
        }
        let mut w = vec![ZERO; cand.len()];
        for e in support {
            let p = inner(e, cand);
            for (x, y) in w.iter_mut().zip(e) {
                *x += p * y;
            }
        }
        for _ in 0..2 {
            for e in basis.iter() {
                let p = inner(e, &w);
                for (x, y) in w.iter_mut().zip(e) {
                    *x -= p * y;
                }
            }
        }
        let n = norm(&w);
        if n > 1e-6 {
            let mut v: Vec<C64> = w.iter().map(|z| z / n).collect();
            fix_phase(&mut v);
            basis.push(v);
        }
    }
}

/// Multipartite decomposition by iterated bipartite splits, sites left to right.
///
/// The basis of site `m` is built from the support of `U` on that site (site
/// `m` versus the rest). For `m > 1` it is seeded with the dominant site-`m`
/// direction of each slice `U_{j_1…j_{m-1}}` (in order of slice weight), which
/// pairs the bases of different sites the way the operator couples them. For
/// the first site a degenerate leading cluster is rotated so its first element
/// is the projection of the identity. The phase of `s_{1…1}` is absorbed into
/// `A^{(1)}_1`.
pub fn multipartite_tpd(u: &CMatrix, dims: &[usize]) -> Result<MultipartiteTPD> {
    let n = u.require_square()?;
    if dims.len() < 2 {
        return Err(Error::InvalidArgument("multipartite decomposition needs at least two sites".into()));
    }
    if dims.iter().any(|&d| d < 1) || dims.iter().product::<usize>() != n {
        return Err(Error::Dimension(format!("site dimensions {dims:?} do not multiply to {n}")));
    }
    let tensor = Tensor::from_operator(u, dims);
    let scale = tensor.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    let mut bases: Vec<Vec<Vec<C64>>> = Vec::with_capacity(dims.len());
    let mut reduced = Tensor { shape: tensor.shape.clone(), data: tensor.data.clone() };
    for m in 0..dims.len() {
        let dec = svd(&tensor.unfold(m));
        let rank = dec.sigma.iter().take_while(|&&s| s > DEFAULT_RANK_TOL * scale).count();
        let support: Vec<Vec<C64>> = (0..rank).map(|k| dec.left(k)).collect();

        let mut candidates = Vec::new();
        if m == 0 {
            let lead = cluster_ranges(&dec.sigma[..rank], DEFAULT_CLUSTER_GAP * scale)
                .into_iter()
                .next()
                .unwrap_or(0..0);
            if lead.len() > 1 {
                let id = unit_of(&CMatrix::identity(dims[0]));
                let cluster: Vec<Vec<C64>> = lead.map(|k| dec.left(k)).collect();
                candidates.push(crate::linalg::span_projector(&cluster).mat_vec(&id));
            }
        } else {
            let mut slices = reduced.leading_slices(m);
            slices.sort_by(|x, y| y.frobenius_norm().partial_cmp(&x.frobenius_norm()).unwrap());
            for slice in slices {
                if slice.frobenius_norm() <= DEFAULT_RANK_TOL * scale {
                    break;
                }
                candidates.push(svd(&slice).left(0));
            }
        }
        candidates.extend(support.iter().cloned());
        let mut basis = Vec::with_capacity(rank);
        extend_basis(&mut basis, &candidates, &support);
        if basis.len() != rank {
            return Err(Error::Numerical(format!("site {m}: built {} of {rank} basis vectors", basis.len())));
        }
        reduced = reduced.contract(m, &basis);
        bases.push(basis);
    }

    let inv = 1.0 / (n as f64).sqrt();
    let mut coefficients: Vec<C64> = reduced.data.iter().map(|z| z * inv).collect();
    let lead = coefficients[0];
    if lead.norm() > 0.0 {
        let phase = lead / lead.norm();
        for z in bases[0][0].iter_mut() {
            *z *= phase;
        }
        let r0 = bases[0].len();
        let block = coefficients.len() / r0;
        for z in coefficients[..block].iter_mut() {
            *z /= phase;
        }
        coefficients[0] = C64::new(coefficients[0].re, 0.0);
    }
    let factors = bases
        .iter()
        .zip(dims)
        .map(|(b, &d)| b.iter().map(|v| op_of(v, d)).collect())
        .collect();
    Ok(MultipartiteTPD { dims: dims.to_vec(), factors, coefficients })
}

/// Product of per-site unitaries approximating `U`, with the error bound.
#[derive(Clone, Debug)]
pub struct FqtApproximation {
    pub unitaries: Vec<CMatrix>,
    pub product: CMatrix,
    /// `1 − s_{1…1}`.
    pub eps_s: f64,
    /// `‖A^{(m)}_1 − U_m‖_F / √(2 d_m)` per site.
    pub eps_sites: Vec<f64>,
    pub bound: f64,
    /// `‖U − ⊗U_m‖_F / √(2d)`.
    pub achieved: f64,
    /// `‖U − ⊗U_m‖_F`.
    pub achieved_raw: f64,
}

pub fn fqt_approximation(u: &CMatrix, dims: &[usize]) -> Result<FqtApproximation> {
    let mtpd = multipartite_tpd(u, dims)?;
    let mut unitaries = Vec::with_capacity(dims.len());
    let mut eps_sites = Vec::with_capacity(dims.len());
    for (f, &d) in mtpd.factors.iter().zip(dims) {
        let nu = nearest_unitary_full(&f[0])?;
        eps_sites.push(nu.distance / (2.0 * d as f64).sqrt());
        unitaries.push(nu.unitary);
    }
    let product = kron_all(&unitaries);
    let eps_s = 1.0 - mtpd.leading();
    let bound = eps_s.max(0.0).sqrt() + (0.5 * eps_s * eps_s + eps_sites.iter().map(|e| e * e).sum::<f64>()).sqrt();
    let achieved_raw = (u - &product).frobenius_norm();
    let achieved = achieved_raw / (2.0 * u.rows() as f64).sqrt();
    if achieved > bound + 1e-9 {
        return Err(Error::Numerical(format!("approximation error {achieved} exceeds its bound {bound}")));
    }
    Ok(FqtApproximation { unitaries, product, eps_s, eps_sites, bound, achieved, achieved_raw })
}

/// Site-`m` versus rest reshuffle, used to cross-check multipartite bases.
pub fn site_reshuffle(u: &CMatrix, dims: &[usize], site: usize) -> Result<CMatrix> {
    if site >= dims.len() {
        return Err(Error::InvalidArgument(format!("site {site} out of range")));
    }
    let mut order = vec![site];
    order.extend((0..dims.len()).filter(|&m| m != site));
    let p = permute_subsystems(u, dims, &order)?;
    let d = dims[site];
    reshuffle_dims(&p, d, u.rows() / d)
}

/// Largest deviation from `⟨A_j|A_k⟩ = δ_jk d` over a factor list.
pub fn orthonormality_defect(ops: &[CMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, x) in ops.iter().enumerate() {
        let d = x.rows() as f64;
        for (k, y) in ops.iter().enumerate() {
            let want = if j == k { d } else { 0.0 };
            worst = worst.max((x.hs_inner(y) - want).norm());
        }
    }
    worst
}

/// Eigenvalues of `Σ_k s_k² vec(A_k) vec(A_k)†`, a consistency check of a
/// decomposition against its Choi marginal.
pub fn marginal_spectrum(tpd: &TensorProductDecomposition) -> Result<Vec<f64>> {
    let vecs = tpd.a_vectors();
    let d = tpd.split.d_a() * tpd.split.d_a();
    let mut rho = CMatrix::zeros(d, d);
    for (v, s) in vecs.iter().zip(&tpd.s) {
        rho += &CMatrix::outer(v, v).scale_real(s * s);
    }
    Ok(hermitian_eig(&rho)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gates::*;
    use crate::rng;
    use crate::statevector::exact_evolution;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn split(a: usize, b: usize) -> BipartiteSplit {
        BipartiteSplit::new(a, b).unwrap()
    }

    fn assert_canonical(t: &TensorProductDecomposition) {
        assert!(orthonormality_defect(&t.a_ops) < 1e-8);
        assert!(orthonormality_defect(&t.b_ops) < 1e-8);
        assert!(t.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(t.s.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn product_operator_has_rank_one() {
        let mut r = rng::seeded(20);
        let a = rng::haar_unitary(2, &mut r);
        let b = rng::haar_unitary(4, &mut r);
        let t = classical_tpd(&kron(&a, &b), split(1, 2)).unwrap();
        assert_eq!(t.rank(), 1);
        assert!((t.s[0] - 1.0).abs() < 1e-12);
        assert_canonical(&t);
    }

    #[test]
    fn swap_has_flat_spectrum_over_the_paulis() {
        let t = classical_tpd(&swap(), split(1, 1)).unwrap();
        assert_eq!(t.rank(), 4);
        assert!(t.s.iter().all(|x| (x - 0.5).abs() < 1e-14));
        assert_eq!(t.clusters(), vec![0..4]);
        assert!(reconstruct(&t).max_abs_diff(&swap()) < 1e-14);
        assert_canonical(&t);
        // SWAP = ½ Σ_P P ⊗ P, so the factor pairs must sum to Σ_P P ⊗ P.
        let paulis = paulis();
        let mut want = CMatrix::zeros(4, 4);
        for p in &paulis {
            want += &kron(p, p);
        }
        let mut got = CMatrix::zeros(4, 4);
        for (a, b) in t.a_ops.iter().zip(&t.b_ops) {
            got += &kron(a, b);
        }
        assert!(got.max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn cnot_factors_are_the_control_projectors() {
        let t = classical_tpd(&cnot(), split(1, 1)).unwrap();
        assert_eq!(t.rank(), 2);
        for s in &t.s {
            assert!((s - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        let s2 = 2f64.sqrt();
        let p0 = vectorize(&CMatrix::diag_real(&[s2, 0.0])).unwrap();
        let p1 = vectorize(&CMatrix::diag_real(&[0.0, s2])).unwrap();
        let want = crate::linalg::span_projector(&[p0, p1]);
        assert!(t.cluster_projectors()[0].max_abs_diff(&want) < 1e-14);
        assert_canonical(&t);
    }

    #[test]
    fn rejects_mismatched_dimension() {
        assert!(classical_tpd(&CMatrix::identity(4), split(1, 2)).is_err());
    }

    #[test]
    fn classical_tpd_accepts_non_unitary_operators() {
        let mut r = rng::seeded(21);
        let m = rng::random_matrix(8, 8, &mut r);
        let t = classical_tpd(&m, split(1, 2)).unwrap();
        assert!((&reconstruct(&t) - &m).frobenius_norm() <= 1e-8 * m.frobenius_norm());
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let mut r = rng::seeded(22);
        for (sp, u) in [(split(1, 2), rng::haar_unitary(8, &mut r)), (split(1, 1), swap()), (split(1, 1), cnot())] {
            let t = classical_tpd(&u, sp).unwrap();
            let c = canonicalize(&t).unwrap();
            assert_eq!(c.rank(), t.rank());
            for k in 0..t.rank() {
                assert!((c.s[k] - t.s[k]).abs() < 1e-12);
                assert!(c.a_ops[k].max_abs_diff(&t.a_ops[k]) < 1e-12);
                assert!(c.b_ops[k].max_abs_diff(&t.b_ops[k]) < 1e-12);
            }
        }
    }

    #[test]
    fn canonicalize_absorbs_phase_into_b() {
        let mut r = rng::seeded(23);
        let a = rng::haar_unitary(2, &mut r);
        let b = rng::haar_unitary(2, &mut r);
        let phase = C64::from_polar(0.8, 1.1);
        let t = canonicalize_terms(split(1, 1), &[phase], &[a.clone()], &[b.clone()]).unwrap();
        assert_eq!(t.rank(), 1);
        assert!((t.s[0] - 0.8).abs() < 1e-14);
        let want = kron(&a, &b).scale(phase);
        assert!(reconstruct(&t).max_abs_diff(&want) < 1e-14);
        let a1 = &t.a_ops[0];
        let pivot = a1.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(a1.data().iter().any(|z| (z.re - pivot).abs() < 1e-14 && z.im == 0.0));
    }

    #[test]
    fn canonicalize_restores_descending_order() {
        let u = exact_evolution(&kron(&pauli_x(), &pauli_x()), 0.3).unwrap();
        let t = classical_tpd(&u, split(1, 1)).unwrap();
        let mut rev = t.clone();
        rev.s.reverse();
        rev.a_ops.reverse();
        rev.b_ops.reverse();
        let c = canonicalize(&rev).unwrap();
        assert!((c.s[0] - t.s[0]).abs() < 1e-14 && (c.s[1] - t.s[1]).abs() < 1e-14);
        assert!(c.s[0] > c.s[1]);
        assert!(reconstruct(&c).max_abs_diff(&u) < 1e-14);
    }

    #[test]
    fn canonicalize_merges_redundant_terms() {
        let mut r = rng::seeded(24);
        let u = rng::haar_unitary(8, &mut r);
        let t = classical_tpd(&u, split(1, 2)).unwrap();
        let mut coeffs: Vec<C64> = t.s.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut a = t.a_ops.clone();
        let mut b = t.b_ops.clone();
        // add and subtract a non-orthogonal combination
        let w = C64::new(0.3, -0.2);
        let a_mix = &t.a_ops[0] + &t.a_ops[1];
        for (c, x, y) in [(w, a_mix, t.b_ops[2].clone()), (-w, t.a_ops[0].clone(), t.b_ops[2].clone()), (-w, t.a_ops[1].clone(), t.b_ops[2].clone())] {
            coeffs.push(c);
            a.push(x);
            b.push(y);
        }
        let c = canonicalize_terms(t.split, &coeffs, &a, &b).unwrap();
        assert_eq!(c.rank(), t.rank());
        for (x, y) in c.s.iter().zip(&t.s) {
            assert!((x - y).abs() < 1e-10);
        }
        for (p, q) in c.cluster_projectors().iter().zip(t.cluster_projectors()) {
            assert!((p - &q).frobenius_norm() < 1e-6);
        }
        assert!((&reconstruct(&c) - &u).frobenius_norm() < 1e-10);
    }

    #[test]
    fn low_rank_errors() {
        let t = classical_tpd(&cnot(), split(1, 1)).unwrap();
        assert_eq!(low_rank_error(&t, 2).unwrap(), 0.0);
        let e = low_rank_error(&t, 1).unwrap();
        assert!((e - FRAC_1_SQRT_2).abs() < 1e-15);
        let diff = &reconstruct(&t) - &reconstruct(&low_rank_truncate(&t, 1).unwrap());
        assert!((diff.normalized_frobenius_norm() - e).abs() < 1e-12);

        let t = classical_tpd(&swap(), split(1, 1)).unwrap();
        assert!((low_rank_error(&t, 2).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        let tr = low_rank_truncate(&t, 2).unwrap();
        assert!((tr.weight() - 0.5).abs() < 1e-14);

        assert!(low_rank_error(&t, 0).is_err());
        assert!(low_rank_truncate(&t, 5).is_err());
    }

    #[test]
    fn truncation_error_matches_operator_distance() {
        let mut r = rng::seeded(25);
        let u = rng::haar_unitary(16, &mut r);
        let sp = split(2, 2);
        let t = classical_tpd(&u, sp).unwrap();
        for k in 1..=t.rank() {
            let diff = &reconstruct(&t) - &reconstruct(&low_rank_truncate(&t, k).unwrap());
            let dist = diff.frobenius_norm() / (sp.dim() as f64).sqrt();
            assert!((dist - low_rank_error(&t, k).unwrap()).abs() < 1e-9);
        }
    }

    /// Random rank-r Kronecker sums never beat the truncated decomposition.
    #[test]
    fn eckart_young_against_random_competitors() {
        let mut r = rng::seeded(26);
        let sp = split(1, 2);
        let u = rng::haar_unitary(8, &mut r);
        let t = classical_tpd(&u, sp).unwrap();
        let norm = (sp.dim() as f64).sqrt();
        for rank in 1..t.rank() {
            let best = low_rank_error(&t, rank).unwrap();
            let tr = reconstruct(&low_rank_truncate(&t, rank).unwrap());
            for trial in 0..1000 {
                let mut comp = CMatrix::zeros(8, 8);
                for k in 0..rank {
                    // perturbations of the optimum as well as unrelated sums
                    let (a, b) = if trial % 2 == 0 {
                        (rng::random_matrix(2, 2, &mut r), rng::random_matrix(4, 4, &mut r))
                    } else {
                        let eps = 1e-3;
                        (
                            &t.a_ops[k].scale_real(t.s[k]) + &rng::random_matrix(2, 2, &mut r).scale_real(eps),
                            &t.b_ops[k] + &rng::random_matrix(4, 4, &mut r).scale_real(eps),
                        )
                    };
                    comp += &kron(&a, &b);
                }
                let err = (&u - &comp).frobenius_norm() / norm;
                assert!(err >= best - 1e-9, "rank {rank}: {err} < {best}");
            }
            assert!(((&u - &tr).frobenius_norm() / norm - best).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_unitary_examples() {
        let mut r = rng::seeded(27);
        let u = rng::haar_unitary(4, &mut r);
        assert!(nearest_unitary(&u).unwrap().max_abs_diff(&u) < 1e-10);

        let nu = nearest_unitary_full(&CMatrix::diag_real(&[2.0, 0.5])).unwrap();
        assert!(nu.unitary.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        assert!((nu.distance - 1.25f64.sqrt()).abs() < 1e-15);

        let singular = CMatrix::diag_real(&[1.0, 0.0]);
        assert!(matches!(nearest_unitary(&singular), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn nearest_unitary_beats_random_unitaries() {
        let mut r = rng::seeded(28);
        let m = rng::random_matrix(4, 4, &mut r);
        let nu = nearest_unitary_full(&m).unwrap();
        assert!(nu.unitary.unitarity_defect() < 1e-9);
        assert!(((&m - &nu.unitary).frobenius_norm() - nu.distance).abs() < 1e-9);
        for _ in 0..10_000 {
            let w = rng::haar_unitary(4, &mut r);
            assert!((&m - &w).frobenius_norm() >= nu.distance - 1e-12);
        }
    }

    #[test]
    fn multipartite_product_of_unitaries() {
        let mut r = rng::seeded(29);
        let ops: Vec<CMatrix> = [2, 4, 2].iter().map(|&d| rng::haar_unitary(d, &mut r)).collect();
        let u = kron_all(&ops);
        let m = multipartite_tpd(&u, &[2, 4, 2]).unwrap();
        assert_eq!(m.ranks(), vec![1, 1, 1]);
        assert!((m.leading() - 1.0).abs() < 1e-12);
        assert!(m.reconstruct().max_abs_diff(&u) < 1e-10);

        let f = fqt_approximation(&u, &[2, 4, 2]).unwrap();
        assert!(f.achieved < 1e-10 && f.bound < 1e-6, "{} {}", f.achieved, f.bound);
    }

    #[test]
    fn multipartite_swap_with_spectator() {
        let u = kron(&swap(), &CMatrix::identity(2));
        let m = multipartite_tpd(&u, &[2, 2, 2]).unwrap();
        assert_eq!(m.ranks(), vec![4, 4, 1]);
        let support = m.support(1e-9);
        assert_eq!(support.len(), 4, "{support:?}");
        for (_, s) in &support {
            assert!((s.norm() - 0.5).abs() < 1e-12);
        }
        assert!((m.leading() - 0.5).abs() < 1e-12);
        assert!((m.weight() - 1.0).abs() < 1e-10);
        assert!(m.reconstruct().max_abs_diff(&u) < 1e-10);
        for f in &m.factors {
            assert!(orthonormality_defect(f) < 1e-8);
        }
    }

    fn heisenberg_chain(n: usize) -> CMatrix {
        let dim = 1 << n;
        let mut h = CMatrix::zeros(dim, dim);
        for q in 0..n - 1 {
            for p in [pauli_x(), pauli_y(), pauli_z()] {
                let mut ops = vec![CMatrix::identity(2); n];
                ops[q] = p.clone();
                ops[q + 1] = p;
                h += &kron_all(&ops).scale_real(-1.0);
            }
        }
        h
    }

    #[test]
    fn multipartite_heisenberg_leading_coefficient_is_quadratic() {
        let h = heisenberg_chain(3);
        let deficit = |t: f64| {
            let u = exact_evolution(&h, t).unwrap();
            let m = multipartite_tpd(&u, &[2, 2, 2]).unwrap();
            assert!(m.reconstruct().max_abs_diff(&u) < 1e-7);
            assert!((m.weight() - 1.0).abs() < 1e-8);
            1.0 - m.leading()
        };
        let (d1, d2) = (deficit(0.01), deficit(0.02));
        assert!(d1 > 0.0 && d1 < 1e-2);
        assert!((d2 / d1 - 4.0).abs() < 0.1, "{d1} {d2}");
    }

    #[test]
    fn fqt_bounds() {
        let mut h = kron(&pauli_x(), &pauli_x());
        h += &kron(&pauli_y(), &pauli_y());
        h += &kron(&pauli_z(), &pauli_z());
        let h = h.scale_real(-1.0);
        let u = exact_evolution(&h, 0.1).unwrap();
        let f = fqt_approximation(&u, &[2, 2]).unwrap();
        assert!(f.achieved <= f.bound + 1e-9);
        assert!(f.achieved < 0.3 && f.bound < 1.0, "{f:?}");

        let f = fqt_approximation(&swap(), &[2, 2]).unwrap();
        assert!((f.eps_s - 0.5).abs() < 1e-12);
        assert!(f.achieved <= f.bound + 1e-9);
    }

    #[test]
    fn multipartite_rejects_bad_dims() {
        assert!(multipartite_tpd(&CMatrix::identity(8), &[2, 2]).is_err());
        assert!(multipartite_tpd(&CMatrix::identity(8), &[8]).is_err());
    }

    #[test]
    fn site_reshuffle_matches_bipartite_for_first_site() {
        let mut r = rng::seeded(30);
        let u = rng::haar_unitary(8, &mut r);
        let a = site_reshuffle(&u, &[2, 2, 2], 0).unwrap();
        assert_eq!(a, reshuffle(&u, split(1, 2)).unwrap());
    }

    #[test]
    fn marginal_spectrum_is_squared_coefficients() {
        let t = classical_tpd(&cnot(), split(1, 1)).unwrap();
        let v = marginal_spectrum(&t).unwrap();
        for (x, y) in v.iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    fn arb_split() -> impl Strategy<Value = (usize, usize)> {
        prop_oneof![Just((1, 1)), Just((1, 2)), Just((2, 2)), Just((1, 3))]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn oracle_round_trip((na, nb) in arb_split(), seed in any::<u64>()) {
            let sp = split(na, nb);
            let mut r = rng::seeded(seed);
            let u = rng::haar_unitary(sp.dim(), &mut r);
            let t = classical_tpd(&u, sp).unwrap();
            prop_assert!((&reconstruct(&t) - &u).frobenius_norm() <= 1e-8);
            prop_assert!((t.weight() - 1.0).abs() < 1e-9);
            prop_assert!(orthonormality_defect(&t.a_ops) < 1e-8);
            prop_assert!(orthonormality_defect(&t.b_ops) < 1e-8);
        }
    }
}
