use serde::{Deserialize, Serialize};

use super::decomp::{hermitian_eig, svd};
use super::matrix::{CMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Qubit counts of the small subsystem `A` and its environment `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteSplit {
    n_a: usize,
    n_b: usize,
}

impl BipartiteSplit {
    /// Requires `1 ≤ n_a ≤ n_b`.
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::InvalidArgument(format!("split {n_a}+{n_b}: both sides need at least one qubit")));
        }
        if n_a > n_b {
            return Err(Error::InvalidArgument(format!("split {n_a}+{n_b}: subsystem A must not be larger than B")));
        }
        if n_a + n_b > 24 {
            return Err(Error::InvalidArgument(format!("split {n_a}+{n_b}: too many qubits")));
        }
        Ok(Self { n_a, n_b })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn d_a(&self) -> usize {
        1 << self.n_a
    }

    pub fn d_b(&self) -> usize {
        1 << self.n_b
    }

    pub fn dim(&self) -> usize {
        self.d_a() * self.d_b()
    }

    pub fn check_operator(&self, u: &CMatrix) -> Result<()> {
        if u.rows() != self.dim() || u.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator is {}x{} but split {}+{} needs {}x{}",
                u.rows(),
                u.cols(),
                self.n_a,
                self.n_b,
                self.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Kronecker product: `out[(i·rb + k, j·cb + l)] = a[i,j]·b[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (rb, cb) = (b.rows(), b.cols());
    CMatrix::from_fn(a.rows() * rb, a.cols() * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| kron(&acc, f))
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Partial trace keeping the subsystems listed in `keep` (returned in their
/// original order). Subsystem 0 is the most significant.
pub fn partial_trace(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let n = rho.require_square()?;
    let total: usize = dims.iter().product();
    if total != n {
        return Err(Error::Dimension(format!("subsystem dims {dims:?} multiply to {total}, matrix is {n}x{n}")));
    }
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set must be nonempty".into()));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!("invalid keep set {keep:?} for {} subsystems", dims.len())));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let d_keep: usize = keep_sorted.iter().map(|&i| dims[i]).product();
    let d_trace: usize = traced.iter().map(|&i| dims[i]).product();

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |subsystems: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for &s in subsystems.iter().rev() {
                    off += (idx % dims[s]) * strides[s];
                    idx /= dims[s];
                }
                off
            })
            .collect()
    };
    let keep_off = offsets(&keep_sorted, d_keep);
    let trace_off = offsets(&traced, d_trace);

    Ok(CMatrix::from_fn(d_keep, d_keep, |i, j| {
        trace_off.iter().map(|&t| rho[(keep_off[i] + t, keep_off[j] + t)]).sum()
    }))
}

/// Normalized vectorization `vec(A) = d^{-1/2} Σ_i |i⟩ ⊗ A|i⟩`, i.e. entry
/// `i·d + j` holds `A[j, i]/√d`. With this convention `⟨vec A, vec B⟩ = Tr(A†B)/d`.
pub fn vectorize(a: &CMatrix) -> Result<Vec<C64>> {
    let d = a.require_square()?;
    let inv = 1.0 / (d as f64).sqrt();
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = a[(j, i)] * inv;
        }
    }
    Ok(v)
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[C64], d: usize) -> Result<CMatrix> {
    if v.len() != d * d {
        return Err(Error::Dimension(format!("vector of length {} cannot be unvectorized to {d}x{d}", v.len())));
    }
    let s = (d as f64).sqrt();
    Ok(CMatrix::from_fn(d, d, |j, i| v[i * d + j] * s))
}

/// Reshuffled operator with
/// `R[(i_A·d_A + j_A), (i_B·d_B + j_B)] = U[(i_A·d_B + i_B), (j_A·d_B + j_B)] / √(d_A d_B)`.
///
/// For a canonical decomposition the singular values of `R` are exactly the
/// coefficients `s_k`.
pub fn reshuffle_dims(u: &CMatrix, d_a: usize, d_b: usize) -> Result<CMatrix> {
    let n = u.require_square()?;
    if n != d_a * d_b {
        return Err(Error::Dimension(format!("{n}x{n} operator does not factor as {d_a}x{d_b}")));
    }
    let norm = 1.0 / ((d_a * d_b) as f64).sqrt();
    Ok(CMatrix::from_fn(d_a * d_a, d_b * d_b, |r, c| {
        let (ia, ja) = (r / d_a, r % d_a);
        let (ib, jb) = (c / d_b, c % d_b);
        u[(ia * d_b + ib, ja * d_b + jb)] * norm
    }))
}

pub fn reshuffle(u: &CMatrix, split: BipartiteSplit) -> Result<CMatrix> {
    split.check_operator(u)?;
    reshuffle_dims(u, split.d_a(), split.d_b())
}

/// Inverse index map of [`reshuffle_dims`].
pub fn unreshuffle_dims(r: &CMatrix, d_a: usize, d_b: usize) -> Result<CMatrix> {
    if r.rows() != d_a * d_a || r.cols() != d_b * d_b {
        return Err(Error::Dimension(format!(
            "{}x{} is not a reshuffled {d_a}x{d_b} operator",
            r.rows(),
            r.cols()
        )));
    }
    let scale = ((d_a * d_b) as f64).sqrt();
    let n = d_a * d_b;
    Ok(CMatrix::from_fn(n, n, |row, col| {
        let (ia, ib) = (row / d_b, row % d_b);
        let (ja, jb) = (col / d_b, col % d_b);
        r[(ia * d_a + ja, ib * d_b + jb)] * scale
    }))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.frobenius_norm()
}

/// Largest singular value.
pub fn spectral(m: &CMatrix) -> f64 {
    svd(m).sigma.first().copied().unwrap_or(0.0)
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    svd(m).sigma.iter().sum()
}

/// Euclidean projection of `values` onto the probability simplex.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Closest trace-one positive semidefinite matrix in Frobenius norm.
pub fn nearest_density_matrix(h: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(h)?;
    let projected = project_simplex(&eig.values);
    let n = h.rows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &p) in projected.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = eig.vector(k);
        for i in 0..n {
            let vi = v[i] * p;
            for j in 0..n {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    Ok(out)
}

/// Reorders the tensor factors of an operator: subsystem `k` of the result is
/// subsystem `order[k]` of `u` (subsystem 0 most significant).
pub fn permute_subsystems(u: &CMatrix, dims: &[usize], order: &[usize]) -> Result<CMatrix> {
    let n = u.require_square()?;
    if dims.iter().product::<usize>() != n {
        return Err(Error::Dimension(format!("subsystem dims {dims:?} do not multiply to {n}")));
    }
    let mut seen = order.to_vec();
    seen.sort_unstable();
    if seen != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!("{order:?} is not a permutation of {} subsystems", dims.len())));
    }
    let map = index_permutation(dims, order);
    Ok(CMatrix::from_fn(n, n, |i, j| u[(map[i], map[j])]))
}

/// `map[new_index] = old_index` for the factor reordering of [`permute_subsystems`].
pub fn index_permutation(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let n: usize = dims.iter().product();
    let mut old_strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        old_strides[i] = old_strides[i + 1] * dims[i + 1];
    }
    (0..n)
        .map(|mut idx| {
            let mut old = 0;
            for &s in order.iter().rev() {
                old += (idx % dims[s]) * old_strides[s];
                idx /= dims[s];
            }
            old
        })
        .collect()
}
