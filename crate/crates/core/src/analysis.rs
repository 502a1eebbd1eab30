//! Quantities derived from a decomposition: non-locality, mereology costs,
//! entangling powers, the open-dynamics surrogate and its observables, and the
//! decoherence-free split check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, index_permutation, BipartiteSplit, CMatrix, C64, ZERO};
use crate::qtpd::ExtractedFactors;
use crate::rng;
use crate::tpd::{classical_tpd, TensorProductDecomposition};

fn check_weights(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    if let Some(x) = s.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative or NaN coefficient {x}")));
    }
    let total: f64 = s.iter().map(|x| x * x).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("Σ s_k² = {total}, expected 1")));
    }
    Ok(())
}

/// `S_A(U) = −Σ s_k² ln s_k²`.
pub fn nonlocality(s: &[f64]) -> Result<f64> {
    check_weights(s)?;
    Ok(s.iter()
        .map(|x| x * x)
        .filter(|&p| p >= 1e-300)
        .map(|p| -p * p.ln())
        .sum())
}

/// Non-locality divided by its maximum `ln d_A²`.
pub fn nonlocality_normalized(s: &[f64], d_a: usize) -> Result<f64> {
    Ok(nonlocality(s)? / ((d_a * d_a) as f64).ln())
}

/// The two cost functions for choosing a split: `(1 − s₁², Σ_{k≥2} s_k)`.
pub fn mereology_costs(s: &[f64]) -> Result<(f64, f64)> {
    check_weights(s)?;
    Ok((1.0 - s[0] * s[0], s[1..].iter().sum()))
}

/// Permutation matrix swapping the qubits of A with the qubits `c` of B
/// (positions within B, ascending), qubit `i` of A with `c[i]`.
pub fn subsystem_swap(split: BipartiteSplit, c: &[usize]) -> Result<CMatrix> {
    let (n_a, n_b) = (split.n_a(), split.n_b());
    if c.len() != n_a || c.iter().any(|&q| q >= n_b) {
        return Err(Error::InvalidArgument(format!("swap partner {c:?} must name {n_a} of the {n_b} B qubits")));
    }
    let mut order: Vec<usize> = (0..n_a + n_b).collect();
    for (i, &q) in c.iter().enumerate() {
        order.swap(i, n_a + q);
    }
    let map = index_permutation(&vec![2; n_a + n_b], &order);
    let dim = split.dim();
    let mut p = CMatrix::zeros(dim, dim);
    for (new, &old) in map.iter().enumerate() {
        p[(new, old)] = C64::new(1.0, 0.0);
    }
    Ok(p)
}

/// All `k`-element subsets of `0..n`, ascending.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Swap-corrected entangling power
/// `e_A = [S_A(U) + Σ_C (S_A(U P_AC) − ln d_A²)] / ln d_A²`
/// where `C` runs over the `n_a`-qubit subsets of B. For `d_A = d_B` there is a
/// single term. Values for `d_A < d_B` can be negative and are not clamped.
pub fn entangling_power_swap(u: &CMatrix, split: BipartiteSplit) -> Result<f64> {
    let log_d2 = ((split.d_a() * split.d_a()) as f64).ln();
    let mut total = nonlocality(&classical_tpd(u, split)?.s)?;
    for c in combinations(split.n_b(), split.n_a()) {
        let swapped = u.matmul(&subsystem_swap(split, &c)?);
        total += nonlocality(&classical_tpd(&swapped, split)?.s)? - log_d2;
    }
    Ok(total / log_d2)
}

/// Closed-form mean linear entanglement generated from Haar-random product
/// states, from the full decomposition (both factor sides).
pub fn entangling_power_mean(tpd: &TensorProductDecomposition) -> f64 {
    mean_from_factors(tpd.split, &tpd.s, &tpd.a_ops, &tpd.b_ops)
}

/// As [`entangling_power_mean`] for quantum-extracted factors. The fourth-order
/// trace term needs the `B_k`, which the quantum pipeline does not provide.
pub fn entangling_power_mean_factors(factors: &ExtractedFactors, b_ops: Option<&[CMatrix]>) -> Result<f64> {
    let b_ops = b_ops.ok_or(Error::RequiresOracle("mean entangling power"))?;
    if b_ops.len() != factors.rank() {
        return Err(Error::Dimension(format!("{} B factors for rank {}", b_ops.len(), factors.rank())));
    }
    Ok(mean_from_factors(factors.split, &factors.s, &factors.a_ops, b_ops))
}

fn trace_of_product(x: &CMatrix, y: &CMatrix) -> C64 {
    let n = x.rows();
    let mut t = ZERO;
    for i in 0..n {
        for j in 0..n {
            t += x[(i, j)] * y[(j, i)];
        }
    }
    t
}

fn mean_from_factors(split: BipartiteSplit, s: &[f64], a: &[CMatrix], b: &[CMatrix]) -> f64 {
    let (da, db) = (split.d_a() as f64, split.d_b() as f64);
    let r = s.len();
    let aa: Vec<CMatrix> = (0..r * r).map(|i| a[i / r].matmul(&a[i % r].adjoint())).collect();
    let bb: Vec<CMatrix> = (0..r * r).map(|i| b[i / r].matmul(&b[i % r].adjoint())).collect();
    // Σ s_k s_l s_m s_n Tr(A_k A_l† A_m A_n†) Tr(B_k B_n† B_m B_l†)
    let t2: f64 = (0..r * r * r * r)
        .into_par_iter()
        .map(|idx| {
            let (k, l, m, n) = (idx / (r * r * r), idx / (r * r) % r, idx / r % r, idx % r);
            let w = s[k] * s[l] * s[m] * s[n];
            if w == 0.0 {
                return 0.0;
            }
            let ta = trace_of_product(&aa[k * r + l], &aa[m * r + n]);
            let tb = trace_of_product(&bb[k * r + n], &bb[m * r + l]);
            w * (ta * tb).re
        })
        .sum();
    let s4: f64 = s.iter().map(|x| x.powi(4)).sum();
    1.0 - (da + db) / ((da + 1.0) * (db + 1.0))
        - da * db * s4 / ((da + 1.0) * (db + 1.0))
        - t2 / (da * (da + 1.0) * db * (db + 1.0))
}

/// Mean entangling power from traces over two copies of the full system,
/// `1 − [d_A² d_B + d_A d_B² + Tr(U⊗U P_A U†⊗U† P_A) + Tr(U⊗U P_B U†⊗U† P_A)] / [d_A(d_A+1) d_B(d_B+1)]`.
/// Dense in the doubled space, so limited to total dimension 16.
pub fn entangling_power_mean_doubled(u: &CMatrix, split: BipartiteSplit) -> Result<f64> {
    split.check_operator(u)?;
    let (d_a, d_b) = (split.d_a(), split.d_b());
    let d = d_a * d_b;
    if d > 16 {
        return Err(Error::SearchTooLarge { dim: d, limit: 16 });
    }
    // doubled index ((a1·d_B + b1)·d + a2·d_B + b2); P_A exchanges a1 and a2
    let swap_a = |x: usize| {
        let (i1, i2) = (x / d, x % d);
        let (a1, b1, a2, b2) = (i1 / d_b, i1 % d_b, i2 / d_b, i2 % d_b);
        (a2 * d_b + b1) * d + a1 * d_b + b2
    };
    let swap_b = |x: usize| {
        let (i1, i2) = (x / d, x % d);
        let (a1, b1, a2, b2) = (i1 / d_b, i1 % d_b, i2 / d_b, i2 % d_b);
        (a1 * d_b + b2) * d + a2 * d_b + b1
    };
    let uu = crate::linalg::kron(u, u);
    let uu_dag = uu.adjoint();
    // Tr(W X W† P_A) with X a permutation: Σ_x (W X W†)[π_A(x), x]
    let term = |perm: &dyn Fn(usize) -> usize| -> f64 {
        let n = d * d;
        let wx = CMatrix::from_fn(n, n, |i, j| uu[(i, perm(j))]);
        let m = wx.matmul(&uu_dag);
        (0..n).map(|x| m[(x, swap_a(x))]).sum::<C64>().re
    };
    let (da, db) = (d_a as f64, d_b as f64);
    let t1 = term(&swap_a);
    let t2 = term(&swap_b);
    Ok(1.0 - (da * da * db + da * db * db + t1 + t2) / (da * (da + 1.0) * db * (db + 1.0)))
}

fn linear_entropy_a(state: &[C64], d_a: usize, d_b: usize) -> f64 {
    // ρ_A = M M† with M the d_A × d_B reshaping of the state
    let mut purity = 0.0;
    for i in 0..d_a {
        for j in 0..d_a {
            let rho_ij: C64 = (0..d_b).map(|b| state[i * d_b + b] * state[j * d_b + b].conj()).sum();
            purity += rho_ij.norm_sqr();
        }
    }
    1.0 - purity
}

/// Monte-Carlo estimate of the mean linear entanglement `1 − Tr ρ_A²` over
/// Haar-random product inputs. Returns `(mean, standard error)`.
pub fn entangling_power_mc(u: &CMatrix, split: BipartiteSplit, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    split.check_operator(u)?;
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("{n_samples} samples; at least 100 required")));
    }
    let (d_a, d_b) = (split.d_a(), split.d_b());
    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let psi_a = rng::random_state(d_a, &mut r);
            let psi_b = rng::random_state(d_b, &mut r);
            let out = u.mat_vec(&crate::linalg::kron_vec(&psi_a, &psi_b));
            linear_entropy_a(&out, d_a, d_b)
        })
        .collect();
    let n = n_samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Where the environment overlaps `λ_kl` come from.
#[derive(Clone, Copy, Debug)]
pub enum OverlapSource<'a> {
    /// Oracle coefficients and B factors: `λ_kl = s_k s_l ⟨ψ|B_l† B_k|ψ⟩`.
    Oracle { s: &'a [f64], b_ops: &'a [CMatrix] },
    /// Branch vectors `s_k B_k|ψ⟩` from [`crate::qtpd::branch_vectors`]:
    /// `λ_kl = ⟨χ_l|χ_k⟩`.
    Distilled(&'a [Vec<C64>]),
}

/// Classical model of the reduced dynamics `σ_A = Σ_kl λ_kl A_k|ψ⟩⟨ψ|A_l†`
/// for a fixed environment state `ψ_B`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpenSurrogate {
    pub lambda: CMatrix,
    pub a_ops: Vec<CMatrix>,
    pub psi_b: Vec<C64>,
}

pub fn open_surrogate(a_ops: &[CMatrix], source: OverlapSource<'_>, psi_b: &[C64]) -> Result<OpenSurrogate> {
    let r = a_ops.len();
    let env: Vec<Vec<C64>> = match source {
        OverlapSource::Oracle { s, b_ops } => {
            if s.len() != r || b_ops.len() != r {
                return Err(Error::Dimension(format!("{} A factors, {} coefficients, {} B factors", r, s.len(), b_ops.len())));
            }
            b_ops
                .iter()
                .zip(s)
                .map(|(b, &sk)| {
                    if b.cols() != psi_b.len() {
                        return Err(Error::Dimension(format!("B factor of size {} for state of length {}", b.cols(), psi_b.len())));
                    }
                    Ok(b.mat_vec(psi_b).iter().map(|z| z * sk).collect())
                })
                .collect::<Result<_>>()?
        }
        OverlapSource::Distilled(chi) => {
            if chi.len() != r {
                return Err(Error::Dimension(format!("{} A factors, {} branch vectors", r, chi.len())));
            }
            chi.to_vec()
        }
    };
    let lambda = CMatrix::from_fn(r, r, |k, l| crate::linalg::inner(&env[l], &env[k]));
    Ok(OpenSurrogate { lambda, a_ops: a_ops.to_vec(), psi_b: psi_b.to_vec() })
}

impl OpenSurrogate {
    /// Reduced state of A after one application of `U` to `ψ_A ⊗ ψ_B`.
    pub fn evolve(&self, psi_a: &[C64]) -> Result<CMatrix> {
        let d = psi_a.len();
        if self.a_ops.iter().any(|a| a.cols() != d) {
            return Err(Error::Dimension(format!("state of length {d} for the A factors")));
        }
        let vecs: Vec<Vec<C64>> = self.a_ops.iter().map(|a| a.mat_vec(psi_a)).collect();
        let r = vecs.len();
        Ok(CMatrix::from_fn(d, d, |i, j| {
            let mut acc = ZERO;
            for k in 0..r {
                for l in 0..r {
                    acc += self.lambda[(k, l)] * vecs[k][i] * vecs[l][j].conj();
                }
            }
            acc
        }))
    }
}

/// Direct simulation of the same reduced state: `Tr_B[U |ψ_A ψ_B⟩⟨ψ_A ψ_B| U†]`.
pub fn reduced_dynamics(u: &CMatrix, split: BipartiteSplit, psi_a: &[C64], psi_b: &[C64]) -> Result<CMatrix> {
    split.check_operator(u)?;
    let (d_a, d_b) = (split.d_a(), split.d_b());
    if psi_a.len() != d_a || psi_b.len() != d_b {
        return Err(Error::Dimension(format!("states of length {}, {} for split {d_a}x{d_b}", psi_a.len(), psi_b.len())));
    }
    let out = u.mat_vec(&crate::linalg::kron_vec(psi_a, psi_b));
    Ok(CMatrix::from_fn(d_a, d_a, |i, j| (0..d_b).map(|b| out[i * d_b + b] * out[j * d_b + b].conj()).sum()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateObservables {
    /// `M_A = Σ_i ⟨Z_i⟩`.
    pub magnetization: f64,
    /// `1/2 − M_A/(2 n_A)`: 0 for all-up, 1 for all-down.
    pub occupation: f64,
    /// von Neumann entropy divided by `ln d_A`.
    pub entropy_norm: f64,
}

pub fn observables(sigma: &CMatrix, n_a: usize) -> Result<StateObservables> {
    let d = sigma.require_square()?;
    if n_a == 0 || d != 1 << n_a {
        return Err(Error::Dimension(format!("{d}x{d} state for {n_a} qubits")));
    }
    let magnetization: f64 = (0..d)
        .map(|x| sigma[(x, x)].re * (n_a as f64 - 2.0 * x.count_ones() as f64))
        .sum();
    let entropy: f64 = hermitian_eig(&sigma.hermitian_part())?
        .values
        .iter()
        .filter(|&&p| p > 1e-300)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(StateObservables {
        magnetization,
        occupation: 0.5 - magnetization / (2.0 * n_a as f64),
        entropy_norm: (entropy / (d as f64).ln()).max(0.0),
    })
}

/// Largest total dimension accepted by [`decoherence_free_check`].
pub const DFS_SEARCH_LIMIT: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecoherenceFreeCheck {
    pub decomposable: bool,
    /// Witness `(φ_μ, ψ_m)` in `[0, 2π)` with `ψ_0 = 0`.
    pub phases: Option<(Vec<f64>, Vec<f64>)>,
    /// Smallest worst-case mismatch found by a greedy assignment; below `tol`
    /// whenever a witness exists.
    pub nearest_miss: f64,
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let x = (a - b).rem_euclid(tau);
    x.min(tau - x)
}

struct PhaseSearch<'a> {
    theta: &'a [f64],
    d_b: usize,
    tol: f64,
}

impl PhaseSearch<'_> {
    /// Marks the closest unused phase to each `φ_μ + ψ`; `None` if one is
    /// further than `tol` away.
    fn claim(&self, phi: &[f64], psi: f64, used: &mut [bool]) -> Option<Vec<usize>> {
        let mut taken = Vec::with_capacity(phi.len());
        for &p in phi {
            let target = p + psi;
            let best = (0..self.theta.len())
                .filter(|&j| !used[j])
                .map(|j| (j, circ_dist(self.theta[j], target)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((j, dist)) if dist <= self.tol => {
                    used[j] = true;
                    taken.push(j);
                }
                _ => {
                    for &j in &taken {
                        used[j] = false;
                    }
                    return None;
                }
            }
        }
        Some(taken)
    }

    fn extend(&self, phi: &[f64], psi: &mut Vec<f64>, used: &mut [bool]) -> bool {
        if psi.len() == self.d_b {
            return true;
        }
        let Some(r) = used.iter().position(|u| !u) else { return false };
        for &p in phi {
            let candidate = self.theta[r] - p;
            if let Some(taken) = self.claim(phi, candidate, used) {
                psi.push(candidate);
                if self.extend(phi, psi, used) {
                    return true;
                }
                psi.pop();
                for j in taken {
                    used[j] = false;
                }
            }
        }
        false
    }

    /// Worst mismatch of a greedy completion of the grid for fixed `φ`.
    fn greedy_residual(&self, phi: &[f64], used: &mut [bool]) -> f64 {
        let mut worst = 0.0f64;
        while let Some(r) = used.iter().position(|u| !u) {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for &p in phi {
                let psi = self.theta[r] - p;
                let mut trial = used.to_vec();
                let mut cost = 0.0f64;
                let mut taken = Vec::new();
                for &q in phi {
                    let Some((j, dist)) = (0..self.theta.len())
                        .filter(|&j| !trial[j])
                        .map(|j| (j, circ_dist(self.theta[j], q + psi)))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                    else {
                        break;
                    };
                    trial[j] = true;
                    taken.push(j);
                    cost = cost.max(dist);
                }
                if best.as_ref().map_or(true, |b| cost < b.0) {
                    best = Some((cost, taken));
                }
            }
            let (cost, taken) = best.expect("non-empty phi");
            worst = worst.max(cost);
            for j in taken {
                used[j] = true;
            }
        }
        worst
    }
}

/// Decides whether some basis change `V` makes `V U V† = A ⊗ B`, which holds
/// exactly when the eigenphases of `U` can be arranged as `θ_{μm} = φ_μ + ψ_m`
/// (mod 2π). Exhaustive backtracking over the assignment, with the gauge
/// `ψ_0 = 0` and the first phase fixed as `φ_0 + ψ_0`.
pub fn decoherence_free_check(u: &CMatrix, split: BipartiteSplit, tol: f64) -> Result<DecoherenceFreeCheck> {
    split.check_operator(u)?;
    let dim = split.dim();
    if dim > DFS_SEARCH_LIMIT {
        return Err(Error::SearchTooLarge { dim, limit: DFS_SEARCH_LIMIT });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let theta = crate::linalg::unitary_eigenphases(u)?;
    let (d_a, d_b) = (split.d_a(), split.d_b());
    let search = PhaseSearch { theta: &theta, d_b, tol };
    let mut nearest_miss = f64::INFINITY;
    for combo in combinations(dim - 1, d_a - 1) {
        let mut phi = vec![theta[0]];
        phi.extend(combo.iter().map(|&c| theta[c + 1]));
        let mut used = vec![false; dim];
        used[0] = true;
        for &c in &combo {
            used[c + 1] = true;
        }
        let mut psi = vec![0.0];
        if search.extend(&phi, &mut psi, &mut used.clone()) {
            let wrap = |x: f64| x.rem_euclid(std::f64::consts::TAU);
            return Ok(DecoherenceFreeCheck {
                decomposable: true,
                phases: Some((phi.into_iter().map(wrap).collect(), psi.into_iter().map(wrap).collect())),
                nearest_miss: 0.0,
            });
        }
        nearest_miss = nearest_miss.min(search.greedy_residual(&phi, &mut used));
    }
    Ok(DecoherenceFreeCheck { decomposable: false, phases: None, nearest_miss })
}
