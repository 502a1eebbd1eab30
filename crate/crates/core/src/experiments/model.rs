use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Largest model [`build_hamiltonian`] accepts.
pub const MAX_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl Couplings {
    pub fn isotropic(j: f64) -> Self {
        Couplings { jx: j, jy: j, jz: j }
    }
}

/// Heisenberg model `H = −Σ_edges (J_x X_i X_j + J_y Y_i Y_j + J_z Z_i Z_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct SpinModel {
    pub n_qubits: usize,
    pub edges: Vec<(usize, usize)>,
    pub couplings: Couplings,
}

#[derive(Deserialize)]
struct RawModel {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
    couplings: Couplings,
}

impl TryFrom<RawModel> for SpinModel {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        SpinModel::new(r.n_qubits, r.edges, r.couplings)
    }
}

impl SpinModel {
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>, couplings: Couplings) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("{n_qubits} qubits; supported range is 1..={MAX_QUBITS}")));
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &edges {
            if i >= n_qubits || j >= n_qubits || i == j {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) invalid for {n_qubits} qubits")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(SpinModel { n_qubits, edges, couplings })
    }

    /// Two qubits coupled by one edge.
    pub fn pair(couplings: Couplings) -> Self {
        SpinModel { n_qubits: 2, edges: vec![(0, 1)], couplings }
    }

    /// 3×2 grid: rows `0-1-2` and `3-4-5` joined by rungs `0-3`, `1-4`, `2-5`.
    pub fn grid_3x2(couplings: Couplings) -> Self {
        SpinModel {
            n_qubits: 6,
            edges: vec![(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)],
            couplings,
        }
    }

    /// The same model with qubit `order[k]` moved to position `k`.
    pub fn relabeled(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.n_qubits)?;
        let mut pos = vec![0; order.len()];
        for (k, &q) in order.iter().enumerate() {
            pos[q] = k;
        }
        let edges = self.edges.iter().map(|&(i, j)| (pos[i], pos[j])).collect();
        SpinModel::new(self.n_qubits, edges, self.couplings)
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&q| q >= n || std::mem::replace(&mut seen[q], true)) {
        return Err(Error::InvalidArgument(format!("{order:?} is not a permutation of 0..{n}")));
    }
    Ok(())
}

/// Qubit order that moves the qubits of `a` into the leading block.
///
/// `a` qubits already inside the block stay put; the others are swapped
/// pairwise (both sides ascending) with the non-`a` qubits inside the block.
/// The result is a product of disjoint transpositions, so it is its own
/// inverse.
pub fn relabel_order(n_qubits: usize, a: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() != a.len() || sorted.iter().any(|&q| q >= n_qubits) {
        return Err(Error::InvalidArgument(format!("subsystem {a:?} must list distinct qubits below {n_qubits}")));
    }
    let n_a = sorted.len();
    let outside: Vec<usize> = sorted.iter().copied().filter(|&q| q >= n_a).collect();
    let holes: Vec<usize> = (0..n_a).filter(|q| !sorted.contains(q)).collect();
    let mut order: Vec<usize> = (0..n_qubits).collect();
    for (&h, &q) in holes.iter().zip(&outside) {
        order.swap(h, q);
    }
    Ok(order)
}

/// Dense Hamiltonian, qubit 0 most significant.
pub fn build_hamiltonian(model: &SpinModel) -> Result<CMatrix> {
    let n = model.n_qubits;
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("{n} qubits; supported range is 1..={MAX_QUBITS}")));
    }
    let dim = 1usize << n;
    let Couplings { jx, jy, jz } = model.couplings;
    let mut h = CMatrix::zeros(dim, dim);
    for &(i, j) in &model.edges {
        let (bi, bj) = (n - 1 - i, n - 1 - j);
        let flip = (1usize << bi) | (1usize << bj);
        for x in 0..dim {
            // (−1)^{b_i + b_j} is the ZZ eigenvalue
            let zz = if ((x >> bi) ^ (x >> bj)) & 1 == 0 { 1.0 } else { -1.0 };
            h[(x, x)] -= C64::new(jz * zz, 0.0);
            // X_iX_j|x⟩ = |x⊕flip⟩ and Y_iY_j|x⟩ = −(−1)^{b_i+b_j}|x⊕flip⟩
            h[(x ^ flip, x)] += C64::new(-jx + jy * zz, 0.0);
        }
    }
    Ok(h)
}
