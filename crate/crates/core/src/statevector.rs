//! Pure-state simulator over named qubit registers.
//!
//! Qubits are indexed big-endian: qubit 0 is the most significant bit of the
//! amplitude index. Registers ("blocks") are contiguous runs of qubits in the
//! order they appear in the layout. The Choi layout is
//! `[A_ref, A_out, B_ref, B_out]`, so the amplitude of
//! `|a_ref⟩|a_out⟩|b_ref⟩|b_out⟩` sits at index
//! `((a_ref·d_A + a_out)·d_B + b_ref)·d_B + b_out`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, norm, BipartiteSplit, CMatrix, EigenDecomposition, C64, ZERO};
use crate::rng;

pub const A_REF: &str = "A_ref";
pub const A_OUT: &str = "A_out";
pub const B_REF: &str = "B_ref";
pub const B_OUT: &str = "B_out";
pub const REF: &str = "ref";
pub const OUT: &str = "out";

/// Probabilities below this are reported as a null branch.
pub const NULL_BRANCH_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub n_qubits: usize,
}

impl Block {
    pub fn new(name: &str, n_qubits: usize) -> Self {
        Self { name: name.to_string(), n_qubits }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    layout: Vec<Block>,
}

impl StateVector {
    /// Requires `amplitudes.len() == 2^(total qubits)` and unit norm within 1e-10.
    pub fn new(amplitudes: Vec<C64>, layout: Vec<Block>) -> Result<Self> {
        let n: usize = layout.iter().map(|b| b.n_qubits).sum();
        if amplitudes.len() != 1 << n {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a {n}-qubit layout",
                amplitudes.len()
            )));
        }
        for (i, b) in layout.iter().enumerate() {
            if layout[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::InvalidArgument(format!("duplicate block name {}", b.name)));
            }
        }
        let nrm = norm(&amplitudes);
        if (nrm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state has norm {nrm}, expected 1")));
        }
        Ok(Self { amplitudes, layout })
    }

    /// `|0…0⟩` on the given layout.
    pub fn zero(layout: Vec<Block>) -> Self {
        let n: usize = layout.iter().map(|b| b.n_qubits).sum();
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self { amplitudes, layout }
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.iter().map(|b| b.n_qubits).sum()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn layout(&self) -> &[Block] {
        &self.layout
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// Tensor product `self ⊗ other`, concatenating layouts.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let mut layout = self.layout.clone();
        layout.extend(other.layout.iter().cloned());
        let amplitudes = crate::linalg::kron_vec(&self.amplitudes, &other.amplitudes);
        StateVector::new(amplitudes, layout)
    }

    /// Qubit positions of the named blocks, concatenated in the order given.
    pub fn qubits_of(&self, blocks: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for name in blocks {
            let mut start = 0;
            let mut found = false;
            for b in &self.layout {
                if b.name == *name {
                    out.extend(start..start + b.n_qubits);
                    found = true;
                    break;
                }
                start += b.n_qubits;
            }
            if !found {
                return Err(Error::InvalidArgument(format!("no block named {name}")));
            }
        }
        let mut sorted = out.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != out.len() {
            return Err(Error::InvalidArgument(format!("block list {blocks:?} repeats a block")));
        }
        Ok(out)
    }

    /// Reduced density matrix on the named blocks (in the order given).
    pub fn reduced_density_matrix(&self, blocks: &[&str]) -> Result<CMatrix> {
        let kept = self.qubits_of(blocks)?;
        let m = self.split_matrix(&kept);
        // ρ = M M† with M the (kept × rest) reshaping of the amplitudes
        let (rows, cols) = (m.len(), m.first().map_or(0, Vec::len));
        Ok(CMatrix::from_fn(rows, rows, |i, j| {
            let (ri, rj) = (&m[i], &m[j]);
            (0..cols).map(|k| ri[k] * rj[k].conj()).sum()
        }))
    }

    fn split_matrix(&self, kept: &[usize]) -> Vec<Vec<C64>> {
        let n = self.n_qubits();
        let rest: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
        let kept_off = offsets(n, kept);
        let rest_off = offsets(n, &rest);
        kept_off
            .iter()
            .map(|&k| rest_off.iter().map(|&r| self.amplitudes[k | r]).collect())
            .collect()
    }
}

/// Index contribution of every assignment of `qubits` (first qubit most significant).
fn offsets(n: usize, qubits: &[usize]) -> Vec<usize> {
    let m = qubits.len();
    (0..1usize << m)
        .map(|idx| {
            qubits
                .iter()
                .enumerate()
                .filter(|(pos, _)| idx >> (m - 1 - pos) & 1 == 1)
                .map(|(_, &q)| 1usize << (n - 1 - q))
                .sum()
        })
        .collect()
}

/// Generalized Bell state `d^{-1/2} Σ_i |i⟩_ref |i⟩_out` on `2n` qubits.
pub fn bell_state(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("bell_state needs at least one qubit".into()));
    }
    let d = 1usize << n;
    let mut amps = vec![ZERO; d * d];
    let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        amps[i * d + i] = a;
    }
    StateVector::new(amps, vec![Block::new(REF, n), Block::new(OUT, n)])
}

pub fn choi_layout(split: BipartiteSplit) -> Vec<Block> {
    vec![
        Block::new(A_REF, split.n_a()),
        Block::new(A_OUT, split.n_a()),
        Block::new(B_REF, split.n_b()),
        Block::new(B_OUT, split.n_b()),
    ]
}

/// Choi state `(1 ⊗ U ⊗ 1)|Φ⁺_A⟩|Φ⁺_B⟩` with `U` acting on `(A_out, B_out)`.
pub fn choi_state(u: &CMatrix, split: BipartiteSplit) -> Result<StateVector> {
    split.check_operator(u)?;
    u.require_unitary(1e-9)?;
    let (d_a, d_b) = (split.d_a(), split.d_b());
    let norm = 1.0 / ((d_a * d_b) as f64).sqrt();
    let mut amps = vec![ZERO; d_a * d_a * d_b * d_b];
    for ar in 0..d_a {
        for br in 0..d_b {
            let col = ar * d_b + br;
            for ao in 0..d_a {
                for bo in 0..d_b {
                    amps[((ar * d_a + ao) * d_b + br) * d_b + bo] = u[(ao * d_b + bo, col)] * norm;
                }
            }
        }
    }
    StateVector::new(amps, choi_layout(split))
}

/// Applies `u` to the qubits of the named blocks (in the order given).
pub fn apply_block_unitary(state: &StateVector, u: &CMatrix, blocks: &[&str]) -> Result<StateVector> {
    let targets = state.qubits_of(blocks)?;
    let dim = 1usize << targets.len();
    if u.rows() != dim || u.cols() != dim {
        return Err(Error::Dimension(format!(
            "{}x{} operator on blocks {blocks:?} spanning {} qubits",
            u.rows(),
            u.cols(),
            targets.len()
        )));
    }
    let n = state.n_qubits();
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let t_off = offsets(n, &targets);
    let r_off = offsets(n, &rest);
    let mut out = vec![ZERO; state.amplitudes.len()];
    let mut buf = vec![ZERO; dim];
    for &r in &r_off {
        for (b, &t) in buf.iter_mut().zip(&t_off) {
            *b = state.amplitudes[r | t];
        }
        for (i, &t) in t_off.iter().enumerate() {
            out[r | t] = u.row(i).iter().zip(&buf).map(|(x, y)| x * y).sum();
        }
    }
    Ok(StateVector { amplitudes: out, layout: state.layout.clone() })
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub probability: f64,
    /// `P|ψ⟩/√p`, or `None` for a null branch.
    pub post_state: Option<StateVector>,
}

impl Measurement {
    pub fn is_null(&self) -> bool {
        self.post_state.is_none()
    }
}

/// Projective measurement of `p` (acting on the named blocks).
pub fn measure_projector(state: &StateVector, p: &CMatrix, blocks: &[&str]) -> Result<Measurement> {
    let defect = p.hermiticity_defect().max((&p.matmul(p) - p).frobenius_norm());
    if defect > 1e-9 {
        return Err(Error::InvalidArgument(format!("operator is not a projector (defect {defect:.3e})")));
    }
    let projected = apply_block_unitary(state, p, blocks)?;
    let nrm = projected.norm();
    let probability = nrm * nrm;
    if probability < NULL_BRANCH_TOL {
        return Ok(Measurement { probability, post_state: None });
    }
    let amplitudes = projected.amplitudes.iter().map(|z| z / nrm).collect();
    Ok(Measurement {
        probability,
        post_state: Some(StateVector { amplitudes, layout: state.layout.clone() }),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        crate::linalg::gates::paulis()[self as usize].clone()
    }
}

/// Tensor product of single-qubit Paulis, first letter on the most significant qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    /// The `index`-th of the `4^n` strings, base 4 with letters in `I, X, Y, Z` order.
    pub fn from_index(n: usize, mut index: usize) -> Self {
        let mut letters = vec![Pauli::I; n];
        for l in letters.iter_mut().rev() {
            *l = Pauli::ALL[index % 4];
            index /= 4;
        }
        Self(letters)
    }

    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * n)).map(move |i| Self::from_index(n, i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    pub fn matrix(&self) -> CMatrix {
        crate::linalg::kron_all(&self.0.iter().map(|p| p.matrix()).collect::<Vec<_>>())
    }

    /// Bit masks (flip, phase) with `P|j⟩ = i^{n_Y} (-1)^{|j ∧ phase|} |j ⊕ flip⟩`.
    fn masks(&self) -> (usize, usize, u32) {
        let n = self.0.len();
        let (mut flip, mut phase, mut n_y) = (0, 0, 0);
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1 << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    phase |= bit;
                    n_y += 1;
                }
                Pauli::Z => phase |= bit,
            }
        }
        (flip, phase, n_y)
    }
}

impl PauliString {
    /// `m += c·P` without forming `P`.
    pub fn add_scaled_to(&self, m: &mut CMatrix, c: f64) {
        let (flip, phase, n_y) = self.masks();
        let global = [C64::new(c, 0.0), C64::new(0.0, c), C64::new(-c, 0.0), C64::new(0.0, -c)][(n_y % 4) as usize];
        for j in 0..m.rows() {
            let k = j ^ flip;
            let v = if (k & phase).count_ones() % 2 == 1 { -global } else { global };
            m[(j, k)] += v;
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidArgument(format!("invalid Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

/// `Tr(P ρ)` without forming `P`.
pub fn pauli_expectation(rho: &CMatrix, p: &PauliString) -> Result<f64> {
    let d = rho.require_square()?;
    if d != 1 << p.len() {
        return Err(Error::Dimension(format!("{}-qubit Pauli string on a {d}x{d} matrix", p.len())));
    }
    let (flip, phase, n_y) = p.masks();
    // ⟨j|P|j⊕flip⟩ = i^{n_Y} (-1)^{|(j⊕flip) ∧ phase|}: Y|0⟩ = i|1⟩ and Y|1⟩ = -i|0⟩.
    let global = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)]
        [(n_y % 4) as usize];
    let mut acc = ZERO;
    for j in 0..d {
        let k = j ^ flip;
        let term = rho[(k, j)];
        if (k & phase).count_ones() % 2 == 1 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    Ok((global * acc).re)
}

/// Mean of `shots` ±1 outcomes with `P(+1) = (1 + exact)/2`.
pub fn sample_expectation<R: Rng + ?Sized>(exact: f64, shots: u64, rng: &mut R) -> f64 {
    if shots == 0 {
        return 0.0;
    }
    let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let plus = Binomial::new(shots, p).expect("probability in [0, 1]").sample(rng);
    (2.0 * plus as f64 - shots as f64) / shots as f64
}

pub fn sampled_expectation(rho: &CMatrix, p: &PauliString, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let exact = pauli_expectation(rho, p)?;
    Ok(sample_expectation(exact, shots, &mut rng::seeded(seed)))
}

/// Eigendecomposition of a Hamiltonian, reused to evaluate `e^{-iHt}` at many times.
#[derive(Clone, Debug)]
pub struct Propagator {
    eig: EigenDecomposition,
}

impl Propagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        Ok(Self { eig: hermitian_eig(h)? })
    }

    pub fn energies(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn at(&self, t: f64) -> CMatrix {
        let v = &self.eig.vectors;
        let n = v.rows();
        let phases: Vec<C64> = self.eig.values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
        let scaled = CMatrix::from_fn(n, n, |i, k| v[(i, k)] * phases[k]);
        scaled.matmul(&v.adjoint())
    }
}

/// `e^{-iHt}` by diagonalization.
pub fn exact_evolution(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(Propagator::new(h)?.at(t))
}
