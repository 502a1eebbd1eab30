//! Seeded random number streams and random quantum objects.
//!
//! Every stochastic routine takes a root seed. Independent tasks (Pauli
//! settings, sweep rows, Monte-Carlo chunks) derive their own generator with
//! [`stream`], which uses the ChaCha stream counter so streams never overlap and
//! results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{inner, norm, CMatrix, C64};

/// Environment variable overriding the default seed of the CLI and sweeps.
pub const SEED_ENV: &str = "QTPD_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed;

pub type Stream = ChaCha8Rng;

pub fn seeded(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `id` of root `seed`.
pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seed from `QTPD_SEED` if set and parseable, else [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random pure state: i.i.d. complex Gaussians, normalized.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    let n = norm(&v);
    v.into_iter().map(|z| z / n).collect()
}

pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix, with the
/// diagonal of `R` made positive (modified Gram-Schmidt does this implicitly).
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, rng);
    let mut cols: Vec<Vec<C64>> = (0..dim).map(|j| g.column(j)).collect();
    for j in 0..dim {
        for _ in 0..2 {
            for k in 0..j {
                let proj = inner(&cols[k], &cols[j]);
                let ck = cols[k].clone();
                for (x, c) in cols[j].iter_mut().zip(&ck) {
                    *x -= proj * c;
                }
            }
        }
        let n = norm(&cols[j]);
        for x in cols[j].iter_mut() {
            *x /= n;
        }
    }
    CMatrix::from_columns(&cols).expect("square")
}

/// Hermitian matrix from the GUE-like ensemble `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    ginibre(dim, rng).hermitian_part()
}

/// Random complex matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}
