//! File formats.
//!
//! Matrices are JSON objects `{"dim": n, "entries": [[re, im], ...]}` with
//! entries in row-major order. Snapshots, factor sets and reports serialize
//! with the same matrix encoding. Floats are written with shortest round-trip
//! formatting, so a write/read cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{kron_vec, CMatrix, C64};

pub fn matrix_from_json(text: &str) -> Result<CMatrix> {
    let m: CMatrix = serde_json::from_str(text)?;
    m.require_square()?;
    Ok(m)
}

pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string(m).expect("matrix serialization is infallible")
}

/// Reads a square matrix file.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<CMatrix> {
    matrix_from_json(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &CMatrix) -> Result<()> {
    fs::write(path, matrix_to_json(m) + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Product state from one character per qubit, most significant first:
/// `0`, `1`, `+`, `-`, `r` (`|+i⟩`) and `l` (`|−i⟩`).
pub fn parse_product_state(spec: &str) -> Result<Vec<C64>> {
    if spec.is_empty() {
        return Err(Error::InvalidArgument("empty state specification".into()));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut state = vec![C64::new(1.0, 0.0)];
    for ch in spec.chars() {
        let q = match ch {
            '0' => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            '1' => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            '+' => [C64::new(h, 0.0), C64::new(h, 0.0)],
            '-' => [C64::new(h, 0.0), C64::new(-h, 0.0)],
            'r' => [C64::new(h, 0.0), C64::new(0.0, h)],
            'l' => [C64::new(h, 0.0), C64::new(0.0, -h)],
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown qubit state {other:?} in {spec:?} (expected one of 0 1 + - r l)"
                )))
            }
        };
        state = kron_vec(&state, &q);
    }
    Ok(state)
}
