//! Sweep configuration files.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "model": {"n_qubits": 2, "edges": [[0, 1]], "couplings": {"jx": 1, "jy": 1, "jz": 1}},
//!   "subsystem_a": [0],
//!   "time": {"start": 0, "end": 1, "n_points": 64, "scale": "pi"},
//!   "initial_state": {"a": "1", "b": "0"},
//!   "pipeline": {"mode": "oracle"},
//!   "outputs": ["e_A", "e_m"]
//! }
//! ```
//!
//! Qubits are renumbered by [`relabel_order`] so that `subsystem_a` becomes
//! the leading block; `initial_state.a` lists the A qubits and
//! `initial_state.b` the rest, both in the renumbered order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::model::{relabel_order, SpinModel};
use crate::io::parse_product_state;
use crate::qtpd::{Shots, SnapshotMode};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub enum TimeScale {
    /// Grid values are multiples of π.
    #[serde(rename = "pi")]
    Pi,
    #[default]
    #[serde(rename = "1")]
    One,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub n_points: usize,
    #[serde(default)]
    pub scale: TimeScale,
}

impl TimeGrid {
    /// Evenly spaced times, both endpoints included.
    pub fn times(&self) -> Vec<f64> {
        let unit = match self.scale {
            TimeScale::Pi => std::f64::consts::PI,
            TimeScale::One => 1.0,
        };
        let step = (self.end - self.start) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| (self.start + step * i as f64) * unit).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub a: String,
    pub b: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PipelineSpec {
    /// Classical reshuffle and SVD of `U(t)`.
    Oracle,
    ChoiExact,
    ChoiTomographic { shots: u64, seed: Option<u64> },
    /// Without `shots` the expectation values are exact.
    Sequential { shots: Option<u64>, seed: Option<u64> },
}

impl PipelineSpec {
    /// Snapshot mode for grid row `row`, or `None` for the oracle. Sampled
    /// rows draw from consecutive seeds.
    pub fn snapshot_mode(&self, row: u64) -> Option<SnapshotMode> {
        let seed = |s: Option<u64>| s.unwrap_or_else(rng::default_seed).wrapping_add(row);
        match *self {
            PipelineSpec::Oracle => None,
            PipelineSpec::ChoiExact => Some(SnapshotMode::Exact),
            PipelineSpec::ChoiTomographic { shots, seed: s } => {
                Some(SnapshotMode::Tomographic { shots: Shots::Finite(shots), seed: seed(s) })
            }
            PipelineSpec::Sequential { shots, seed: s } => Some(SnapshotMode::Sequential {
                shots: shots.map_or(Shots::Infinite, Shots::Finite),
                seed: seed(s),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Output {
    #[serde(rename = "e_A")]
    EntanglingPowerSwap,
    #[serde(rename = "e_m")]
    EntanglingPowerMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub model: SpinModel,
    pub subsystem_a: Vec<usize>,
    pub time: TimeGrid,
    pub initial_state: InitialState,
    pub pipeline: PipelineSpec,
    #[serde(default)]
    pub outputs: Vec<Output>,
    /// Eigenvalue cutoff for the quantum pipelines; the snapshot default otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn wants(&self, output: Output) -> bool {
        self.outputs.contains(&output)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.schema != SCHEMA_VERSION {
            return invalid(format!("schema {} is not supported (expected {SCHEMA_VERSION})", self.schema));
        }
        let n = self.model.n_qubits;
        relabel_order(n, &self.subsystem_a)?;
        let n_a = self.subsystem_a.len();
        if 2 * n_a > n {
            return invalid(format!("subsystem A has {n_a} of {n} qubits; it must not be the larger side"));
        }
        let TimeGrid { start, end, n_points, .. } = self.time;
        if n_points < 2 || !start.is_finite() || !end.is_finite() {
            return invalid(format!("time grid needs finite endpoints and at least 2 points, got {:?}", self.time));
        }
        for (spec, len, side) in [(&self.initial_state.a, n_a, "a"), (&self.initial_state.b, n - n_a, "b")] {
            if spec.chars().count() != len {
                return invalid(format!("initial_state.{side} = {spec:?} must describe {len} qubits"));
            }
            parse_product_state(spec)?;
        }
        if let PipelineSpec::ChoiTomographic { shots: 0, .. } | PipelineSpec::Sequential { shots: Some(0), .. } =
            self.pipeline
        {
            return invalid("shots must be positive".into());
        }
        if self.wants(Output::EntanglingPowerMean) && self.pipeline != PipelineSpec::Oracle {
            return invalid("e_m needs the B factors and is only available with the oracle pipeline".into());
        }
        if let Some(th) = self.threshold {
            if !(th > 0.0 && th < 1.0) {
                return invalid(format!("threshold {th} outside (0, 1)"));
            }
        }
        Ok(())
    }
}
