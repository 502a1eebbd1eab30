
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    combinations, entangling_power_mean, entangling_power_swap, nonlocality, observables, open_surrogate,
    subsystem_swap, OverlapSource,
};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Output};
use crate::experiments::model::{build_hamiltonian, relabel_order, SpinModel};
use crate::io::parse_product_state;
use crate::linalg::{BipartiteSplit, CMatrix, C64};
use crate::qtpd::{branch_vectors, run_pipeline, SnapshotMode};
use crate::statevector::Propagator;
use crate::tpd::classical_tpd;

/// Values at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowValues {
    pub s_a_norm: f64,
    pub occupation: f64,
    pub s_state_norm: f64,
    pub e_a: Option<f64>,
    pub e_m: Option<f64>,
    /// Reduced state of A predicted by the surrogate.
    pub sigma_a: CMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    /// `Err` holds the failure message for this point.
    pub values: std::result::Result<RowValues, String>,
}

/// A validated config with the model relabeled and the propagator diagonalized.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub config: ExperimentConfig,
    /// Qubit order mapping the config model to the simulated one.
    pub order: Vec<usize>,
    pub model: SpinModel,
    pub split: BipartiteSplit,
    pub psi_a: Vec<C64>,
    pub psi_b: Vec<C64>,
    propagator: Propagator,
}

impl Sweep {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let n = config.model.n_qubits;
        let n_a = config.subsystem_a.len();
        let order = relabel_order(n, &config.subsystem_a)?;
        let model = config.model.relabeled(&order)?;
        let propagator = Propagator::new(&build_hamiltonian(&model)?)?;
        Ok(Sweep {
            config: config.clone(),
            order,
            model,
            split: BipartiteSplit::new(n_a, n - n_a)?,
            psi_a: parse_product_state(&config.initial_state.a)?,
            psi_b: parse_product_state(&config.initial_state.b)?,
            propagator,
        })
    }

    pub fn times(&self) -> Vec<f64> {
        self.config.time.times()
    }

    /// `U(t)` in the relabeled qubit order.
    pub fn unitary(&self, t: f64) -> CMatrix {
        self.propagator.at(t)
    }

    /// All grid points, in grid order.
    pub fn run(&self) -> Vec<SweepRow> {
        self.times()
            .into_par_iter()
            .enumerate()
            .map(|(i, t)| SweepRow { t, values: self.point(i as u64, t).map_err(|e| e.to_string()) })
            .collect()
    }

    /// Values at grid row `row`, time `t`.
    pub fn point(&self, row: u64, t: f64) -> Result<RowValues> {
        let u = self.unitary(t);
        let split = self.split;
        let log_d2 = ((split.d_a() * split.d_a()) as f64).ln();
        let want_e_a = self.config.wants(Output::EntanglingPowerSwap);
        let (s_a, sigma_a, e_a, e_m) = match self.config.pipeline.snapshot_mode(row) {
            None => {
                let tpd = classical_tpd(&u, split)?;
                let surrogate =
                    open_surrogate(&tpd.a_ops, OverlapSource::Oracle { s: &tpd.s, b_ops: &tpd.b_ops }, &self.psi_b)?;
                let e_a = want_e_a.then(|| entangling_power_swap(&u, split)).transpose()?;
                let e_m = self.config.wants(Output::EntanglingPowerMean).then(|| entangling_power_mean(&tpd));
                (nonlocality(&tpd.s)?, surrogate.evolve(&self.psi_a)?, e_a, e_m)
            }
            Some(mode) => {
                let (_, factors) = run_pipeline(&u, split, mode, self.config.threshold)?;
                let chi = branch_vectors(&u, &factors, &self.psi_b)?;
                let surrogate = open_surrogate(&factors.a_ops, OverlapSource::Distilled(&chi), &self.psi_b)?;
                let s_a = quantum_nonlocality(&factors.s)?;
                let e_a = if want_e_a {
                    let mut total = s_a;
                    for (c_index, c) in combinations(split.n_b(), split.n_a()).into_iter().enumerate() {
                        let swapped = u.matmul(&subsystem_swap(split, &c)?);
                        let (_, f) = run_pipeline(&swapped, split, reseed(mode, c_index), self.config.threshold)?;
                        total += quantum_nonlocality(&f.s)? - log_d2;
                    }
                    Some(total / log_d2)
                } else {
                    None
                };
                (s_a, surrogate.evolve(&self.psi_a)?, e_a, None)
            }
        };
        let obs = observables(&sigma_a, split.n_a())?;
        Ok(RowValues {
            s_a_norm: s_a / log_d2,
            occupation: obs.occupation,
            s_state_norm: obs.entropy_norm,
            e_a,
            e_m,
            sigma_a,
        })
    }
}

/// Sampled spectra lose a little weight to truncation and noise.
fn quantum_nonlocality(s: &[f64]) -> Result<f64> {
    let total: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(total > 0.0) {
        return Err(Error::Numerical("extracted spectrum is empty".into()));
    }
    nonlocality(&s.iter().map(|x| x / total).collect::<Vec<_>>())
}

/// Separate seed stream for the swapped unitaries used by `e_A`.
fn reseed(mode: SnapshotMode, c_index: usize) -> SnapshotMode {
    let bump = |seed: u64| seed.wrapping_add(((c_index as u64) + 1) << 32);
    match mode {
        SnapshotMode::Exact => mode,
        SnapshotMode::Tomographic { shots, seed } => SnapshotMode::Tomographic { shots, seed: bump(seed) },
        SnapshotMode::Sequential { shots, seed } => SnapshotMode::Sequential { shots, seed: bump(seed) },
    }
}

/// C `printf("%.12g")`.
pub fn format_g(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (PRECISION - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV with header `t,S_A_norm,occupation,S_state_norm` followed by the
/// requested `e_A`/`e_m` columns. An `error` column is appended only when a
/// row failed; that row leaves its numeric fields empty.
pub fn to_csv(config: &ExperimentConfig, rows: &[SweepRow]) -> String {
    let e_a = config.wants(Output::EntanglingPowerSwap);
    let e_m = config.wants(Output::EntanglingPowerMean);
    let any_failed = rows.iter().any(|r| r.values.is_err());
    let mut header = vec!["t", "S_A_norm", "occupation", "S_state_norm"];
    for (on, name) in [(e_a, "e_A"), (e_m, "e_m"), (any_failed, "error")] {
        if on {
            header.push(name);
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    let opt = |v: Option<f64>| v.map(format_g).unwrap_or_default();
    for row in rows {
        let mut record = vec![format_g(row.t)];
        match &row.values {
            Ok(v) => {
                record.extend([format_g(v.s_a_norm), format_g(v.occupation), format_g(v.s_state_norm)]);
                if e_a {
                    record.push(opt(v.e_a));
                }
                if e_m {
                    record.push(opt(v.e_m));
                }
                if any_failed {
                    record.push(String::new());
                }
            }
            Err(msg) => {
                record.resize(header.len() - 1, String::new());
                record.push(msg.clone());
            }
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// Prepares, runs and formats a sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<(Vec<SweepRow>, String)> {
    let rows = Sweep::prepare(config)?.run();
    let csv = to_csv(config, &rows);
    Ok((rows, csv))
}
