//! `qtpd`: tensor product decompositions of unitaries from the command line.
//!
//! Results go to stdout as JSON (CSV for `sweep`) unless `--out` is given.
//! Exit status is 0 on success, 1 for usage or validation errors and 2 when
//! the numerics fail.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qtpd_core::analysis::decoherence_free_check;
use qtpd_core::experiments::{analytic_two_qubit, run_sweep, ExperimentConfig};
use qtpd_core::io::{parse_product_state, read_matrix};
use qtpd_core::qtpd::{choi_reduced_exact, distill, extract_factors, run_pipeline, Shots, SnapshotMode};
use qtpd_core::rng;
use qtpd_core::tpd::classical_tpd;
use qtpd_core::{BipartiteSplit, CMatrix, Error};

#[derive(Parser)]
#[command(name = "qtpd", version, about = "Tensor product decomposition of unitaries via simulated Choi-state tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical decomposition by reshuffling and SVD.
    Tpd {
        matrix: PathBuf,
        #[command(flatten)]
        split: SplitArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Factors from a (simulated) Choi-state snapshot.
    Qtpd {
        matrix: PathBuf,
        #[command(flatten)]
        split: SplitArg,
        #[arg(long, value_enum, default_value_t = Mode::ChoiExact)]
        mode: Mode,
        /// Shots per measurement setting; required for choi-tomographic.
        #[arg(long)]
        shots: Option<u64>,
        /// Defaults to $QTPD_SEED, or a fixed seed when unset.
        #[arg(long)]
        seed: Option<u64>,
        /// Eigenvalue cutoff in (0, 1); derived from the snapshot error if omitted.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Measures the distillation projectors on `U(|Φ⁺⟩ ⊗ |state⟩)`.
    ///
    /// The state string covers the B qubits, which fixes the split.
    Distill {
        matrix: PathBuf,
        /// One character per B qubit out of 0 1 + - r l.
        #[arg(long)]
        state: String,
        /// Report only this branch.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Runs a sweep config and writes its CSV.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Closed forms for the two-qubit Heisenberg model.
    Analytic2q {
        /// Isotropic coupling, overridden per axis by --jx/--jy/--jz.
        #[arg(long = "J", default_value_t = 1.0)]
        j: f64,
        #[arg(long)]
        jx: Option<f64>,
        #[arg(long)]
        jy: Option<f64>,
        #[arg(long)]
        jz: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Checks whether a basis change turns the unitary into a product.
    DfsCheck {
        matrix: PathBuf,
        #[command(flatten)]
        split: SplitArg,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Same as choi-exact.
    Exact,
    ChoiExact,
    ChoiTomographic,
    Sequential,
}

#[derive(Args)]
struct SplitArg {
    /// Qubit counts `nA,nB` with nA ≤ nB.
    #[arg(long, value_parser = parse_split)]
    split: BipartiteSplit,
}

#[derive(Args)]
struct OutArg {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<BipartiteSplit, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected nA,nB, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    BipartiteSplit::new(parse(a)?, parse(b)?).map_err(|e| e.to_string())
}

fn emit(out: &OutArg, text: &str) -> qtpd_core::Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(out: &OutArg, value: &Value) -> qtpd_core::Result<()> {
    emit(out, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_unitary(path: &Path) -> qtpd_core::Result<CMatrix> {
    let u = read_matrix(path)?;
    u.require_unitary(1e-9)?;
    Ok(u)
}

fn snapshot_mode(mode: Mode, shots: Option<u64>, seed: Option<u64>) -> qtpd_core::Result<SnapshotMode> {
    let seed = seed.unwrap_or_else(rng::default_seed);
    if shots == Some(0) {
        return Err(Error::InvalidArgument("--shots must be positive".into()));
    }
    Ok(match mode {
        Mode::Exact | Mode::ChoiExact => SnapshotMode::Exact,
        Mode::ChoiTomographic => {
            let n = shots.ok_or_else(|| Error::InvalidArgument("choi-tomographic needs --shots".into()))?;
            SnapshotMode::Tomographic { shots: Shots::Finite(n), seed }
        }
        Mode::Sequential => SnapshotMode::Sequential { shots: shots.map_or(Shots::Infinite, Shots::Finite), seed },
    })
}

fn run(command: Command) -> qtpd_core::Result<()> {
    match command {
        Command::Tpd { matrix, split, out } => {
            let tpd = classical_tpd(&read_matrix(matrix)?, split.split)?;
            emit_json(&out, &serde_json::to_value(&tpd)?)
        }
        Command::Qtpd { matrix, split, mode, shots, seed, threshold, out } => {
            let u = load_unitary(&matrix)?;
            let (snap, factors) = run_pipeline(&u, split.split, snapshot_mode(mode, shots, seed)?, threshold)?;
            emit_json(
                &out,
                &json!({
                    "factors": factors,
                    "provenance": snap.provenance,
                    "error_estimate": snap.error_estimate,
                }),
            )
        }
        Command::Distill { matrix, state, k, out } => {
            let u = load_unitary(&matrix)?;
            let psi = parse_product_state(&state)?;
            let n = u.rows().trailing_zeros() as usize;
            let n_b = state.chars().count();
            if !u.rows().is_power_of_two() || n_b >= n {
                return Err(Error::InvalidArgument(format!(
                    "a {0}x{0} unitary has no B side of {n_b} qubits",
                    u.rows()
                )));
            }
            let split = BipartiteSplit::new(n - n_b, n_b)?;
            let factors = extract_factors(&choi_reduced_exact(&u, split)?, None)?;
            let mut result = distill(&u, &factors, &psi)?;
            if let Some(k) = k {
                if k >= result.branches.len() {
                    return Err(Error::InvalidArgument(format!("--k {k} but only {} factors", result.branches.len())));
                }
                result.branches = vec![result.branches.swap_remove(k)];
            }
            emit_json(&out, &json!({ "s": factors.s, "distillation": result }))
        }
        Command::Sweep { config, out } => {
            let config = ExperimentConfig::load(config)?;
            let (rows, csv) = run_sweep(&config)?;
            let failed = rows.iter().filter(|r| r.values.is_err()).count();
            if failed > 0 {
                eprintln!("warning: {failed} of {} rows failed; see the error column", rows.len());
            }
            emit(&out, &csv)
        }
        Command::Analytic2q { j, jx, jy, jz, t, out } => {
            let a = analytic_two_qubit(jx.unwrap_or(j), jy.unwrap_or(j), jz.unwrap_or(j), t);
            let mut value = serde_json::to_value(&a)?;
            value["occupation"] = a.occupation().into();
            value["entropy_norm"] = a.entropy_norm().into();
            value["nonlocality_norm"] = a.nonlocality_norm().into();
            emit_json(&out, &value)
        }
        Command::DfsCheck { matrix, split, tol, out } => {
            let check = decoherence_free_check(&load_unitary(&matrix)?, split.split, tol)?;
            emit_json(&out, &serde_json::to_value(&check)?)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
