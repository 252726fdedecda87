//! Sweeps over frequency, mesh level and order.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use maxwell_core::error::SolverError;
use maxwell_core::gamma::{build_prolongation, report, GammaEstimator, GammaReport};
use maxwell_core::source::TimeHarmonicSolver;
use maxwell_core::spectral::{solve_window, stability_constants};
use maxwell_core::system::MaxwellSystem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::LabError;

/// One line of the sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub omega: f64,
    pub h: f64,
    pub p: usize,
    pub delta: f64,
    pub c_s: f64,
    pub gamma: f64,
    pub method: String,
    pub iters: usize,
    pub bound_term1: f64,
    pub bound_term2: f64,
}

impl Row {
    pub fn from_report(r: &GammaReport) -> Self {
        Self {
            omega: r.omega,
            h: r.h,
            p: r.p,
            delta: r.delta,
            c_s: r.c_s,
            gamma: r.gamma,
            method: r.method.tag().to_string(),
            iters: r.iterations,
            bound_term1: r.bound_term1(),
            bound_term2: r.bound_term2(),
        }
    }

    /// `ω h / ϑ`, recovered from the first bound term.
    pub fn smallness(&self) -> f64 {
        self.bound_term1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowKey {
    pub omega: f64,
    pub level: usize,
    pub p: usize,
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "omega={} level={} p={}", self.omega, self.level, self.p)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Timings {
    pub assembly: Duration,
    pub prolongation: Duration,
    pub factorization: Duration,
    pub eigen: Duration,
    pub gamma: Duration,
}

#[derive(Clone, Debug)]
pub struct RowResult {
    pub key: RowKey,
    pub row: Row,
    pub fine_h: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
    /// Fine-space eigenvalues bracketing ω².
    pub eigenvalues: Vec<f64>,
    pub timings: Timings,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Done(Box<RowResult>),
    /// Resonant frequency; not an error of the sweep.
    Skipped {
        key: RowKey,
        reason: String,
    },
    Failed {
        key: RowKey,
        reason: String,
    },
}

impl Outcome {
    pub fn key(&self) -> RowKey {
        match self {
            Outcome::Done(r) => r.key,
            Outcome::Skipped { key, .. } | Outcome::Failed { key, .. } => *key,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    /// In canonical order: frequency, then order, then level, as listed in the
    /// configuration.
    pub outcomes: Vec<Outcome>,
}

impl SweepOutput {
    pub fn results(&self) -> impl Iterator<Item = &RowResult> {
        self.outcomes.iter().filter_map(|o| match o {
            Outcome::Done(r) => Some(r.as_ref()),
            _ => None,
        })
    }

    pub fn rows(&self) -> Vec<Row> {
        self.results().map(|r| r.row.clone()).collect()
    }

    pub fn failures(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, Outcome::Failed { .. }))
            .count()
    }
}

/// Canonical list of row keys.
pub fn row_keys(config: &ExperimentConfig) -> Vec<RowKey> {
    let s = &config.sweep;
    let mut keys = Vec::new();
    for &omega in &s.frequencies {
        for &p in &s.orders {
            for &level in &s.levels {
                keys.push(RowKey { omega, level, p });
            }
        }
    }
    keys
}

/// Per-row seed, fixed by the base seed and the position in canonical order.
pub fn row_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Computes one row: fine spectrum near ω, stability constants and γ̂ against
/// the reference refinement.
pub fn run_row(config: &ExperimentConfig, key: RowKey, seed: u64) -> Outcome {
    match compute_row(config, key, seed) {
        Ok(r) => Outcome::Done(Box::new(r)),
        Err(LabError::Solver(e @ SolverError::Resonant { .. })) => Outcome::Skipped {
            key,
            reason: e.to_string(),
        },
        Err(e) => Outcome::Failed {
            key,
            reason: e.to_string(),
        },
    }
}

fn compute_row(config: &ExperimentConfig, key: RowKey, seed: u64) -> Result<RowResult, LabError> {
    let mut timings = Timings::default();
    let clock = Instant::now();
    let (coarse_mesh, fine_mesh) = config.mesh_pair(key.level)?;
    let coeffs = config.coefficients()?;
    let coarse = MaxwellSystem::new(coarse_mesh, key.p, &coeffs)?;
    let fine = MaxwellSystem::new(fine_mesh, key.p, &coeffs)?;
    timings.assembly = clock.elapsed();

    let clock = Instant::now();
    let prolongation = build_prolongation(&coarse.nedelec, &fine.nedelec)?;
    timings.prolongation = clock.elapsed();

    let clock = Instant::now();
    let solver = match TimeHarmonicSolver::new(&fine, key.omega) {
        Ok(s) => s,
        Err(e) => {
            // A failed factorization at a resonance is reported as one.
            let dec = solve_window(
                &fine,
                key.omega,
                config.eigen.initial,
                &config.eigen_options(),
                None,
            )?;
            stability_constants(key.omega, &dec.eigenvalues)?;
            return Err(e.into());
        }
    };
    timings.factorization = clock.elapsed();

    let clock = Instant::now();
    let dec = solve_window(
        &fine,
        key.omega,
        config.eigen.initial,
        &config.eigen_options(),
        solver.factor(),
    )?;
    let stability = stability_constants(key.omega, &dec.eigenvalues)?;
    timings.eigen = clock.elapsed();

    let clock = Instant::now();
    let estimator = GammaEstimator::with_solver(solver, &prolongation)?;
    let gamma = report(
        &estimator,
        &fine,
        coarse.h(),
        &stability,
        config.gamma_method(),
        seed,
    )?;
    timings.gamma = clock.elapsed();

    Ok(RowResult {
        key,
        row: Row::from_report(&gamma),
        fine_h: fine.h(),
        n_coarse: coarse.n(),
        n_fine: fine.n(),
        eigenvalues: dec.eigenvalues,
        timings,
    })
}

/// Runs all rows on a pool of `threads` workers (all cores when `None`). The
/// output does not depend on the number of workers.
pub fn run_sweep(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<SweepOutput, LabError> {
    config.validate()?;
    let keys = row_keys(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| LabError::Io(PathBuf::new(), e.to_string()))?;
    let outcomes = pool.install(|| {
        keys.par_iter()
            .enumerate()
            .map(|(i, &key)| run_row(config, key, row_seed(config.seed, i)))
            .collect()
    });
    Ok(SweepOutput { outcomes })
}

pub const SWEEP_FILE: &str = "sweep.csv";
pub const EIGEN_FILE: &str = "eigen.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const LOG_FILE: &str = "sweep.log";

/// Writes `sweep.csv`, `eigen.csv` and `sweep.log` (all deterministic) and
/// `timings.csv` (wall-clock, not deterministic). Each file is written to a
/// temporary name and renamed into place.
pub fn write_sweep(dir: &Path, output: &SweepOutput) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io(dir.to_path_buf(), e.to_string()))?;
    write_atomic(&dir.join(SWEEP_FILE), &rows_csv(&output.rows())?)?;

    let mut eig = csv::Writer::from_writer(Vec::new());
    let mut times = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| LabError::Io(dir.to_path_buf(), e.to_string());
    eig.write_record(["omega", "h", "fine_h", "p", "index", "lambda"])
        .map_err(csv_err)?;
    times
        .write_record([
            "omega",
            "h",
            "p",
            "assembly_s",
            "prolongation_s",
            "factorization_s",
            "eigen_s",
            "gamma_s",
        ])
        .map_err(csv_err)?;
    for r in output.results() {
        for (i, l) in r.eigenvalues.iter().enumerate() {
            eig.serialize((r.row.omega, r.row.h, r.fine_h, r.row.p, i, l))
                .map_err(csv_err)?;
        }
        let t = &r.timings;
        times
            .serialize((
                r.row.omega,
                r.row.h,
                r.row.p,
                t.assembly.as_secs_f64(),
                t.prolongation.as_secs_f64(),
                t.factorization.as_secs_f64(),
                t.eigen.as_secs_f64(),
                t.gamma.as_secs_f64(),
            ))
            .map_err(csv_err)?;
    }
    write_atomic(
        &dir.join(EIGEN_FILE),
        &eig.into_inner().expect("in-memory writer"),
    )?;
    write_atomic(
        &dir.join(TIMINGS_FILE),
        &times.into_inner().expect("in-memory writer"),
    )?;

    let mut log = String::new();
    for o in &output.outcomes {
        match o {
            Outcome::Done(_) => {}
            Outcome::Skipped { key, reason } => log.push_str(&format!("skipped {key}: {reason}\n")),
            Outcome::Failed { key, reason } => log.push_str(&format!("failed {key}: {reason}\n")),
        }
    }
    write_atomic(&dir.join(LOG_FILE), log.as_bytes())
}

pub fn rows_csv(rows: &[Row]) -> Result<Vec<u8>, LabError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(GammaReport::CSV_HEADER.split(','))
            .map_err(|e| LabError::Io(PathBuf::new(), e.to_string()))?;
    }
    for r in rows {
        w.serialize(r)
            .map_err(|e| LabError::Io(PathBuf::new(), e.to_string()))?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, LabError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| LabError::Io(path.to_path_buf(), e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| LabError::Table(path.to_path_buf(), e.to_string()))
}

/// Eigenvalue records `(omega, h, fine_h, p, index, lambda)`.
pub type EigenRecord = (f64, f64, f64, usize, usize, f64);

pub fn read_eigen(path: &Path) -> Result<Vec<EigenRecord>, LabError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| LabError::Io(path.to_path_buf(), e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<EigenRecord>, _>>()
        .map_err(|e| LabError::Table(path.to_path_buf(), e.to_string()))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let tmp = path.with_extension("tmp");
    let io = |e: std::io::Error| LabError::Io(path.to_path_buf(), e.to_string());
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
