use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, String),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no rows to fit")]
    Empty,
    #[error("no row satisfies omega*h/theta <= {cutoff}")]
    AllExcluded { cutoff: f64 },
    #[error("series omega = {omega}, p = {p} has {count} rows, at least {needed} are needed")]
    TooFewRows {
        omega: f64,
        p: usize,
        count: usize,
        needed: usize,
    },
    #[error("series omega = {omega}, p = {p} has identical mesh sizes")]
    DegenerateSeries { omega: f64, p: usize },
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] maxwell_core::error::SolverError),
    #[error(transparent)]
    Fem(#[from] maxwell_core::error::FemError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("i/o error on {0}: {1}")]
    Io(PathBuf, String),
    #[error("malformed table {0}: {1}")]
    Table(PathBuf, String),
}
