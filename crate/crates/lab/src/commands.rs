//! Implementations of the command-line subcommands.

use std::fmt::Write as _;
use std::path::Path;

use maxwell_core::quadrature::QuadratureRule;
use maxwell_core::source::{
    compute_splitting, export_field_csv, verify_residual_identity, SourceProblem,
    TimeHarmonicSolver,
};
use maxwell_core::space::{BoundaryCondition, FeSpace};
use maxwell_core::spectral::{solve_eigs_with, solve_window, stability_constants};
use maxwell_core::system::MaxwellSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::LabError;
use crate::fit::{fit_bound, BoundTerms, FitOptions};
use crate::report::render_report;
use crate::sweep::{
    read_eigen, read_rows, row_keys, row_seed, run_row, run_sweep, write_atomic, write_sweep,
    Outcome, Row, RowKey, EIGEN_FILE, SWEEP_FILE,
};

/// Mesh, subdomain and DOF counts for every configured level.
pub fn mesh_info(config: &ExperimentConfig, levels: &[usize]) -> Result<String, LabError> {
    let mut s = String::new();
    for &level in levels {
        let mesh = std::sync::Arc::new(config.mesh(level)?);
        let st = mesh.statistics();
        let d = config.divisions(level);
        let _ = writeln!(
            s,
            "level {level}: divisions {}x{}x{}, {} vertices, {} edges, {} faces, {} tets, h = {:.6}, quality = {:.6}",
            d[0],
            d[1],
            d[2],
            mesh.n_vertices(),
            mesh.edges().len(),
            mesh.faces().len(),
            mesh.n_tets(),
            st.h,
            st.quality
        );
        for (label, (n, v)) in st
            .tets_per_subdomain
            .iter()
            .zip(&st.volume_per_subdomain)
            .enumerate()
        {
            let _ = writeln!(s, "  subdomain {label}: {n} tets, volume {v:.6}");
        }
        for &p in &config.sweep.orders {
            let space = FeSpace::nedelec(mesh.clone(), p, BoundaryCondition::Zero)?;
            let _ = writeln!(s, "  p = {p}: {} free curl-conforming DOFs", space.n_free());
        }
    }
    Ok(s)
}

/// Smallest `count` cavity eigenpairs on the coarse mesh of `level`.
pub fn eigs(
    config: &ExperimentConfig,
    level: usize,
    p: usize,
    count: usize,
    out: &Path,
) -> Result<String, LabError> {
    let system = coarse_system(config, level, p)?;
    let dec = solve_eigs_with(&system, count, &config.eigen_options())?;
    let csv = dec.to_csv();
    create_dir(out)?;
    write_atomic(&out.join(format!("eigs_l{level}_p{p}.csv")), csv.as_bytes())?;
    Ok(csv)
}

/// Source solve with a random divergence-free `g`; writes the sampled field.
pub fn solve(
    config: &ExperimentConfig,
    omega: f64,
    level: usize,
    p: usize,
    seed: u64,
    out: &Path,
) -> Result<String, LabError> {
    let system = coarse_system(config, level, p)?;
    let (_, e, delta, residual) = source_solution(config, &system, omega, seed)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "omega = {omega}, level = {level}, p = {p}, free DOFs = {}",
        system.n()
    );
    let _ = writeln!(s, "resonance gap = {delta:.6e}");
    let _ = writeln!(s, "energy norm = {:.12e}", system.energy_norm(&e, omega));
    let _ = writeln!(s, "galerkin residual = {:.3e}", residual);
    let _ = writeln!(
        s,
        "divergence certificate = {:.3e}",
        system.relative_divergence(&e)
    );
    create_dir(out)?;
    let field = export_field_csv(&system, &e, &QuadratureRule::tet(1));
    write_atomic(
        &out.join(format!("field_l{level}_p{p}.csv")),
        field.as_bytes(),
    )?;
    Ok(s)
}

/// Regularity splitting of the solution for a random divergence-free `g`.
pub fn split(
    config: &ExperimentConfig,
    omega: f64,
    ell: usize,
    level: usize,
    p: usize,
    seed: u64,
    out: &Path,
) -> Result<String, LabError> {
    let system = coarse_system(config, level, p)?;
    let (problem, e, _, _) = source_solution(config, &system, omega, seed)?;
    let r = compute_splitting(&system, &problem, &e, ell)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "omega = {omega}, Omega = {:.6e}, ell = {ell}",
        r.omega_scale
    );
    let _ = writeln!(s, "reconstruction error = {:.3e}", r.reconstruction_error());
    let _ = writeln!(
        s,
        "residual identity = {:.3e}",
        verify_residual_identity(&system, &r)
    );
    let _ = writeln!(s, "divergence certificate = {:.3e}", r.divergence);
    let _ = writeln!(s, "growth constant = {:.6e}", r.growth_constant());
    let mut csv = String::from("j,energy_norm,curl_norm,multiplier\n");
    for j in 0..=ell {
        let m = if j == 0 { 0.0 } else { r.multipliers[j - 1] };
        let _ = writeln!(
            csv,
            "{j},{:e},{:e},{:e}",
            r.energy_norms[j], r.curl_norms[j], m
        );
    }
    s.push_str(&csv);
    create_dir(out)?;
    write_atomic(
        &out.join(format!("split_l{level}_p{p}.csv")),
        csv.as_bytes(),
    )?;
    Ok(s)
}

/// One sweep row, computed alone. Returns the row and whether it failed.
pub fn gamma(config: &ExperimentConfig, omega: f64, level: usize, p: usize) -> (String, bool) {
    let key = RowKey { omega, level, p };
    let index = row_keys(config).iter().position(|k| *k == key).unwrap_or(0);
    match run_row(config, key, row_seed(config.seed, index)) {
        Outcome::Done(r) => {
            let bytes = crate::sweep::rows_csv(std::slice::from_ref(&r.row)).unwrap_or_default();
            (String::from_utf8_lossy(&bytes).into_owned(), false)
        }
        Outcome::Skipped { key, reason } => (format!("skipped {key}: {reason}\n"), false),
        Outcome::Failed { key, reason } => (format!("failed {key}: {reason}\n"), true),
    }
}

/// Runs the configured sweep and writes its tables. Returns the number of
/// failed rows.
pub fn sweep(
    config: &ExperimentConfig,
    threads: Option<usize>,
    out: &Path,
) -> Result<(String, usize), LabError> {
    let output = run_sweep(config, threads)?;
    write_sweep(out, &output)?;
    let mut s = String::new();
    for o in &output.outcomes {
        match o {
            Outcome::Done(r) => {
                let _ = writeln!(
                    s,
                    "{}: gamma = {:.6e}, c_s = {:.6e}, delta = {:.6e}",
                    r.key, r.row.gamma, r.row.c_s, r.row.delta
                );
            }
            Outcome::Skipped { key, reason } => {
                let _ = writeln!(s, "{key}: skipped, {reason}");
            }
            Outcome::Failed { key, reason } => {
                let _ = writeln!(s, "{key}: failed, {reason}");
            }
        }
    }
    Ok((s, output.failures()))
}

/// Fits the bound to a written sweep and renders the plots and summary.
pub fn report(config: &ExperimentConfig, out: &Path) -> Result<String, LabError> {
    let rows: Vec<Row> = read_rows(&out.join(SWEEP_FILE))?;
    let eigen_path = out.join(EIGEN_FILE);
    let eigen = if eigen_path.exists() {
        read_eigen(&eigen_path)?
    } else {
        Vec::new()
    };
    let opts = FitOptions {
        cutoff: config.fit.cutoff,
        tail: config.fit.tail,
        terms: BoundTerms::Full,
        min_rows: 3,
    };
    let (fit, note) = match fit_bound(&rows, &opts) {
        Ok(f) => (Some(f), String::new()),
        Err(e) => (None, format!("bound not fitted: {e}\n")),
    };
    let report = render_report(&rows, fit.as_ref(), &eigen);
    let summary = format!("{note}{}", report.summary);
    write_atomic(&out.join("gamma.svg"), report.gamma_svg.as_bytes())?;
    write_atomic(&out.join("eigen.svg"), report.eigen_svg.as_bytes())?;
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    Ok(summary)
}

fn create_dir(out: &Path) -> Result<(), LabError> {
    std::fs::create_dir_all(out).map_err(|e| LabError::Io(out.to_path_buf(), e.to_string()))
}

fn coarse_system(
    config: &ExperimentConfig,
    level: usize,
    p: usize,
) -> Result<MaxwellSystem, LabError> {
    let mesh = std::sync::Arc::new(config.mesh(level)?);
    Ok(MaxwellSystem::new(mesh, p, &config.coefficients()?)?)
}

/// Random unit divergence-free source, checked against the discrete spectrum,
/// and its solution. Returns the problem, `e_h`, the resonance gap and the
/// Galerkin residual.
fn source_solution(
    config: &ExperimentConfig,
    system: &MaxwellSystem,
    omega: f64,
    seed: u64,
) -> Result<(SourceProblem, Vec<f64>, f64, f64), LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = system.random_div_free(&mut rng)?;
    let problem = SourceProblem::new(system, omega, g, false)?;
    let solver = TimeHarmonicSolver::new(system, omega)?;
    let dec = solve_window(
        system,
        omega,
        config.eigen.initial,
        &config.eigen_options(),
        solver.factor(),
    )?;
    let st = stability_constants(omega, &dec.eigenvalues)?;
    let e = solver.solve(&problem.g);
    let residual = solver.galerkin_residual(&e, &problem.g);
    Ok((problem, e, st.delta, residual))
}
