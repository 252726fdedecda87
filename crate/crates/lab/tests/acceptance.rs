//! Acceptance run: one verdict line per criterion, with the measured values
//! printed above it. Exits nonzero when any criterion fails.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use maxwell_core::assembly::assemble;
use maxwell_core::coefficients::{CoefficientField, Material};
use maxwell_core::gamma::{best_approx_error, build_prolongation};
use maxwell_core::mesh::{build_box_mesh, BoxDomain, Mesh};
use maxwell_core::source::{
    compute_splitting, discrepancy, verify_residual_identity, SourceProblem, TimeHarmonicSolver,
};
use maxwell_core::sparse::{norm_inf, Role};
use maxwell_core::spectral::{solve_eigs_with, solve_window, stability_constants, EigenOptions};
use maxwell_core::system::MaxwellSystem;
use maxwell_lab::commands;
use maxwell_lab::config::ExperimentConfig;
use maxwell_lab::fit::{fit_bound, BoundTerms, FitOptions};
use maxwell_lab::sweep::{run_sweep, Row};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI: f64 = std::f64::consts::PI;

struct Check {
    lines: Vec<String>,
    ok: bool,
}

impl Check {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            ok: true,
        }
    }

    fn expect(&mut self, cond: bool, msg: impl Into<String>) {
        self.ok &= cond;
        self.lines.push(format!(
            "    {} {}",
            if cond { "ok  " } else { "FAIL" },
            msg.into()
        ));
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.lines.push(format!("         {}", msg.into()));
    }
}

fn cube(n: usize) -> Mesh {
    build_box_mesh(&BoxDomain::cube(PI), [n, n, n], &[]).unwrap()
}

fn vacuum() -> CoefficientField {
    CoefficientField::uniform(Material::vacuum(), &BoxDomain::cube(PI)).unwrap()
}

fn system(n: usize, p: usize) -> MaxwellSystem {
    MaxwellSystem::new(Arc::new(cube(n)), p, &vacuum()).unwrap()
}

fn tight() -> EigenOptions {
    EigenOptions {
        tolerance: 1e-13,
        ..EigenOptions::default()
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name);
    ExperimentConfig::load(&path).unwrap()
}

/// Levels 1-3 of the cube are the 2x2x2, 4x4x4 and 8x8x8 meshes.
fn cavity_eigenvalues(c: &mut Check) {
    let mut errors = [Vec::new(), Vec::new()];
    for p in 0..=1 {
        for level in 1..=3 {
            let n = 1 << level;
            let s = system(n, p);
            let dec = solve_eigs_with(&s, 6, &EigenOptions::default()).unwrap();
            let l = &dec.eigenvalues;
            c.note(format!(
                "p={p} level={level} ({n}^3 cells, {} DOFs): {:.6} {:.6} {:.6} | {:.6} {:.6} | {:.6}",
                s.n(),
                l[0],
                l[1],
                l[2],
                l[3],
                l[4],
                l[5]
            ));
            errors[p].push((l[0] - 2.0).abs() / 2.0);
            if level == 3 {
                let rel = |x: f64, t: f64| (x - t).abs() / t;
                c.expect(
                    l[..3].iter().all(|&x| rel(x, 2.0) <= 0.02),
                    format!("p={p}: first cluster of three within 2% of 2"),
                );
                c.expect(
                    l[3..5].iter().all(|&x| rel(x, 3.0) <= 0.02) && l[5] > 3.3,
                    format!(
                        "p={p}: next cluster of two within 2% of 3, sixth value {:.4} beyond it",
                        l[5]
                    ),
                );
                c.expect(
                    errors[p][2] <= 0.02,
                    format!(
                        "p={p}: relative error of lambda_1 {:.3e} <= 2%",
                        errors[p][2]
                    ),
                );
            }
        }
        let e = &errors[p];
        let rates: Vec<f64> = e.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let target = 2.0 * (p as f64 + 1.0);
        c.expect(
            (rates[1] - target).abs() <= 0.3,
            format!(
                "p={p}: rate {:.3} (levels 2-3; levels 1-2 give {:.3}), target {target} +- 0.3",
                rates[1], rates[0]
            ),
        );
    }
}

fn modal_identity(c: &mut Check) {
    let s = system(3, 1);
    let dec = solve_eigs_with(&s, 6, &tight()).unwrap();
    let mut worst = 0.0f64;
    for omega in [0.7, 1.2] {
        let solver = TimeHarmonicSolver::checked(&s, omega, &dec.eigenvalues).unwrap();
        for j in [0, 3, 5] {
            let phi = &dec.eigenvectors[j];
            let e = solver.solve(phi);
            let scale = omega / (dec.eigenvalues[j] - omega * omega);
            let expected: Vec<f64> = phi.iter().map(|x| scale * x).collect();
            let d = discrepancy(&e, &expected);
            c.note(format!(
                "omega={omega} mode {j} (lambda={:.6}): relative discrepancy {d:.2e}",
                dec.eigenvalues[j]
            ));
            worst = worst.max(d);
        }
    }
    c.expect(worst <= 1e-10, format!("e_h = omega/(lambda_j - omega^2) phi_j for 3 modes x 2 frequencies: worst {worst:.2e} <= 1e-10"));
}

fn stability_bound(c: &mut Check, rows: &[Row]) {
    let worst = rows
        .iter()
        .map(|r| r.c_s / (r.omega / r.delta))
        .fold(0.0f64, f64::max);
    c.expect(
        worst <= 1.0 + 1e-12,
        format!(
            "c_s <= omega/delta on all {} sweep rows: largest ratio {worst:.6}",
            rows.len()
        ),
    );
    // The ratio c_s delta / omega is sqrt(omega^2 + lambda) / (sqrt(lambda) + omega)
    // at the nearest eigenvalue, which tends to 1 once lambda >> omega^2.
    let s = system(4, 1);
    let opts = EigenOptions::default();
    let base = solve_window(&s, 0.1, 8, &opts, None).unwrap();
    let lambda = base.eigenvalues[0];
    for frac in [0.05, 0.02] {
        let omega = frac * lambda.sqrt();
        let dec = solve_window(&s, omega, 8, &opts, None).unwrap();
        let st = stability_constants(omega, &dec.eigenvalues).unwrap();
        let ratio = st.c_s / st.bound;
        let modal = (omega * omega + lambda).sqrt() / (lambda.sqrt() + omega);
        c.expect(
            ratio >= 0.95 && (ratio - modal).abs() <= 1e-12,
            format!("omega = {frac} sqrt(lambda_1) = {omega:.5}: c_s/(omega/delta) = {ratio:.6} (modal formula {modal:.6}) within 5% of 1"),
        );
    }
}

fn splitting_identities(c: &mut Check) {
    let omega = 0.8;
    for p in 1..=2 {
        let s = system(2, p);
        let ell = p + 1;
        let dec = solve_eigs_with(&s, 4, &tight()).unwrap();
        let solver = TimeHarmonicSolver::new(&s, omega).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17 + p as u64);
        let random = s.random_div_free(&mut rng).unwrap();
        for (label, g, mode) in [
            ("random g", random, None),
            ("g = phi_1", dec.eigenvectors[0].clone(), Some(0)),
        ] {
            let problem = SourceProblem::new(&s, omega, g, false).unwrap();
            let e = solver.solve(&problem.g);
            let r = compute_splitting(&s, &problem, &e, ell).unwrap();
            let zero = norm_inf(&r.terms[0]) == 0.0;
            let rec = r.reconstruction_error();
            let ident = verify_residual_identity(&s, &r);
            c.expect(zero, format!("p={p} {label}: e_0 = 0"));
            c.expect(
                rec <= 1e-12,
                format!("p={p} {label}: reconstruction {rec:.2e} <= 1e-12"),
            );
            c.expect(
                ident <= 1e-8,
                format!("p={p} {label}: K r_(k+2) = omega^2 M r_k, worst {ident:.2e} <= 1e-8"),
            );
            if let Some(j) = mode {
                let lambda = dec.eigenvalues[j];
                let phi = &dec.eigenvectors[j];
                let t = s.coeffs.theta() / s.coeffs.diameter();
                let scale_of = |k: usize| -> f64 {
                    if k % 2 == 1 {
                        t.powi(k as i32) * lambda.powi(-((k as i32 + 1) / 2))
                    } else {
                        0.0
                    }
                };
                let mut worst = 0.0f64;
                for k in 1..=ell {
                    let expected: Vec<f64> = phi.iter().map(|x| scale_of(k) * x).collect();
                    let d = if scale_of(k) == 0.0 {
                        norm_inf(&r.terms[k]) / norm_inf(&r.terms[1])
                    } else {
                        discrepancy(&r.terms[k], &expected)
                    };
                    worst = worst.max(d);
                }
                let odd = ell.div_ceil(2) as i32;
                let rs = omega / (lambda - omega * omega) * (omega * omega / lambda).powi(odd);
                let expected: Vec<f64> = phi.iter().map(|x| rs * x).collect();
                let dr = discrepancy(r.residual(), &expected);
                worst = worst.max(dr);
                c.expect(
                    worst <= 1e-8,
                    format!("p={p}: geometric-series closed form of terms and r_{ell} (lambda={lambda:.6} > omega^2): worst {worst:.2e} <= 1e-8"),
                );
            }
        }
    }
}

fn crude_bound(c: &mut Check, rows: &[Row]) {
    let worst = rows
        .iter()
        .map(|r| r.gamma - r.c_s)
        .fold(f64::NEG_INFINITY, f64::max);
    c.expect(
        worst <= 1e-9,
        format!(
            "gamma <= c_s on all {} sweep rows: largest gamma - c_s = {worst:.3e}",
            rows.len()
        ),
    );
}

fn bound_shape(c: &mut Check, main: &[Row], near: &[Row], cutoff: f64) {
    for r in main.iter().chain(near) {
        c.note(format!(
            "omega={} p={} h={:.4}: gamma={:.6} c_s={:.4} delta={:.5} terms {:.4} + {:.4} ({} iterations)",
            r.omega, r.p, r.h, r.gamma, r.c_s, r.delta, r.bound_term1, r.bound_term2, r.iters
        ));
    }
    let opts = FitOptions {
        cutoff,
        tail: 2,
        terms: BoundTerms::Full,
        min_rows: 3,
    };
    let fit = fit_bound(main, &opts).unwrap();
    let finest = main.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
    let coarser: Vec<Row> = main.iter().filter(|r| r.h > finest).cloned().collect();
    let dropped = fit_bound(&coarser, &opts).unwrap();
    c.expect(
        fit.max_included_slack() <= 0.0 && fit.excluded().count() == 0,
        format!(
            "(a) C = {:.6}, largest slack {:.3e} <= 0 on all {} rows",
            fit.c,
            fit.max_included_slack(),
            main.len()
        ),
    );
    let ratio = fit.c / dropped.c;
    c.expect(
        (0.5..=2.0).contains(&ratio),
        format!(
            "(a) without the finest level C = {:.6}, ratio {ratio:.4} within a factor 2",
            dropped.c
        ),
    );
    for s in &fit.series {
        c.note(format!(
            "omega={} p={}: slope over all levels {:.4} +- {:.4}",
            s.omega, s.p, s.all.slope, s.all.half_width
        ));
        c.expect(
            (0.8..=1.2).contains(&s.tail.slope),
            format!(
                "(b) p={}: small-h slope {:.4} (two finest levels) in [0.8, 1.2]",
                s.p, s.tail.slope
            ),
        );
    }
    let coarsest = main.iter().map(|r| r.h).fold(0.0, f64::max);
    let at = |rows: &[Row], h: f64, p: usize| {
        rows.iter().find(|r| r.h == h && r.p == p).map(|r| r.gamma)
    };
    let (g0, g1) = (
        at(main, coarsest, 0).unwrap(),
        at(main, coarsest, 1).unwrap(),
    );
    c.expect(
        g1 < g0,
        format!("(c) coarsest level: gamma(p=1) = {g1:.6} < gamma(p=0) = {g0:.6}"),
    );
    let mut increased = true;
    for r in near {
        if let Some(g) = at(main, r.h, r.p) {
            increased &= r.gamma > g;
            c.note(format!(
                "p={} h={:.4}: gamma(1.4) = {:.6} vs gamma(1.0) = {g:.6}",
                r.p, r.h, r.gamma
            ));
        }
    }
    c.expect(
        increased && !near.is_empty(),
        "(d) gamma at omega = 1.4 exceeds gamma at omega = 1.0 at every common level",
    );
    let first = fit_bound(
        main,
        &FitOptions {
            terms: BoundTerms::FirstOnly,
            ..opts
        },
    )
    .unwrap();
    let worst_first = near
        .iter()
        .map(|r| first.slack(r))
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_full = near
        .iter()
        .map(|r| fit.slack(r))
        .fold(f64::NEG_INFINITY, f64::max);
    c.note(format!(
        "first-term fit C1 = {:.6}; on omega = 1.4 rows: largest slack {worst_first:.4} (first term), {worst_full:.4} (both terms)",
        first.c
    ));
    c.expect(
        worst_first > 0.0,
        "(d) the first term alone, fitted at omega = 1.0, leaves positive slack at omega = 1.4",
    );
}

fn bitwise_equal(
    a: &maxwell_core::sparse::SparseOperator,
    b: &maxwell_core::sparse::SparseOperator,
) -> bool {
    a.row_ptr() == b.row_ptr()
        && a.col_idx() == b.col_idx()
        && a.values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn structural(c: &mut Check) {
    // Pythagoras for the energy projection onto a nested coarse space.
    let mut worst = 0.0f64;
    for p in 0..=1 {
        let coarse = system(1, p);
        let fine = MaxwellSystem::new(Arc::new(cube(1).refine_uniform()), p, &vacuum()).unwrap();
        let pr = build_prolongation(&coarse.nedelec, &fine.nedelec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for omega in [0.5, 1.0, 2.0] {
            let e: Vec<f64> = (0..fine.n()).map(|_| rng.random::<f64>() - 0.5).collect();
            let b = best_approx_error(&fine, &pr, &e, omega).unwrap();
            let t2 = b.target_norm * b.target_norm;
            worst = worst
                .max((b.error * b.error + b.projection_norm * b.projection_norm - t2).abs() / t2);
        }
    }
    c.expect(
        worst <= 1e-11,
        format!("Pythagoras of the energy projection: worst {worst:.2e} <= 1e-11"),
    );

    // K annihilates discrete gradients.
    let mut worst = 0.0f64;
    for p in 0..=2 {
        let s = system(2, p);
        let kg = s.curl.mul(&s.gradient);
        worst = worst.max(kg.max_abs() / (s.curl.max_abs() * s.gradient.max_abs()));
    }
    c.expect(
        worst <= 1e-12,
        format!("K G = 0 for p = 0, 1, 2: worst relative entry {worst:.2e} <= 1e-12"),
    );

    // Assembly is bitwise reproducible, independent of the worker count.
    let s = system(2, 2);
    let coeffs = vacuum();
    let mut same = true;
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        for role in [Role::Mass, Role::CurlCurl] {
            let m = pool.install(|| assemble(&s.nedelec, &coeffs, role).unwrap());
            let reference = if role == Role::Mass { &s.mass } else { &s.curl };
            same &= bitwise_equal(&m, reference);
        }
    }
    c.expect(
        same,
        "mass and curl-curl matrices bitwise identical across runs with 1 and 3 workers",
    );

    // Configuration and seed determine every output byte.
    let mut cfg = config("cube.toml");
    cfg.sweep.levels = vec![1, 2, 3];
    cfg.sweep.fine_levels = 1;
    let dirs: Vec<PathBuf> = (0..2)
        .map(|_| tempfile::tempdir().unwrap().keep())
        .collect();
    for (dir, threads) in dirs.iter().zip([1, 2]) {
        let mut cfg = cfg.clone();
        cfg.output = dir.clone();
        let (_, failures) = commands::sweep(&cfg, Some(threads), dir).unwrap();
        assert_eq!(failures, 0);
        commands::report(&cfg, dir).unwrap();
    }
    let mut identical = true;
    for f in [
        "sweep.csv",
        "eigen.csv",
        "sweep.log",
        "gamma.svg",
        "eigen.svg",
        "summary.txt",
    ] {
        let a = std::fs::read(dirs[0].join(f)).unwrap();
        let b = std::fs::read(dirs[1].join(f)).unwrap();
        identical &= a == b && (!a.is_empty() || f == "sweep.log");
    }
    for d in &dirs {
        let _ = std::fs::remove_dir_all(d);
    }
    c.expect(
        identical,
        "sweep tables, SVG plots and summary bitwise identical across two runs (1 and 2 workers)",
    );
}

fn main() {
    let start = Instant::now();
    let mut verdicts = Vec::new();
    let mut run = |label: &str, f: &mut dyn FnMut(&mut Check)| {
        let t = Instant::now();
        let mut c = Check::new();
        f(&mut c);
        for l in &c.lines {
            println!("{l}");
        }
        let line = format!(
            "{} {label} ({:.1} s)",
            if c.ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        println!("{line}");
        verdicts.push(c.ok);
    };

    let t = Instant::now();
    let main_cfg = config("bound.toml");
    let near_cfg = config("near_resonance.toml");
    let main_out = run_sweep(&main_cfg, Some(1)).unwrap();
    let near_out = run_sweep(&near_cfg, Some(1)).unwrap();
    let (main_rows, near_rows) = (main_out.rows(), near_out.rows());
    let all_rows: Vec<Row> = main_rows.iter().chain(&near_rows).cloned().collect();
    let complete = main_out.failures() == 0
        && near_out.failures() == 0
        && main_rows.len() == main_out.outcomes.len()
        && near_rows.len() == near_out.outcomes.len();
    println!(
        "    sweeps: {} rows at omega = 1.0, {} rows at omega = 1.4 ({:.1} s)",
        main_rows.len(),
        near_rows.len(),
        t.elapsed().as_secs_f64()
    );
    for o in main_out.outcomes.iter().chain(&near_out.outcomes) {
        if let maxwell_lab::sweep::Outcome::Failed { key, reason }
        | maxwell_lab::sweep::Outcome::Skipped { key, reason } = o
        {
            println!("    row {key} not computed: {reason}");
        }
    }

    run(
        "[1] cavity eigenvalues: clusters 2 (x3) and 3 (x2), lambda_1 error, rates 2(p+1)",
        &mut cavity_eigenvalues,
    );
    run("[2] modal stability identity", &mut modal_identity);
    run(
        "[3] stability bound c_s <= omega/delta and its equality case",
        &mut |c| stability_bound(c, &all_rows),
    );
    run("[4] splitting identities", &mut splitting_identities);
    run("[5] crude bound gamma <= c_s", &mut |c| {
        crude_bound(c, &all_rows)
    });
    run("[6] shape of the approximation-factor bound", &mut |c| {
        c.expect(complete, "all sweep rows computed");
        bound_shape(c, &main_rows, &near_rows, main_cfg.fit.cutoff);
    });
    run("[7] structural numerics", &mut structural);

    let passed = verdicts.iter().filter(|v| **v).count();
    println!(
        "{passed}/{} criteria passed in {:.1} s",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if passed != verdicts.len() {
        std::process::exit(1);
    }
}
