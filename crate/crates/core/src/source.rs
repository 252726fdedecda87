//! The discrete time-harmonic source problem and the regularity splitting of its
//! solution.

use std::fmt::Write as _;

use crate::error::{Result, SolverError};
use crate::quadrature::QuadratureRule;
use crate::sparse::{dot, norm_inf, SymmetricIndefiniteSolver};
use crate::spectral::{nearest_eigenvalue, RESONANCE_TOLERANCE};
use crate::system::MaxwellSystem;

/// Largest admissible `|Bᵀ g|_∞ / |g|_M` for a right-hand side.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-9;

/// Right-hand side `g` (free-DOF coefficients) with a checked discrete
/// divergence certificate.
#[derive(Clone, Debug)]
pub struct SourceProblem {
    pub omega: f64,
    pub g: Vec<f64>,
    /// `|Bᵀ g|_∞ / |g|_M` after any projection.
    pub divergence: f64,
}

impl SourceProblem {
    /// Rejects a right-hand side that is not discretely divergence-free, or
    /// projects it when `project` is set.
    pub fn new(system: &MaxwellSystem, omega: f64, g: Vec<f64>, project: bool) -> Result<Self> {
        if omega < 0.0 || !omega.is_finite() {
            return Err(crate::error::FemError::NonPositiveFrequency(omega).into());
        }
        let mut g = g;
        let mut div = system.relative_divergence(&g);
        if div > DIVERGENCE_TOLERANCE {
            if !project {
                return Err(SolverError::NotDivergenceFree(div));
            }
            g = system.project_div_free(&g)?;
            div = system.relative_divergence(&g);
        }
        Ok(Self {
            omega,
            g,
            divergence: div,
        })
    }
}

/// Factorization of `K - ω² M`, reusable across right-hand sides.
pub struct TimeHarmonicSolver<'a> {
    system: &'a MaxwellSystem,
    omega: f64,
    factor: Option<SymmetricIndefiniteSolver>,
}

impl<'a> TimeHarmonicSolver<'a> {
    /// At `ω = 0` the solution map is zero and nothing is factorized.
    pub fn new(system: &'a MaxwellSystem, omega: f64) -> Result<Self> {
        let factor = if omega == 0.0 {
            None
        } else {
            let a = system.mass.add_scaled(-omega * omega, &system.curl, 1.0);
            Some(SymmetricIndefiniteSolver::new(&a)?)
        };
        Ok(Self {
            system,
            omega,
            factor,
        })
    }

    /// Also checks `ω` against a discrete spectrum.
    pub fn checked(system: &'a MaxwellSystem, omega: f64, eigenvalues: &[f64]) -> Result<Self> {
        check_resonance(omega, eigenvalues)?;
        Self::new(system, omega)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn system(&self) -> &'a MaxwellSystem {
        self.system
    }

    pub fn factor(&self) -> Option<&SymmetricIndefiniteSolver> {
        self.factor.as_ref()
    }

    /// `e_h` with `(K - ω² M) e_h = ω M g`.
    pub fn solve(&self, g: &[f64]) -> Vec<f64> {
        self.solve_many(&[g]).pop().unwrap()
    }

    pub fn solve_many(&self, gs: &[&[f64]]) -> Vec<Vec<f64>> {
        let rhs: Vec<Vec<f64>> = gs
            .iter()
            .map(|g| {
                let mut r = self.system.m_apply(g);
                r.iter_mut().for_each(|x| *x *= self.omega);
                r
            })
            .collect();
        let refs: Vec<&[f64]> = rhs.iter().map(|v| v.as_slice()).collect();
        self.solve_dual(&refs)
    }

    /// `(K - ω² M)⁻¹ f` for load vectors `f`; zero at `ω = 0`.
    pub fn solve_dual(&self, fs: &[&[f64]]) -> Vec<Vec<f64>> {
        match &self.factor {
            Some(f) => f.solve_many(fs),
            None => fs.iter().map(|f| vec![0.0; f.len()]).collect(),
        }
    }

    /// `|(K - ω² M) e - ω M g|_∞` relative to the larger of the two terms.
    pub fn galerkin_residual(&self, e: &[f64], g: &[f64]) -> f64 {
        let w2 = self.omega * self.omega;
        let ke = self.system.curl.matvec(e);
        let me = self.system.mass.matvec(e);
        let lhs: Vec<f64> = ke.iter().zip(&me).map(|(k, m)| k - w2 * m).collect();
        let mut rhs = self.system.m_apply(g);
        rhs.iter_mut().for_each(|x| *x *= self.omega);
        discrepancy(&lhs, &rhs)
    }
}

fn check_resonance(omega: f64, eigenvalues: &[f64]) -> Result<()> {
    if let Some(gap) = nearest_eigenvalue(omega, eigenvalues) {
        if gap.delta < RESONANCE_TOLERANCE {
            return Err(SolverError::Resonant {
                omega,
                gap: gap.delta,
                index: gap.index,
            });
        }
    }
    Ok(())
}

/// One-shot source solve, rejecting `ω` within the resonance tolerance of the
/// given discrete spectrum.
pub fn solve_source(
    system: &MaxwellSystem,
    problem: &SourceProblem,
    eigenvalues: &[f64],
) -> Result<Vec<f64>> {
    let solver = TimeHarmonicSolver::checked(system, problem.omega, eigenvalues)?;
    Ok(solver.solve(&problem.g))
}

/// `|a - b|_∞ / max(|a|_∞, |b|_∞)`, zero when both vanish.
pub fn discrepancy(a: &[f64], b: &[f64]) -> f64 {
    let scale = norm_inf(a).max(norm_inf(b));
    if scale == 0.0 {
        return 0.0;
    }
    let d = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    d / scale
}

/// Solution of `K e = f` on the kernel of `Bᵀ`, with the multiplier of the
/// mixed formulation `K e + B y = f, Bᵀ e = 0`.
#[derive(Clone, Debug)]
pub struct ConstrainedSolution {
    pub e: Vec<f64>,
    /// `|B y|_∞ / |f|_∞`.
    pub multiplier: f64,
    pub iterations: usize,
    /// `|f - B y - K e|_∞ / (|K|_max |e|_∞ + |f|_∞)`.
    pub residual: f64,
}

/// Largest admissible relative multiplier of a constrained solve.
pub const MULTIPLIER_TOLERANCE: f64 = 1e-9;

/// Constrained curl-curl solve. The multiplier is `y = L⁻¹ Gᵀ f` exactly, since
/// `Gᵀ K = 0` and `Gᵀ B = L`. The remaining problem is solved by conjugate
/// gradients preconditioned with `(K + σ M)⁻¹`, which maps loads orthogonal to
/// the gradients into the divergence-free subspace; there the preconditioned
/// operator has condition number at most `1 + σ / λ_1`.
pub fn solve_constrained(system: &MaxwellSystem, f: &[f64]) -> Result<ConstrainedSolution> {
    let n = system.n();
    let fnorm = norm_inf(f);
    if fnorm == 0.0 {
        return Ok(ConstrainedSolution {
            e: vec![0.0; n],
            multiplier: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let gtf = system.gradient.matvec_transpose(f);
    let (f0, multiplier) = if system.lagrange.n_free() == 0 {
        (f.to_vec(), 0.0)
    } else {
        let y = crate::sparse::CholeskySolver::new(&system.stiffness)?.solve(&gtf);
        let by = system.mixed.matvec(&y);
        let m = norm_inf(&by) / fnorm;
        (
            f.iter().zip(&by).map(|(a, b)| a - b).collect::<Vec<f64>>(),
            m,
        )
    };
    if multiplier > MULTIPLIER_TOLERANCE {
        return Err(SolverError::MultiplierNotSmall(multiplier));
    }
    let pre = system.shifted_solver()?;
    let kmax = system.curl.max_abs();
    let precondition = |r: &[f64]| -> Result<Vec<f64>> { system.project_div_free(&pre.solve(r)) };
    let mut x = vec![0.0; n];
    let mut r = f0.clone();
    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut best = f64::INFINITY;
    let mut stall = 0;
    let mut iterations = 0;
    let backward = |x: &[f64], r: &[f64]| norm_inf(r) / (kmax * norm_inf(x) + norm_inf(&f0));
    for k in 1..=100 {
        iterations = k;
        let q = system.curl.matvec(&p);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let bw = backward(&x, &r);
        if bw <= 1e-16 {
            break;
        }
        if bw < 0.5 * best {
            best = bw;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 3 {
                break;
            }
        }
        z = precondition(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let kx = system.curl.matvec(&x);
    let true_r: Vec<f64> = f0.iter().zip(&kx).map(|(a, b)| a - b).collect();
    let residual = backward(&x, &true_r);
    if residual > 1e-12 || !residual.is_finite() {
        return Err(SolverError::Factorization(format!(
            "constrained curl-curl solve stalled at relative residual {residual:e}"
        )));
    }
    let e = system.project_div_free(&x)?;
    Ok(ConstrainedSolution {
        e,
        multiplier,
        iterations,
        residual,
    })
}

/// Terms `e_0 = 0, e_1, …, e_ℓ` and residuals `r_0 = e_h, …, r_ℓ` with
/// `r_k = e_h - Σ_{j≤k} Ω^j e_j` and `Ω = ω d / ϑ`.
#[derive(Clone, Debug)]
pub struct SplittingResult {
    pub ell: usize,
    pub omega: f64,
    pub omega_scale: f64,
    pub solution: Vec<f64>,
    pub terms: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub energy_norms: Vec<f64>,
    /// `|curl e_j|_χ`.
    pub curl_norms: Vec<f64>,
    /// Relative multipliers of the constrained solves for `e_1, …, e_ℓ`.
    pub multipliers: Vec<f64>,
    /// `|Bᵀ v|_∞ / |v|_M` for every term and every residual.
    pub divergence: f64,
    /// `|g|_ε`.
    pub source_norm: f64,
}

impl SplittingResult {
    /// The final residual `r_ℓ`.
    pub fn residual(&self) -> &[f64] {
        &self.residuals[self.ell]
    }

    /// `|e_h - Σ Ω^j e_j - r_ℓ|_∞ / |e_h|_∞`.
    pub fn reconstruction_error(&self) -> f64 {
        let mut sum = self.residual().to_vec();
        for (j, e) in self.terms.iter().enumerate() {
            let s = self.omega_scale.powi(j as i32);
            for (a, b) in sum.iter_mut().zip(e) {
                *a += s * b;
            }
        }
        discrepancy(&sum, &self.solution)
    }

    /// Smallest `C` with `|curl e_j|_χ ≤ C^j |g|_ε` for every `j ≥ 1`.
    pub fn growth_constant(&self) -> f64 {
        if self.source_norm == 0.0 {
            return 0.0;
        }
        self.curl_norms
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &c)| c > 0.0)
            .map(|(j, &c)| (c / self.source_norm).powf(1.0 / j as f64))
            .fold(0.0, f64::max)
    }
}

/// Splitting of `e_h` for the source `g`:
/// `K e_1 = (ϑ/d) M g` and `K e_j = (ϑ/d)² M e_{j-2}` on the divergence-free
/// subspace, for `j ≤ ℓ ≤ p + 1`.
pub fn compute_splitting(
    system: &MaxwellSystem,
    problem: &SourceProblem,
    solution: &[f64],
    ell: usize,
) -> Result<SplittingResult> {
    let cap = system.order() + 1;
    if ell > cap {
        return Err(SolverError::SplittingTooDeep { ell, cap });
    }
    if problem.divergence > DIVERGENCE_TOLERANCE {
        return Err(SolverError::NotDivergenceFree(problem.divergence));
    }
    let omega = problem.omega;
    let scale = system.coeffs.theta() / system.coeffs.diameter();
    let omega_scale = system.coeffs.omega_scale(omega);
    let n = system.n();
    let mut terms = vec![vec![0.0; n]];
    let mut multipliers = Vec::new();
    for j in 1..=ell {
        let (source, factor) = if j == 1 {
            (&problem.g, scale)
        } else {
            (&terms[j - 2], scale * scale)
        };
        let mut f = system.m_apply(source);
        f.iter_mut().for_each(|x| *x *= factor);
        let sol = solve_constrained(system, &f)?;
        multipliers.push(sol.multiplier);
        terms.push(sol.e);
    }
    let mut residuals = vec![solution.to_vec()];
    for j in 1..=ell {
        let s = omega_scale.powi(j as i32);
        let next: Vec<f64> = residuals[j - 1]
            .iter()
            .zip(&terms[j])
            .map(|(r, e)| r - s * e)
            .collect();
        residuals.push(next);
    }
    let energy_norms = terms.iter().map(|e| system.energy_norm(e, omega)).collect();
    let curl_norms = terms
        .iter()
        .map(|e| system.curl.bilinear(e, e).max(0.0).sqrt())
        .collect();
    let divergence = terms
        .iter()
        .chain(&residuals)
        .map(|v| system.relative_divergence(v))
        .fold(0.0, f64::max);
    Ok(SplittingResult {
        ell,
        omega,
        omega_scale,
        solution: solution.to_vec(),
        terms,
        residuals,
        energy_norms,
        curl_norms,
        multipliers,
        divergence,
        source_norm: system.m_norm(&problem.g),
    })
}

/// Largest relative discrepancy in `K r_{k+2} = ω² M r_k` over the available
/// residuals and in `K r_1 = ω² M e_h`.
pub fn verify_residual_identity(system: &MaxwellSystem, result: &SplittingResult) -> f64 {
    let w2 = result.omega * result.omega;
    let check = |a: &[f64], b: &[f64]| {
        let ka = system.curl.matvec(a);
        let mut mb = system.m_apply(b);
        mb.iter_mut().for_each(|x| *x *= w2);
        discrepancy(&ka, &mb)
    };
    let mut worst = 0.0f64;
    if result.ell >= 1 {
        worst = worst.max(check(&result.residuals[1], &result.solution));
    }
    for k in 0..result.ell.saturating_sub(1) {
        worst = worst.max(check(&result.residuals[k + 2], &result.residuals[k]));
    }
    worst
}

/// Values of a field at the points of `rule` in every element, as
/// `tet,x,y,z,Ex,Ey,Ez` rows.
pub fn export_field_csv(system: &MaxwellSystem, coeffs: &[f64], rule: &QuadratureRule) -> String {
    let full = system.nedelec.extend(coeffs);
    let mut s = String::from("tet,x,y,z,Ex,Ey,Ez\n");
    for (t, x, e) in system.nedelec.sample(&full, rule) {
        let _ = writeln!(
            s,
            "{t},{:e},{:e},{:e},{:e},{:e},{:e}",
            x[0], x[1], x[2], e[0], e[1], e[2]
        );
    }
    s
}
