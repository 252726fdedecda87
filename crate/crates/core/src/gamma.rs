//! Two-grid estimation of the approximation factor: fine-space source solves,
//! energy-norm best approximation from a nested coarse space, and the supremum
//! over divergence-free right-hand sides.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FemError, Result, SolverError};
use crate::quadrature::QuadratureRule;
use crate::source::TimeHarmonicSolver;
use crate::space::{map_piola, FeSpace, Flavor};
use crate::sparse::{dot, CholeskySolver, Role, SparseOperator};
use crate::spectral::StabilityReport;
use crate::system::MaxwellSystem;

/// Exact embedding of a coarse curl-conforming space into a nested fine one, on
/// free DOFs.
#[derive(Clone, Debug)]
pub struct Prolongation {
    /// Fine free DOFs by coarse free DOFs.
    pub matrix: SparseOperator,
    transpose: SparseOperator,
}

impl Prolongation {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        self.transpose.matvec(v)
    }

    pub fn n_coarse(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_fine(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Entry `(i, j)` is fine functional `i` applied to coarse basis function `j`.
/// Fine functionals are taken on the element whose ancestor holds the coarse
/// function; by conformity every element sharing a DOF gives the same value.
pub fn build_prolongation(coarse: &FeSpace, fine: &FeSpace) -> Result<Prolongation> {
    if coarse.flavor() != Flavor::Nedelec || fine.flavor() != Flavor::Nedelec {
        return Err(FemError::DimensionMismatch(
            "prolongation needs curl-conforming spaces".into(),
        )
        .into());
    }
    if coarse.order() != fine.order() || coarse.bc() != fine.bc() {
        return Err(FemError::DimensionMismatch(
            "coarse and fine spaces differ in order or boundary condition".into(),
        )
        .into());
    }
    let ancestors = fine
        .mesh()
        .ancestor_map(coarse.mesh())
        .ok_or(SolverError::NotNested)?;
    let basis = coarse.nedelec_basis().expect("curl-conforming space");
    let functionals = fine
        .nedelec_basis()
        .expect("curl-conforming space")
        .functionals();
    let mut done = vec![false; fine.n_dofs()];
    let mut triplets = Vec::new();
    for t in 0..fine.mesh().n_tets() {
        let parent = ancestors[t];
        let fmap = fine.element_map(t);
        let cmap = coarse.element_map(parent);
        let cdofs = coarse.cell_dofs(parent);
        for (i, &g) in fine.cell_dofs(t).iter().enumerate() {
            let Some(row) = fine.free_index(g) else {
                continue;
            };
            if std::mem::replace(&mut done[g], true) {
                continue;
            }
            let f = &functionals[i];
            let mut values = vec![0.0; cdofs.len()];
            for (xh, w) in f.points.iter().zip(&f.weights) {
                let wp = fmap.jacobian * nalgebra::Vector3::from(*w);
                let xc = cmap.apply_inverse(fmap.apply(*xh));
                for (j, val) in values.iter_mut().enumerate() {
                    let v = map_piola(&cmap, basis.value(j, xc));
                    *val += wp[0] * v[0] + wp[1] * v[1] + wp[2] * v[2];
                }
            }
            for (j, &gc) in cdofs.iter().enumerate() {
                if let Some(col) = coarse.free_index(gc) {
                    if values[j].abs() > 1e-13 {
                        triplets.push((row, col, values[j]));
                    }
                }
            }
        }
    }
    let matrix =
        SparseOperator::from_triplets(fine.n_free(), coarse.n_free(), triplets, Role::Custom);
    let transpose = matrix.transpose();
    Ok(Prolongation { matrix, transpose })
}

/// Largest pointwise difference between a coarse field and its prolongation at
/// the points of `rule` in every fine element, relative to the largest value.
pub fn prolongation_pointwise_error(
    coarse: &FeSpace,
    fine: &FeSpace,
    prolongation: &Prolongation,
    v: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    let ancestors = fine
        .mesh()
        .ancestor_map(coarse.mesh())
        .ok_or(SolverError::NotNested)?;
    let vc = coarse.extend(v);
    let vf = fine.extend(&prolongation.apply(v));
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for t in 0..fine.mesh().n_tets() {
        let fmap = fine.element_map(t);
        let cmap = coarse.element_map(ancestors[t]);
        for &xh in &rule.points {
            let a = fine.evaluate(&vf, t, xh).0;
            let b = coarse
                .evaluate(&vc, ancestors[t], cmap.apply_inverse(fmap.apply(xh)))
                .0;
            for k in 0..3 {
                diff = diff.max((a[k] - b[k]).abs());
                scale = scale.max(b[k].abs());
            }
        }
    }
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Orthogonal projection onto the prolonged coarse space in the fine energy
/// inner product `b(u, v) = ω² (ε u, v) + (χ curl u, curl v)`.
pub struct EnergyProjector<'a> {
    pub omega: f64,
    energy: SparseOperator,
    prolongation: &'a Prolongation,
    coarse: CholeskySolver,
}

#[derive(Clone, Debug)]
pub struct BestApproximation {
    pub error: f64,
    /// Coarse free-DOF coefficients of the minimizer.
    pub coefficients: Vec<f64>,
    /// Energy norm of the prolonged minimizer.
    pub projection_norm: f64,
    pub target_norm: f64,
}

impl<'a> EnergyProjector<'a> {
    pub fn new(fine: &MaxwellSystem, prolongation: &'a Prolongation, omega: f64) -> Result<Self> {
        if omega <= 0.0 || !omega.is_finite() {
            return Err(FemError::NonPositiveFrequency(omega).into());
        }
        let energy = fine.energy_matrix(omega);
        let coarse_energy = prolongation
            .transpose
            .mul(&energy.mul(&prolongation.matrix));
        let coarse = CholeskySolver::new(&coarse_energy)?;
        Ok(Self {
            omega,
            energy,
            prolongation,
            coarse,
        })
    }

    pub fn energy(&self) -> &SparseOperator {
        &self.energy
    }

    pub fn energy_norm(&self, v: &[f64]) -> f64 {
        self.energy.bilinear(v, v).max(0.0).sqrt()
    }

    pub fn best_approximation(&self, e: &[f64]) -> BestApproximation {
        let rhs = self.prolongation.apply_transpose(&self.energy.matvec(e));
        let coefficients = self.coarse.solve(&rhs);
        let pv = self.prolongation.apply(&coefficients);
        let diff: Vec<f64> = e.iter().zip(&pv).map(|(a, b)| a - b).collect();
        BestApproximation {
            error: self.energy_norm(&diff),
            projection_norm: self.energy_norm(&pv),
            target_norm: self.energy_norm(e),
            coefficients,
        }
    }

    /// `e - P x*`, the part of `e` not captured by the coarse space.
    pub fn complement(&self, e: &[f64]) -> Vec<f64> {
        let rhs = self.prolongation.apply_transpose(&self.energy.matvec(e));
        let pv = self.prolongation.apply(&self.coarse.solve(&rhs));
        e.iter().zip(&pv).map(|(a, b)| a - b).collect()
    }
}

/// `min_v |e - P v|` in the fine energy norm.
pub fn best_approx_error(
    fine: &MaxwellSystem,
    prolongation: &Prolongation,
    e: &[f64],
    omega: f64,
) -> Result<BestApproximation> {
    Ok(EnergyProjector::new(fine, prolongation, omega)?.best_approximation(e))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaMethod {
    /// Power iteration, stopping when successive Rayleigh quotients agree to
    /// `tolerance` relative.
    Power {
        max_iterations: usize,
        tolerance: f64,
    },
    /// Largest value over `count` random unit right-hand sides.
    Sample { count: usize },
}

impl GammaMethod {
    pub fn power() -> Self {
        GammaMethod::Power {
            max_iterations: 200,
            tolerance: 1e-6,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GammaMethod::Power { .. } => "power",
            GammaMethod::Sample { .. } => "sample",
        }
    }
}

/// Result of a sup estimate: the value, its maximizer, the iterations used and
/// the per-step values (Rayleigh quotient square roots or sample errors).
#[derive(Clone, Debug)]
pub struct SupEstimate {
    pub gamma: f64,
    pub maximizer: Vec<f64>,
    pub iterations: usize,
    pub values: Vec<f64>,
}

/// The map `g ↦ (I - Π) S g` with `S g = e_h(g)` on the fine space, measured in
/// the fine energy norm over the M-unit divergence-free `g`.
pub struct GammaEstimator<'a> {
    fine: &'a MaxwellSystem,
    solver: TimeHarmonicSolver<'a>,
    projector: EnergyProjector<'a>,
}

impl<'a> GammaEstimator<'a> {
    pub fn new(
        fine: &'a MaxwellSystem,
        prolongation: &'a Prolongation,
        omega: f64,
    ) -> Result<Self> {
        Self::with_solver(TimeHarmonicSolver::new(fine, omega)?, prolongation)
    }

    /// Reuses the factorization held by `solver`.
    pub fn with_solver(
        solver: TimeHarmonicSolver<'a>,
        prolongation: &'a Prolongation,
    ) -> Result<Self> {
        let fine = solver.system();
        let projector = EnergyProjector::new(fine, prolongation, solver.omega())?;
        Ok(Self {
            fine,
            solver,
            projector,
        })
    }

    pub fn solver(&self) -> &TimeHarmonicSolver<'a> {
        &self.solver
    }

    pub fn projector(&self) -> &EnergyProjector<'a> {
        &self.projector
    }

    /// `|(I - Π) S g|_E` for a given `g` (not normalized).
    pub fn value(&self, g: &[f64]) -> f64 {
        let e = self.solver.solve(g);
        self.projector.energy_norm(&self.projector.complement(&e))
    }

    /// `A g = P_div ω (K - ω² M)⁻¹ E z` for the complement `z = (I - Π) S g`.
    /// With `S* = ω (K - ω² M)⁻¹ E` followed by the M-orthogonal projection onto
    /// the divergence-free subspace, `A = S*(I - Π) S` is M-symmetric and
    /// `gᵀ M A g = |(I - Π) S g|²_E`.
    fn adjoint(&self, ez: &[f64]) -> Result<Vec<f64>> {
        let mut w = self.solver.solve_dual(&[ez]).pop().unwrap();
        let omega = self.projector.omega;
        w.iter_mut().for_each(|x| *x *= omega);
        self.fine.project_div_free(&w)
    }

    /// Power iteration on `A` with Rayleigh-Ritz extraction over all iterates
    /// (the Krylov space of the power sequence). Each step costs one forward and
    /// one adjoint solve, like the plain iteration, and the Ritz value increases
    /// monotonically to the dominant eigenvalue. Stops when successive values of
    /// `γ²` agree to `tolerance` relative.
    pub fn power(&self, max_iterations: usize, tolerance: f64, seed: u64) -> Result<SupEstimate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = self.fine.random_div_free(&mut rng)?;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut mbasis: Vec<Vec<f64>> = Vec::new();
        let mut complements: Vec<Vec<f64>> = Vec::new();
        let mut gram: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        let mut previous = f64::NAN;
        for k in 1..=max_iterations {
            let e = self.solver.solve(&q);
            let z = self.projector.complement(&e);
            let ez = self.projector.energy.matvec(&z);
            let row: Vec<f64> = complements.iter().map(|zi| dot(zi, &ez)).collect();
            let diag = dot(&z, &ez).max(0.0);
            if k == 1 && diag <= 1e-24 * self.projector.energy.bilinear(&e, &e) {
                // The coarse space captures the solution operator exactly.
                return Ok(SupEstimate {
                    gamma: diag.sqrt(),
                    maximizer: q,
                    iterations: 1,
                    values: vec![diag.sqrt()],
                });
            }
            for (i, r) in row.iter().enumerate() {
                gram[i].push(*r);
            }
            let mut last = row;
            last.push(diag);
            gram.push(last);
            let mq = self.fine.m_apply(&q);
            basis.push(q);
            mbasis.push(mq);
            complements.push(z);
            let (theta, y) = top_eigenpair(&gram);
            values.push(theta.max(0.0).sqrt());
            let converged = k > 1 && (theta - previous).abs() <= tolerance * theta;
            let next = if converged {
                None
            } else {
                self.next_direction(&ez, &basis, &mbasis)?
            };
            if converged || next.is_none() {
                let mut g = vec![0.0; self.fine.n()];
                for (c, v) in y.iter().zip(&basis) {
                    g.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
                }
                self.fine.scale_to_unit(&mut g);
                return Ok(SupEstimate {
                    gamma: theta.max(0.0).sqrt(),
                    maximizer: g,
                    iterations: k,
                    values,
                });
            }
            if k == max_iterations {
                return Err(SolverError::PowerNotConverged {
                    iterations: k,
                    previous: previous.max(0.0).sqrt(),
                    last: theta.max(0.0).sqrt(),
                });
            }
            previous = theta;
            q = next.unwrap();
        }
        unreachable!("loop returns on its last iteration")
    }

    /// New M-unit direction from `A q_k`, orthogonal to the basis; `None` when
    /// the basis is invariant.
    fn next_direction(
        &self,
        ez: &[f64],
        basis: &[Vec<f64>],
        mbasis: &[Vec<f64>],
    ) -> Result<Option<Vec<f64>>> {
        let mut w = self.adjoint(ez)?;
        let start = self.fine.m_norm(&w);
        if start == 0.0 {
            return Ok(None);
        }
        for pass in 0..3 {
            for (v, mv) in basis.iter().zip(mbasis) {
                let c = dot(mv, &w);
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            if pass == 1 {
                w = self.fine.project_div_free(&w)?;
            }
        }
        let norm = self.fine.m_norm(&w);
        if norm <= 1e-12 * start {
            return Ok(None);
        }
        w.iter_mut().for_each(|x| *x /= norm);
        Ok(Some(w))
    }

    /// Plain power iteration, kept as an independent cross-check of `power`.
    pub fn plain_power(
        &self,
        max_iterations: usize,
        tolerance: f64,
        seed: u64,
    ) -> Result<SupEstimate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = self.fine.random_div_free(&mut rng)?;
        let mut values = Vec::new();
        let mut previous = f64::NAN;
        for k in 1..=max_iterations {
            let e = self.solver.solve(&g);
            let z = self.projector.complement(&e);
            let ez = self.projector.energy.matvec(&z);
            let rq = dot(&z, &ez).max(0.0);
            values.push(rq.sqrt());
            let floor = 1e-24 * self.projector.energy.bilinear(&e, &e);
            if rq <= floor || (k > 1 && (rq - previous).abs() <= tolerance * rq) {
                return Ok(SupEstimate {
                    gamma: rq.sqrt(),
                    maximizer: g,
                    iterations: k,
                    values,
                });
            }
            if k == max_iterations {
                return Err(SolverError::PowerNotConverged {
                    iterations: k,
                    previous: previous.sqrt(),
                    last: rq.sqrt(),
                });
            }
            previous = rq;
            let mut w = self.adjoint(&ez)?;
            self.fine.scale_to_unit(&mut w);
            g = w;
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Maximum over `count` random M-unit divergence-free right-hand sides.
    pub fn sample(&self, count: usize, seed: u64) -> Result<SupEstimate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = SupEstimate {
            gamma: 0.0,
            maximizer: vec![0.0; self.fine.n()],
            iterations: count,
            values: Vec::with_capacity(count),
        };
        for _ in 0..count {
            let g = self.fine.random_div_free(&mut rng)?;
            let v = self.value(&g);
            best.values.push(v);
            if v > best.gamma {
                best.gamma = v;
                best.maximizer = g;
            }
        }
        Ok(best)
    }

    pub fn run(&self, method: GammaMethod, seed: u64) -> Result<SupEstimate> {
        match method {
            GammaMethod::Power {
                max_iterations,
                tolerance,
            } => self.power(max_iterations, tolerance, seed),
            GammaMethod::Sample { count } => self.sample(count, seed),
        }
    }
}

/// Largest eigenvalue of a small symmetric matrix and a unit eigenvector.
fn top_eigenpair(a: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let eig = m.symmetric_eigen();
    let i = eig.eigenvalues.imax();
    (
        eig.eigenvalues[i],
        eig.eigenvectors.column(i).iter().copied().collect(),
    )
}

#[derive(Clone, Debug)]
pub struct GammaReport {
    pub omega: f64,
    /// Coarse mesh size.
    pub h: f64,
    pub fine_h: f64,
    pub p: usize,
    pub method: GammaMethod,
    pub gamma: f64,
    pub maximizer: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub delta: f64,
    pub c_s: f64,
    pub theta: f64,
    pub diameter: f64,
}

impl GammaReport {
    /// `ω h / ϑ`.
    pub fn bound_term1(&self) -> f64 {
        self.omega * self.h / self.theta
    }

    /// `(ω / δ) (ω h / ϑ)^{p+1}`.
    pub fn bound_term2(&self) -> f64 {
        self.omega / self.delta * self.bound_term1().powi(self.p as i32 + 1)
    }

    pub fn bound(&self, c: f64) -> f64 {
        c * (self.bound_term1() + self.bound_term2())
    }

    pub const CSV_HEADER: &'static str =
        "omega,h,p,delta,c_s,gamma,method,iters,bound_term1,bound_term2";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{:e},{:e},{},{:e},{:e},{:e},{},{},{:e},{:e}",
            self.omega,
            self.h,
            self.p,
            self.delta,
            self.c_s,
            self.gamma,
            self.method.tag(),
            self.iterations,
            self.bound_term1(),
            self.bound_term2()
        );
        s
    }
}

/// Estimates the approximation factor of the coarse space of `prolongation` at
/// `omega`, with the fine space as reference. `stability` must come from the
/// fine discrete spectrum at the same `omega`.
pub fn estimate_gamma(
    fine: &MaxwellSystem,
    coarse_h: f64,
    prolongation: &Prolongation,
    stability: &StabilityReport,
    method: GammaMethod,
    seed: u64,
) -> Result<GammaReport> {
    let estimator = GammaEstimator::new(fine, prolongation, stability.omega)?;
    report(&estimator, fine, coarse_h, stability, method, seed)
}

/// Same as `estimate_gamma` with an existing estimator.
pub fn report(
    estimator: &GammaEstimator<'_>,
    fine: &MaxwellSystem,
    coarse_h: f64,
    stability: &StabilityReport,
    method: GammaMethod,
    seed: u64,
) -> Result<GammaReport> {
    let est = estimator.run(method, seed)?;
    Ok(GammaReport {
        omega: stability.omega,
        h: coarse_h,
        fine_h: fine.h(),
        p: fine.order(),
        method,
        gamma: est.gamma,
        maximizer: est.maximizer,
        values: est.values,
        iterations: est.iterations,
        delta: stability.delta,
        c_s: stability.c_s,
        theta: fine.coeffs.theta(),
        diameter: fine.coeffs.diameter(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::coefficients::{CoefficientField, Material};
    use crate::mesh::{build_box_mesh, BoxDomain, Mesh};
    use crate::space::BoundaryCondition;
    use crate::spectral::{solve_eigs, stability_constants};

    fn pair(n: usize, p: usize, levels: usize) -> (MaxwellSystem, MaxwellSystem) {
        let dom = BoxDomain::cube(std::f64::consts::PI);
        let coarse = Arc::new(build_box_mesh(&dom, [n, n, n], &[]).unwrap());
        let mut fine: Mesh = (*coarse).clone();
        for _ in 0..levels {
            fine = fine.refine_uniform();
        }
        let c = CoefficientField::uniform(Material::vacuum(), &dom).unwrap();
        (
            MaxwellSystem::new(coarse, p, &c).unwrap(),
            MaxwellSystem::new(Arc::new(fine), p, &c).unwrap(),
        )
    }

    #[test]
    fn identity_when_equal() {
        let (c, _) = pair(2, 1, 0);
        let p = build_prolongation(&c.nedelec, &c.nedelec).unwrap();
        let id = SparseOperator::identity(c.n());
        assert!(p.matrix.add_scaled(1.0, &id, -1.0).max_abs() < 1e-12);
    }

    #[test]
    fn nested_embedding_is_exact() {
        let (c, f) = pair(1, 1, 1);
        let p = build_prolongation(&c.nedelec, &f.nedelec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rule = QuadratureRule::tet(3);
        for _ in 0..20 {
            let v: Vec<f64> = (0..c.n()).map(|_| rng.random::<f64>() - 0.5).collect();
            let err = prolongation_pointwise_error(&c.nedelec, &f.nedelec, &p, &v, &rule).unwrap();
            assert!(err < 1e-12, "{err}");
            let pv = p.apply(&v);
            let a = f.energy_norm(&pv, 1.3);
            let b = c.energy_norm(&v, 1.3);
            assert!((a - b).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn constants_prolong_to_constants() {
        let dom = BoxDomain::cube(1.0);
        let coarse = Arc::new(build_box_mesh(&dom, [1, 1, 1], &[]).unwrap());
        let fine = Arc::new(coarse.refine_uniform());
        let c = FeSpace::nedelec(coarse, 2, BoundaryCondition::None).unwrap();
        let f = FeSpace::nedelec(fine, 2, BoundaryCondition::None).unwrap();
        let p = build_prolongation(&c, &f).unwrap();
        let field = |_: [f64; 3]| [0.3, -1.0, 2.0];
        let pv = p.apply(&c.interpolate(field));
        let direct = f.interpolate(field);
        assert!(pv.iter().zip(&direct).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn non_nested_rejected() {
        let dom = BoxDomain::cube(1.0);
        let a = Arc::new(build_box_mesh(&dom, [2, 2, 2], &[]).unwrap());
        let b = Arc::new(build_box_mesh(&dom, [3, 3, 3], &[]).unwrap());
        let sa = FeSpace::nedelec(a, 0, BoundaryCondition::Zero).unwrap();
        let sb = FeSpace::nedelec(b, 0, BoundaryCondition::Zero).unwrap();
        assert!(matches!(
            build_prolongation(&sa, &sb),
            Err(SolverError::NotNested)
        ));
    }

    #[test]
    fn projection_identities() {
        let (c, f) = pair(1, 1, 1);
        let p = build_prolongation(&c.nedelec, &f.nedelec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..c.n()).map(|_| rng.random::<f64>() - 0.5).collect();
        let inside = best_approx_error(&f, &p, &p.apply(&v), 1.0).unwrap();
        assert!(inside.error < 1e-10 * inside.target_norm);
        let e: Vec<f64> = (0..f.n()).map(|_| rng.random::<f64>() - 0.5).collect();
        for omega in [1.0, 2.0] {
            let b = best_approx_error(&f, &p, &e, omega).unwrap();
            let lhs = b.error * b.error + b.projection_norm * b.projection_norm;
            let rhs = b.target_norm * b.target_norm;
            assert!((lhs - rhs).abs() < 1e-11 * rhs);
            assert!(b.error <= b.target_norm);
        }
    }

    #[test]
    fn gamma_vanishes_without_refinement() {
        let (c, _) = pair(2, 0, 0);
        let p = build_prolongation(&c.nedelec, &c.nedelec).unwrap();
        let dec = solve_eigs(&c, 8).unwrap();
        let st = stability_constants(1.0, &dec.eigenvalues).unwrap();
        let r = estimate_gamma(&c, c.h(), &p, &st, GammaMethod::power(), 1).unwrap();
        assert!(r.gamma < 1e-10);
    }

    #[test]
    fn power_dominates_samples_and_stays_below_c_s() {
        let (c, f) = pair(1, 0, 2);
        let p = build_prolongation(&c.nedelec, &f.nedelec).unwrap();
        let dec = solve_eigs(&f, crate::spectral::divergence_free_dim(&f)).unwrap();
        let st = stability_constants(1.0, &dec.eigenvalues).unwrap();
        let est = GammaEstimator::new(&f, &p, 1.0).unwrap();
        let pw = est.power(200, 1e-6, 3).unwrap();
        let plain = est.plain_power(2000, 1e-12, 3).unwrap();
        assert!(
            (plain.gamma - pw.gamma).abs() < 1e-4 * pw.gamma,
            "{} {}",
            plain.gamma,
            pw.gamma
        );
        assert!(pw.iterations < plain.iterations);
        let sm = est.sample(10, 4).unwrap();
        assert!(sm.gamma <= pw.gamma * (1.0 + 1e-6));
        assert!(pw.gamma <= st.c_s + 1e-9);
        // The maximizer reproduces the value.
        assert!((est.value(&pw.maximizer) - pw.gamma).abs() < 1e-6 * pw.gamma);
        // Single modes: the sampled value is the best-approximation error of
        // the modal solution.
        for j in [0, 4] {
            let phi = &dec.eigenvectors[j];
            let scale = 1.0 / (dec.eigenvalues[j] - 1.0);
            let e: Vec<f64> = phi.iter().map(|x| scale * x).collect();
            let b = est.projector().best_approximation(&e);
            assert!((est.value(phi) - b.error).abs() < 1e-9 * b.error.max(1e-12));
            assert!(est.value(phi) <= pw.gamma * (1.0 + 1e-6));
        }
    }

    #[test]
    fn csv_row_has_ten_fields() {
        let r = GammaReport {
            omega: 1.0,
            h: 0.5,
            fine_h: 0.125,
            p: 0,
            method: GammaMethod::power(),
            gamma: 0.1,
            maximizer: vec![],
            values: vec![],
            iterations: 7,
            delta: 0.25,
            c_s: 2.0,
            theta: 1.0,
            diameter: 1.0,
        };
        assert_eq!(GammaReport::CSV_HEADER.split(',').count(), 10);
        assert_eq!(r.csv_row().split(',').count(), 10);
        assert!((r.bound_term1() - 0.5).abs() < 1e-15);
        assert!((r.bound_term2() - 4.0 * 0.5).abs() < 1e-15);
    }
}
