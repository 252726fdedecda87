//! The discrete Maxwell operators on one mesh and order.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::assembly::{assemble, assemble_mixed, companion_lagrange, gradient_matrix};
use crate::coefficients::CoefficientField;
use crate::error::{Result, SolverError};
use crate::mesh::Mesh;
use crate::space::{BoundaryCondition, FeSpace};
use crate::sparse::{norm_inf, CholeskySolver, Role, SparseOperator};

/// Mass `M`, curl-curl `K`, mixed `B = (ε φ_i, grad ψ_j)`, gradient embedding `G`
/// and scalar stiffness `L`, all on free DOFs with vanishing tangential trace.
pub struct MaxwellSystem {
    pub nedelec: FeSpace,
    pub lagrange: FeSpace,
    pub coeffs: CoefficientField,
    pub mass: SparseOperator,
    pub curl: SparseOperator,
    pub mixed: SparseOperator,
    pub gradient: SparseOperator,
    pub stiffness: SparseOperator,
    stiffness_solver: OnceLock<std::result::Result<CholeskySolver, String>>,
    shifted_solver: OnceLock<std::result::Result<CholeskySolver, String>>,
}

impl MaxwellSystem {
    pub fn new(mesh: Arc<Mesh>, p: usize, coeffs: &CoefficientField) -> Result<Self> {
        let nedelec = FeSpace::nedelec(mesh, p, BoundaryCondition::Zero)?;
        Self::from_space(nedelec, coeffs)
    }

    pub fn from_space(nedelec: FeSpace, coeffs: &CoefficientField) -> Result<Self> {
        let lagrange = companion_lagrange(&nedelec)?;
        let mass = assemble(&nedelec, coeffs, Role::Mass)?;
        let curl = assemble(&nedelec, coeffs, Role::CurlCurl)?;
        let mixed = assemble_mixed(&nedelec, &lagrange, coeffs)?;
        let gradient = gradient_matrix(&nedelec, &lagrange)?;
        let stiffness = assemble(&lagrange, coeffs, Role::Stiffness)?;
        Ok(Self {
            nedelec,
            lagrange,
            coeffs: coeffs.clone(),
            mass,
            curl,
            mixed,
            gradient,
            stiffness,
            stiffness_solver: OnceLock::new(),
            shifted_solver: OnceLock::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.nedelec.order()
    }

    /// Number of free vector DOFs.
    pub fn n(&self) -> usize {
        self.nedelec.n_free()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.nedelec.mesh()
    }

    pub fn h(&self) -> f64 {
        self.mesh().h()
    }

    /// `ω² M + K`.
    pub fn energy_matrix(&self, omega: f64) -> SparseOperator {
        self.mass.add_scaled(omega * omega, &self.curl, 1.0)
    }

    pub fn m_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.bilinear(a, b)
    }

    pub fn m_norm(&self, a: &[f64]) -> f64 {
        self.m_dot(a, a).max(0.0).sqrt()
    }

    /// `(ω² ||v||_M² + ||v||_K²)^{1/2}` from the assembled matrices.
    pub fn energy_norm(&self, v: &[f64], omega: f64) -> f64 {
        (omega * omega * self.mass.bilinear(v, v) + self.curl.bilinear(v, v))
            .max(0.0)
            .sqrt()
    }

    /// `|Bᵀ v|_∞`, zero for discretely divergence-free fields.
    pub fn divergence_certificate(&self, v: &[f64]) -> f64 {
        norm_inf(&self.mixed.matvec_transpose(v))
    }

    /// Certificate relative to the M-norm of `v` (zero vectors have certificate 0).
    pub fn relative_divergence(&self, v: &[f64]) -> f64 {
        let n = self.m_norm(v);
        if n == 0.0 {
            0.0
        } else {
            self.divergence_certificate(v) / n
        }
    }

    fn stiffness_solver(&self) -> Result<&CholeskySolver> {
        self.stiffness_solver
            .get_or_init(|| CholeskySolver::new(&self.stiffness).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| SolverError::Factorization(e.clone()))
    }

    /// Positive shift `σ = ϑ² / d²` used for `K + σ M`. It sits well below the
    /// smallest cavity eigenvalue of any box, in the same units.
    pub fn shift(&self) -> f64 {
        let t = self.coeffs.theta() / self.coeffs.diameter();
        t * t
    }

    /// Cached Cholesky factorization of `K + σ M` with `σ = self.shift()`.
    pub fn shifted_solver(&self) -> Result<&CholeskySolver> {
        self.shifted_solver
            .get_or_init(|| {
                let a = self.mass.add_scaled(self.shift(), &self.curl, 1.0);
                CholeskySolver::new(&a).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| SolverError::Factorization(e.clone()))
    }

    /// M-orthogonal projection onto the kernel of `Bᵀ`: `v - G L⁻¹ Bᵀ v`.
    pub fn project_div_free(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.lagrange.n_free() == 0 {
            return Ok(v.to_vec());
        }
        let q = self
            .stiffness_solver()?
            .solve(&self.mixed.matvec_transpose(v));
        let gq = self.gradient.matvec(&q);
        Ok(v.iter().zip(&gq).map(|(a, b)| a - b).collect())
    }

    /// Random discretely divergence-free field with unit M-norm.
    pub fn random_div_free(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let raw: Vec<f64> = (0..self.n()).map(|_| rng.sample(StandardNormal)).collect();
        let mut v = self.project_div_free(&raw)?;
        // A second pass removes the rounding left by the first.
        v = self.project_div_free(&v)?;
        let n = self.m_norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        Ok(v)
    }

    /// Free-DOF coefficients of the gradient of a scalar field given on free DOFs.
    pub fn grad(&self, q: &[f64]) -> Vec<f64> {
        self.gradient.matvec(q)
    }

    pub fn scale_to_unit(&self, v: &mut [f64]) {
        let n = self.m_norm(v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
    }

    pub fn m_apply(&self, v: &[f64]) -> Vec<f64> {
        self.mass.matvec(v)
    }
}
