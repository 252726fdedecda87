//! Matrix assembly and norms.
//!
//! With constant coefficients on each element, every element matrix is a
//! contraction of a 3×3 geometric tensor with nine reference tensors
//! `T^{ab}_{ij} = ∫ u_i^a w_j^b`, which are tabulated once per call.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::error::FemError;
use crate::quadrature::QuadratureRule;
use crate::space::{FeSpace, Flavor};
use crate::sparse::{Role, SparseOperator};

struct RefTensors {
    rows: usize,
    cols: usize,
    data: [Vec<f64>; 9],
}

impl RefTensors {
    fn new(
        rows: usize,
        cols: usize,
        rule: &QuadratureRule,
        u: impl Fn(usize, usize) -> [f64; 3],
        w: impl Fn(usize, usize) -> [f64; 3],
    ) -> Self {
        let mut data: [Vec<f64>; 9] = std::array::from_fn(|_| vec![0.0; rows * cols]);
        for (q, &wq) in rule.weights.iter().enumerate() {
            let us: Vec<[f64; 3]> = (0..rows).map(|i| u(q, i)).collect();
            let ws: Vec<[f64; 3]> = (0..cols).map(|j| w(q, j)).collect();
            for a in 0..3 {
                for b in 0..3 {
                    let d = &mut data[3 * a + b];
                    for i in 0..rows {
                        let ui = wq * us[i][a];
                        for j in 0..cols {
                            d[i * cols + j] += ui * ws[j][b];
                        }
                    }
                }
            }
        }
        Self { rows, cols, data }
    }

    fn contract(&self, a: &Matrix3<f64>) -> DMatrix<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..3 {
            for c in 0..3 {
                let s = a[(r, c)];
                if s == 0.0 {
                    continue;
                }
                for (o, t) in out.iter_mut().zip(&self.data[3 * r + c]) {
                    *o += s * t;
                }
            }
        }
        DMatrix::from_row_slice(self.rows, self.cols, &out)
    }
}

fn rule_for(space: &FeSpace) -> QuadratureRule {
    QuadratureRule::tet(2 * space.order() + 2)
}

fn nedelec_tables(
    space: &FeSpace,
    rule: &QuadratureRule,
) -> Result<crate::reference::VectorTable, FemError> {
    let b = space
        .nedelec_basis()
        .ok_or_else(|| FemError::DimensionMismatch("expected a curl-conforming space".into()))?;
    Ok(b.tabulate(&rule.points))
}

fn lagrange_tables(
    space: &FeSpace,
    rule: &QuadratureRule,
) -> Result<crate::reference::ScalarTable, FemError> {
    let b = space
        .lagrange_basis()
        .ok_or_else(|| FemError::DimensionMismatch("expected a scalar space".into()))?;
    Ok(b.tabulate(&rule.points))
}

/// `|det J| J^{-1} ε J^{-T}`: pulls an ε-weighted pairing of covariant fields back
/// to the reference element.
fn covariant_tensor(space: &FeSpace, t: usize, eps: &Matrix3<f64>) -> Matrix3<f64> {
    let map = space.element_map(t);
    map.inverse * eps * map.inverse.transpose() * map.det.abs()
}

fn curl_tensor(space: &FeSpace, t: usize, chi: &Matrix3<f64>) -> Matrix3<f64> {
    let map = space.element_map(t);
    map.jacobian.transpose() * chi * map.jacobian / map.det.abs()
}

fn scatter(
    rows: &FeSpace,
    cols: &FeSpace,
    locals: Vec<(usize, DMatrix<f64>)>,
    role: Role,
) -> SparseOperator {
    let mut triplets = Vec::with_capacity(locals.iter().map(|(_, m)| m.len()).sum());
    for (t, m) in locals {
        let rd = rows.cell_dofs(t);
        let cd = cols.cell_dofs(t);
        for (i, &gi) in rd.iter().enumerate() {
            let Some(fi) = rows.free_index(gi) else {
                continue;
            };
            for (j, &gj) in cd.iter().enumerate() {
                if let Some(fj) = cols.free_index(gj) {
                    triplets.push((fi, fj, m[(i, j)]));
                }
            }
        }
    }
    SparseOperator::from_triplets(rows.n_free(), cols.n_free(), triplets, role)
}

/// Element loop in canonical element order; local matrices are computed in
/// parallel and scattered sequentially, so the result is independent of thread
/// count and of the storage order of the elements.
fn element_loop(
    space: &FeSpace,
    f: impl Fn(usize) -> DMatrix<f64> + Sync,
) -> Vec<(usize, DMatrix<f64>)> {
    space
        .canonical_order()
        .par_iter()
        .map(|&t| (t, f(t)))
        .collect()
}

/// Assembles the mass, curl-curl or scalar stiffness matrix on the free DOFs.
pub fn assemble(
    space: &FeSpace,
    coeffs: &CoefficientField,
    role: Role,
) -> Result<SparseOperator, FemError> {
    coeffs.check_labels(space.mesh().n_subdomains())?;
    let rule = rule_for(space);
    let labels = space.mesh().labels();
    match role {
        Role::Mass | Role::CurlCurl => {
            let tab = nedelec_tables(space, &rule)?;
            let n = tab.n_basis;
            let tensors = if role == Role::Mass {
                RefTensors::new(n, n, &rule, |q, i| tab.value(q, i), |q, j| tab.value(q, j))
            } else {
                RefTensors::new(n, n, &rule, |q, i| tab.curl(q, i), |q, j| tab.curl(q, j))
            };
            let locals = element_loop(space, |t| {
                let a = if role == Role::Mass {
                    covariant_tensor(space, t, coeffs.epsilon(labels[t]))
                } else {
                    curl_tensor(space, t, coeffs.chi(labels[t]))
                };
                tensors.contract(&a)
            });
            Ok(scatter(space, space, locals, role))
        }
        Role::Stiffness => {
            let tab = lagrange_tables(space, &rule)?;
            let n = tab.n_basis;
            let tensors = RefTensors::new(
                n,
                n,
                &rule,
                |q, i| tab.gradient(q, i),
                |q, j| tab.gradient(q, j),
            );
            let locals = element_loop(space, |t| {
                tensors.contract(&covariant_tensor(space, t, coeffs.epsilon(labels[t])))
            });
            Ok(scatter(space, space, locals, role))
        }
        Role::Mixed => Err(FemError::DimensionMismatch(
            "the mixed matrix needs a vector and a scalar space; use assemble_mixed".into(),
        )),
        Role::Custom => Err(FemError::DimensionMismatch(
            "no assembly rule for a custom role".into(),
        )),
    }
}

fn check_pair(nedelec: &FeSpace, lagrange: &FeSpace) -> Result<(), FemError> {
    if nedelec.flavor() != Flavor::Nedelec || lagrange.flavor() != Flavor::Lagrange {
        return Err(FemError::DimensionMismatch(
            "expected a (vector, scalar) space pair".into(),
        ));
    }
    if !std::sync::Arc::ptr_eq(nedelec.mesh(), lagrange.mesh())
        && !nedelec.mesh().same_as(lagrange.mesh())
    {
        return Err(FemError::DimensionMismatch(
            "spaces live on different meshes".into(),
        ));
    }
    if nedelec.order() != lagrange.order() {
        return Err(FemError::DimensionMismatch(format!(
            "vector order {} does not match scalar order {} + 1",
            nedelec.order(),
            lagrange.order()
        )));
    }
    Ok(())
}

/// `B_ij = (ε φ_i, grad ψ_j)` with vector rows and scalar columns, on free DOFs.
pub fn assemble_mixed(
    nedelec: &FeSpace,
    lagrange: &FeSpace,
    coeffs: &CoefficientField,
) -> Result<SparseOperator, FemError> {
    check_pair(nedelec, lagrange)?;
    coeffs.check_labels(nedelec.mesh().n_subdomains())?;
    let rule = rule_for(nedelec);
    let vt = nedelec_tables(nedelec, &rule)?;
    let st = lagrange_tables(lagrange, &rule)?;
    let tensors = RefTensors::new(
        vt.n_basis,
        st.n_basis,
        &rule,
        |q, i| vt.value(q, i),
        |q, j| st.gradient(q, j),
    );
    let labels = nedelec.mesh().labels();
    let locals = element_loop(nedelec, |t| {
        tensors.contract(&covariant_tensor(nedelec, t, coeffs.epsilon(labels[t])))
    });
    Ok(scatter(nedelec, lagrange, locals, Role::Mixed))
}

/// Coefficients of the gradients of the scalar basis in the vector space, on
/// free DOFs. Exact because gradients of order `p + 1` scalars lie in the order
/// `p` curl-conforming space.
pub fn gradient_matrix(nedelec: &FeSpace, lagrange: &FeSpace) -> Result<SparseOperator, FemError> {
    check_pair(nedelec, lagrange)?;
    let local = nedelec
        .nedelec_basis()
        .unwrap()
        .gradient_matrix(lagrange.lagrange_basis().unwrap());
    let mut done = vec![false; nedelec.n_dofs()];
    let mut triplets = Vec::new();
    for &t in nedelec.canonical_order() {
        let cd = lagrange.cell_dofs(t);
        for (i, &gi) in nedelec.cell_dofs(t).iter().enumerate() {
            if std::mem::replace(&mut done[gi], true) {
                continue;
            }
            let Some(fi) = nedelec.free_index(gi) else {
                continue;
            };
            for (j, &gj) in cd.iter().enumerate() {
                let v = local[(i, j)];
                if v.abs() > 1e-14 {
                    if let Some(fj) = lagrange.free_index(gj) {
                        triplets.push((fi, fj, v));
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(
        nedelec.n_free(),
        lagrange.n_free(),
        triplets,
        Role::Custom,
    ))
}

/// Which weighted quantity a norm measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    /// `(ε v, v)`.
    Epsilon,
    /// `(χ curl v, curl v)`.
    ChiCurl,
}

fn full_length<'a>(
    space: &FeSpace,
    coeffs: &'a [f64],
) -> Result<std::borrow::Cow<'a, [f64]>, FemError> {
    if coeffs.len() == space.n_dofs() {
        Ok(std::borrow::Cow::Borrowed(coeffs))
    } else if coeffs.len() == space.n_free() {
        Ok(std::borrow::Cow::Owned(space.extend(coeffs)))
    } else {
        Err(FemError::DimensionMismatch(format!(
            "vector of length {} for a space with {} DOFs ({} free)",
            coeffs.len(),
            space.n_dofs(),
            space.n_free()
        )))
    }
}

/// Per-element quadrature loop over physical values, curls and derivatives.
fn integrate_fields(
    space: &FeSpace,
    coeffs: &[f64],
    mut f: impl FnMut(usize, f64, Vector3<f64>, Vector3<f64>, Matrix3<f64>),
) -> Result<(), FemError> {
    let b = space
        .nedelec_basis()
        .ok_or_else(|| FemError::DimensionMismatch("expected a curl-conforming space".into()))?;
    let coeffs = full_length(space, coeffs)?;
    let rule = rule_for(space);
    let tab = b.tabulate(&rule.points);
    for t in 0..space.mesh().n_tets() {
        let map = space.element_map(t);
        let jt_inv = map.inverse.transpose();
        let dofs = space.cell_dofs(t);
        for (q, &xh) in rule.points.iter().enumerate() {
            let mut v = Vector3::zeros();
            let mut c = Vector3::zeros();
            let mut d = Matrix3::zeros();
            for (i, &g) in dofs.iter().enumerate() {
                let a = coeffs[g];
                if a == 0.0 {
                    continue;
                }
                v += a * Vector3::from(tab.value(q, i));
                c += a * Vector3::from(tab.curl(q, i));
                d += a * Matrix3::from(b.jacobian(i, xh)).transpose();
            }
            let w = rule.weights[q] * map.det.abs();
            f(
                t,
                w,
                jt_inv * v,
                map.jacobian * c / map.det,
                jt_inv * d * map.inverse,
            );
        }
    }
    Ok(())
}

/// Weighted L2 norm of a field or of its curl.
pub fn norm_weighted(
    space: &FeSpace,
    coeffs: &[f64],
    field: &CoefficientField,
    weight: Weight,
) -> Result<f64, FemError> {
    let labels = space.mesh().labels();
    let mut s = 0.0;
    integrate_fields(space, coeffs, |t, w, v, c, _| {
        s += w * match weight {
            Weight::Epsilon => v.dot(&(field.epsilon(labels[t]) * v)),
            Weight::ChiCurl => c.dot(&(field.chi(labels[t]) * c)),
        };
    })?;
    Ok(s.max(0.0).sqrt())
}

/// `(ω² ||v||_ε² + ||curl v||_χ²)^{1/2}`.
pub fn norm_energy(
    space: &FeSpace,
    coeffs: &[f64],
    field: &CoefficientField,
    omega: f64,
) -> Result<f64, FemError> {
    if !(omega > 0.0) {
        return Err(FemError::NonPositiveFrequency(omega));
    }
    let labels = space.mesh().labels();
    let mut s = 0.0;
    integrate_fields(space, coeffs, |t, w, v, c, _| {
        s += w
            * (omega * omega * v.dot(&(field.epsilon(labels[t]) * v))
                + c.dot(&(field.chi(labels[t]) * c)));
    })?;
    Ok(s.sqrt())
}

/// Which weighted L2 norm and scalar bound enter the broken H1 norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BrokenWeight {
    /// `||v||_ε² + d² Σ ε_max ||∂_a v_l||²`.
    Epsilon,
    /// `||v||_χ² + d² Σ χ_max ||∂_a v_l||²`.
    Chi,
}

/// Broken H1 norm with first derivatives taken element by element (discrete fields
/// are only piecewise smooth) and scaled by the squared box diameter.
pub fn norm_broken_h1(
    space: &FeSpace,
    coeffs: &[f64],
    field: &CoefficientField,
    weight: BrokenWeight,
) -> Result<f64, FemError> {
    let labels = space.mesh().labels();
    let d2 = field.diameter().powi(2);
    let mut s = 0.0;
    integrate_fields(space, coeffs, |t, w, v, _, d| {
        let sub = field.subdomain(labels[t]);
        let (tensor, bound) = match weight {
            BrokenWeight::Epsilon => (sub.epsilon, sub.epsilon_max),
            BrokenWeight::Chi => (sub.chi, sub.chi_max),
        };
        s += w * (v.dot(&(tensor * v)) + d2 * bound * d.norm_squared());
    })?;
    Ok(s.sqrt())
}

/// Convenience: the scalar space paired with a vector space, same mesh and bc.
pub fn companion_lagrange(space: &FeSpace) -> Result<FeSpace, FemError> {
    FeSpace::lagrange(space.mesh().clone(), space.order(), space.bc())
}
