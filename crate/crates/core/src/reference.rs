//! Reference-element bases.
//!
//! The curl-conforming basis of order `p` spans `P_p^3 + x × P~_p` on the
//! reference tetrahedron with vertices `0, e1, e2, e3`. Its degrees of freedom are
//! moments:
//!
//! * edge `(a, b)`, `a < b`: `∫_0^1 v(x_a + s t)·t q_k(s) ds` with `t = x_b - x_a`
//!   and `q_k` orthonormal in `P_p([0, 1])`, `k = 0..=p`;
//! * face `(a, b, c)`, `a < b < c`: `∫ v(x_a + s t_ab + r t_ac)·t ψ_k(s, r)` over the
//!   unit parameter triangle for `t ∈ {t_ab, t_ac}` and `ψ_k` orthonormal in
//!   `P_{p-1}`, ordered `(t_ab ψ_0, t_ac ψ_0, t_ab ψ_1, ...)`;
//! * interior: `∫ v̂·e_m ψ_k` with `ψ_k` orthonormal in `P_{p-2}` on the tetrahedron,
//!   ordered `(e_0 ψ_0, e_1 ψ_0, e_2 ψ_0, e_0 ψ_1, ...)`.
//!
//! All moments are invariant under covariant Piola pullback when the element map
//! sends reference vertices to physical vertices in ascending global order, so
//! shared degrees of freedom agree between neighbouring elements without signs.
//!
//! The scalar basis of order `k` is nodal at the equispaced lattice points.

use nalgebra::{DMatrix, DVector};

use crate::error::FemError;
use crate::mesh::{LOCAL_EDGES, LOCAL_FACES};
use crate::polynomial::{dim_p, dot, MonomialSet};
use crate::quadrature::{LineRule, QuadratureRule, TriangleRule};

/// Largest supported curl-conforming order.
pub const MAX_ORDER: usize = 4;

/// Polynomials are expanded about the reference centroid for conditioning.
const CENTER: [f64; 3] = [0.25, 0.25, 0.25];

fn centered(x: [f64; 3]) -> [f64; 3] {
    [x[0] - CENTER[0], x[1] - CENTER[1], x[2] - CENTER[2]]
}

const REF_VERTICES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Vertex,
    Edge,
    Face,
    Interior,
}

/// Sub-entity carrying a local degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofEntity {
    pub kind: EntityKind,
    /// Local vertex, edge or face number (0 for interior).
    pub index: usize,
    /// Position among the degrees of freedom of that entity.
    pub offset: usize,
}

/// Dimension of the order-`p` curl-conforming space on a tetrahedron.
pub fn nedelec_dim(p: usize) -> usize {
    (p + 1) * (p + 3) * (p + 4) / 2
}

pub fn edge_dofs(p: usize) -> usize {
    p + 1
}

pub fn face_dofs(p: usize) -> usize {
    p * (p + 1)
}

pub fn interior_dofs(p: usize) -> usize {
    if p < 2 {
        0
    } else {
        3 * dim_p(p - 2)
    }
}

/// A linear functional `v ↦ Σ w·v(x)` over a point set.
#[derive(Clone, Debug, Default)]
pub struct Functional {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<[f64; 3]>,
}

impl Functional {
    pub fn apply(&self, v: impl Fn([f64; 3]) -> [f64; 3]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| {
                let f = v(x);
                w[0] * f[0] + w[1] * f[1] + w[2] * f[2]
            })
            .sum()
    }
}

/// Orthonormalizes the columns of a value table in the discrete inner product
/// given by `weights` (Cholesky of the Gram matrix).
fn orthonormalize(values: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    let gram = values.transpose() * &w * values;
    let l = gram.cholesky().expect("monomials are independent").l();
    let lt_inv = l
        .transpose()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    values * lt_inv
}

fn monomials_1d(deg: usize, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(s.len(), deg + 1, |i, k| s[i].powi(k as i32))
}

fn monomials_2d(deg: usize, pts: &[[f64; 2]]) -> DMatrix<f64> {
    let exps: Vec<(i32, i32)> = (0..=deg as i32)
        .flat_map(|t| (0..=t).rev().map(move |a| (a, t - a)))
        .collect();
    DMatrix::from_fn(pts.len(), exps.len(), |i, k| {
        pts[i][0].powi(exps[k].0) * pts[i][1].powi(exps[k].1)
    })
}

fn monomials_3d(deg: usize, pts: &[[f64; 3]]) -> DMatrix<f64> {
    let set = MonomialSet::new(deg);
    let mut m = DMatrix::zeros(pts.len(), set.len());
    for (i, &x) in pts.iter().enumerate() {
        for (k, v) in set.evaluate(x).into_iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    m
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn axpy(x: [f64; 3], s: f64, t: [f64; 3]) -> [f64; 3] {
    [x[0] + s * t[0], x[1] + s * t[1], x[2] + s * t[2]]
}

fn scale(s: f64, t: [f64; 3]) -> [f64; 3] {
    [s * t[0], s * t[1], s * t[2]]
}

/// Degree-of-freedom functionals of the order-`p` curl-conforming element on the
/// tetrahedron with the given vertices, in local order.
pub fn nedelec_functionals(p: usize, vertices: [[f64; 3]; 4]) -> (Vec<Functional>, Vec<DofEntity>) {
    let degree = 2 * p + 2;
    let mut funcs = Vec::with_capacity(nedelec_dim(p));
    let mut ents = Vec::with_capacity(nedelec_dim(p));

    let line = LineRule::new(degree);
    let q = orthonormalize(&monomials_1d(p, &line.points), &line.weights);
    for (e, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        let t = sub(vertices[b], vertices[a]);
        for k in 0..=p {
            let mut f = Functional::default();
            for (i, &s) in line.points.iter().enumerate() {
                f.points.push(axpy(vertices[a], s, t));
                f.weights.push(scale(line.weights[i] * q[(i, k)], t));
            }
            funcs.push(f);
            ents.push(DofEntity {
                kind: EntityKind::Edge,
                index: e,
                offset: k,
            });
        }
    }

    if p >= 1 {
        let tri = TriangleRule::new(degree);
        let psi = orthonormalize(&monomials_2d(p - 1, &tri.points), &tri.weights);
        for (fi, &[a, b, c]) in LOCAL_FACES.iter().enumerate() {
            let tab = sub(vertices[b], vertices[a]);
            let tac = sub(vertices[c], vertices[a]);
            for k in 0..psi.ncols() {
                for (j, t) in [tab, tac].into_iter().enumerate() {
                    let mut f = Functional::default();
                    for (i, &[s, r]) in tri.points.iter().enumerate() {
                        f.points.push(axpy(axpy(vertices[a], s, tab), r, tac));
                        f.weights.push(scale(tri.weights[i] * psi[(i, k)], t));
                    }
                    funcs.push(f);
                    ents.push(DofEntity {
                        kind: EntityKind::Face,
                        index: fi,
                        offset: 2 * k + j,
                    });
                }
            }
        }
    }

    if p >= 2 {
        let rule = QuadratureRule::tet(degree);
        let psi = orthonormalize(&monomials_3d(p - 2, &rule.points), &rule.weights);
        let origin = vertices[0];
        let axes = [1, 2, 3].map(|i| sub(vertices[i], origin));
        for k in 0..psi.ncols() {
            for (m, axis) in axes.into_iter().enumerate() {
                let mut f = Functional::default();
                for (i, x) in rule.points.iter().enumerate() {
                    let phys = axpy(
                        axpy(axpy(origin, x[0], axes[0]), x[1], axes[1]),
                        x[2],
                        axes[2],
                    );
                    f.points.push(phys);
                    f.weights.push(scale(rule.weights[i] * psi[(i, k)], axis));
                }
                funcs.push(f);
                ents.push(DofEntity {
                    kind: EntityKind::Interior,
                    index: 0,
                    offset: 3 * k + m,
                });
            }
        }
    }
    (funcs, ents)
}

/// Shape function values and curls at a set of reference points.
#[derive(Clone, Debug)]
pub struct VectorTable {
    pub n_points: usize,
    pub n_basis: usize,
    /// `values[q * n_basis + i]`.
    pub values: Vec<[f64; 3]>,
    pub curls: Vec<[f64; 3]>,
}

impl VectorTable {
    pub fn value(&self, q: usize, i: usize) -> [f64; 3] {
        self.values[q * self.n_basis + i]
    }

    pub fn curl(&self, q: usize, i: usize) -> [f64; 3] {
        self.curls[q * self.n_basis + i]
    }
}

/// Scalar shape function values and gradients at a set of reference points.
#[derive(Clone, Debug)]
pub struct ScalarTable {
    pub n_points: usize,
    pub n_basis: usize,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 3]>,
}

impl ScalarTable {
    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.n_basis + i]
    }

    pub fn gradient(&self, q: usize, i: usize) -> [f64; 3] {
        self.gradients[q * self.n_basis + i]
    }
}

/// Curl-conforming reference basis of order `p`.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    order: usize,
    monomials: MonomialSet,
    /// Per shape function, per component, coefficients in `monomials`.
    coeffs: Vec<[Vec<f64>; 3]>,
    curl_coeffs: Vec<[Vec<f64>; 3]>,
    /// `deriv_coeffs[i][m][b]`: coefficients of `∂_b v_m`.
    deriv_coeffs: Vec<[[Vec<f64>; 3]; 3]>,
    functionals: Vec<Functional>,
    dofs: Vec<DofEntity>,
}

fn curl_of(m: &MonomialSet, v: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let d = |c: usize, axis: usize| m.differentiate(&v[c], axis);
    let diff = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x - y).collect();
    [
        diff(d(2, 1), d(1, 2)),
        diff(d(0, 2), d(2, 0)),
        diff(d(1, 0), d(0, 1)),
    ]
}

impl ReferenceBasis {
    pub fn new(p: usize) -> Result<Self, FemError> {
        if p > MAX_ORDER {
            return Err(FemError::UnsupportedOrder(p));
        }
        let low = MonomialSet::new(p);
        let full = MonomialSet::new(p + 1);
        let nm = full.len();

        // Spanning set in centered variables y: P_p^3 and y × (m e_k) for homogeneous
        // m of degree p. The space is translation invariant.
        let mut span: Vec<[Vec<f64>; 3]> = Vec::new();
        for c in 0..3 {
            for i in 0..low.len() {
                let mut v = [vec![0.0; nm], vec![0.0; nm], vec![0.0; nm]];
                v[c][full.index_of(low.exponents()[i]).unwrap()] = 1.0;
                span.push(v);
            }
        }
        for i in low.homogeneous(p) {
            let mut m = vec![0.0; low.len()];
            m[i] = 1.0;
            let xm = |axis: usize| low.multiply_coordinate(&m, axis, &full);
            let zero = || vec![0.0; nm];
            let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
            // y × e0 = (0, y2, -y1), y × e1 = (-y2, 0, y0), y × e2 = (y1, -y0, 0)
            span.push([zero(), xm(2), neg(xm(1))]);
            span.push([neg(xm(2)), zero(), xm(0)]);
            span.push([xm(1), neg(xm(0)), zero()]);
        }
        let a = DMatrix::from_fn(3 * nm, span.len(), |r, j| span[j][r / nm][r % nm]);
        let svd = a.svd(true, false);
        let smax = svd.singular_values.max();
        let u = svd.u.expect("left singular vectors requested");
        let cols: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
            .collect();
        let dim = nedelec_dim(p);
        assert_eq!(cols.len(), dim, "spanning set has the wrong rank");
        let basis = u.select_columns(&cols);

        let (functionals, dofs) = nedelec_functionals(p, REF_VERTICES);
        let dof_matrix = |fields: &DMatrix<f64>| {
            DMatrix::from_fn(dim, fields.ncols(), |i, j| {
                let col = fields.column(j);
                functionals[i].apply(|x| {
                    let mv = full.evaluate(centered(x));
                    let comp = |c: usize| (0..nm).map(|k| col[c * nm + k] * mv[k]).sum::<f64>();
                    [comp(0), comp(1), comp(2)]
                })
            })
        };
        let c = dof_matrix(&basis)
            .try_inverse()
            .expect("degrees of freedom are unisolvent");
        let mut shape = basis * c;
        // One Newton step towards the exact inverse cleans up rounding at high order.
        let e = dof_matrix(&shape);
        shape = &shape * (DMatrix::identity(dim, dim) * 2.0 - e);
        let coeffs: Vec<[Vec<f64>; 3]> = (0..dim)
            .map(|i| {
                let col = shape.column(i);
                std::array::from_fn(|c| (0..nm).map(|k| col[c * nm + k]).collect())
            })
            .collect();
        let curl_coeffs = coeffs.iter().map(|v| curl_of(&full, v)).collect();
        let deriv_coeffs = coeffs
            .iter()
            .map(|v| std::array::from_fn(|m| std::array::from_fn(|b| full.differentiate(&v[m], b))))
            .collect();
        Ok(Self {
            order: p,
            monomials: full,
            coeffs,
            curl_coeffs,
            deriv_coeffs,
            functionals,
            dofs,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dofs(&self) -> &[DofEntity] {
        &self.dofs
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    pub fn value(&self, i: usize, x: [f64; 3]) -> [f64; 3] {
        let mv = self.monomials.evaluate(centered(x));
        self.coeffs[i].each_ref().map(|c| dot(c, &mv))
    }

    pub fn curl(&self, i: usize, x: [f64; 3]) -> [f64; 3] {
        let mv = self.monomials.evaluate(centered(x));
        self.curl_coeffs[i].each_ref().map(|c| dot(c, &mv))
    }

    /// Reference Jacobian `[m][b] = ∂_b v_m` of shape function `i`.
    pub fn jacobian(&self, i: usize, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mv = self.monomials.evaluate(centered(x));
        self.deriv_coeffs[i]
            .each_ref()
            .map(|row| row.each_ref().map(|c| dot(c, &mv)))
    }

    pub fn tabulate(&self, points: &[[f64; 3]]) -> VectorTable {
        let n = self.dim();
        let mut values = Vec::with_capacity(points.len() * n);
        let mut curls = Vec::with_capacity(points.len() * n);
        for &x in points {
            let mv = self.monomials.evaluate(centered(x));
            for i in 0..n {
                values.push(self.coeffs[i].each_ref().map(|c| dot(c, &mv)));
                curls.push(self.curl_coeffs[i].each_ref().map(|c| dot(c, &mv)));
            }
        }
        VectorTable {
            n_points: points.len(),
            n_basis: n,
            values,
            curls,
        }
    }

    /// Coefficients of a reference vector field under this element's functionals.
    pub fn interpolate(&self, v: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
        self.functionals.iter().map(|f| f.apply(&v)).collect()
    }

    /// Local matrix whose column `j` holds the coefficients of `grad ψ_j`.
    pub fn gradient_matrix(&self, lagrange: &LagrangeBasis) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), lagrange.dim(), |i, j| {
            self.functionals[i].apply(|x| lagrange.gradient(j, x))
        })
    }
}

/// Nodal scalar basis of order `k` on the equispaced lattice.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    order: usize,
    monomials: MonomialSet,
    coeffs: Vec<Vec<f64>>,
    grad_coeffs: Vec<[Vec<f64>; 3]>,
    nodes: Vec<[f64; 3]>,
    dofs: Vec<DofEntity>,
}

impl LagrangeBasis {
    pub fn new(k: usize) -> Result<Self, FemError> {
        if k == 0 || k > MAX_ORDER + 1 {
            return Err(FemError::UnsupportedOrder(k));
        }
        let kf = k as f64;
        let mut tagged: Vec<(DofEntity, [usize; 4])> = Vec::new();
        for i in 0..=k {
            for j in 0..=k - i {
                for l in 0..=k - i - j {
                    let b = [k - i - j - l, i, j, l];
                    let support: Vec<usize> = (0..4).filter(|&a| b[a] > 0).collect();
                    let (kind, index) = match support.len() {
                        1 => (EntityKind::Vertex, support[0]),
                        2 => (
                            EntityKind::Edge,
                            LOCAL_EDGES
                                .iter()
                                .position(|e| e[..] == support[..])
                                .unwrap(),
                        ),
                        3 => (
                            EntityKind::Face,
                            LOCAL_FACES
                                .iter()
                                .position(|f| f[..] == support[..])
                                .unwrap(),
                        ),
                        _ => (EntityKind::Interior, 0),
                    };
                    tagged.push((
                        DofEntity {
                            kind,
                            index,
                            offset: 0,
                        },
                        b,
                    ));
                }
            }
        }
        // Entity-local order: by barycentric weights of the entity's later vertices.
        let order_key = |e: &DofEntity, b: &[usize; 4]| -> Vec<usize> {
            let verts: Vec<usize> = match e.kind {
                EntityKind::Vertex => vec![],
                EntityKind::Edge => LOCAL_EDGES[e.index][1..].to_vec(),
                EntityKind::Face => LOCAL_FACES[e.index][1..].to_vec(),
                EntityKind::Interior => vec![1, 2, 3],
            };
            verts.iter().map(|&v| b[v]).collect()
        };
        tagged.sort_by(|(e1, b1), (e2, b2)| {
            (e1.kind, e1.index, order_key(e1, b1)).cmp(&(e2.kind, e2.index, order_key(e2, b2)))
        });
        let mut dofs = Vec::with_capacity(tagged.len());
        let mut nodes = Vec::with_capacity(tagged.len());
        for (n, (mut e, b)) in tagged.iter().copied().enumerate() {
            let prev = n.checked_sub(1).map(|m| tagged[m].0);
            e.offset = match prev {
                Some(p) if p.kind == e.kind && p.index == e.index => {
                    dofs.last().map_or(0, |d: &DofEntity| d.offset + 1)
                }
                _ => 0,
            };
            dofs.push(e);
            nodes.push([b[1] as f64 / kf, b[2] as f64 / kf, b[3] as f64 / kf]);
        }

        let monomials = MonomialSet::new(k);
        let shifted: Vec<[f64; 3]> = nodes.iter().map(|&x| centered(x)).collect();
        let v = monomials_3d(k, &shifted);
        let inv = v.try_inverse().expect("lattice is unisolvent");
        let coeffs: Vec<Vec<f64>> = (0..inv.ncols())
            .map(|j| inv.column(j).iter().copied().collect())
            .collect();
        let grad_coeffs = coeffs
            .iter()
            .map(|c| std::array::from_fn(|a| monomials.differentiate(c, a)))
            .collect();
        Ok(Self {
            order: k,
            monomials,
            coeffs,
            grad_coeffs,
            nodes,
            dofs,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dofs(&self) -> &[DofEntity] {
        &self.dofs
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn value(&self, i: usize, x: [f64; 3]) -> f64 {
        dot(&self.coeffs[i], &self.monomials.evaluate(centered(x)))
    }

    pub fn gradient(&self, i: usize, x: [f64; 3]) -> [f64; 3] {
        let mv = self.monomials.evaluate(centered(x));
        self.grad_coeffs[i].each_ref().map(|c| dot(c, &mv))
    }

    pub fn tabulate(&self, points: &[[f64; 3]]) -> ScalarTable {
        let n = self.dim();
        let mut values = Vec::with_capacity(points.len() * n);
        let mut gradients = Vec::with_capacity(points.len() * n);
        for &x in points {
            let mv = self.monomials.evaluate(centered(x));
            for i in 0..n {
                values.push(dot(&self.coeffs[i], &mv));
                gradients.push(self.grad_coeffs[i].each_ref().map(|c| dot(c, &mv)));
            }
        }
        ScalarTable {
            n_points: points.len(),
            n_basis: n,
            values,
            gradients,
        }
    }
}
