//! Global finite element spaces.
//!
//! Every element is parametrized from the reference tetrahedron with its vertices
//! taken in ascending global id. Shared edge and face moments then coincide
//! between neighbours, so the local-to-global map needs no sign data.
//!
//! Global numbering: all edge DOFs (edge-major, edges in lexicographic order),
//! then face DOFs, then interior DOFs with elements ranked by their sorted vertex
//! tuples. Scalar spaces put vertex DOFs first.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::FemError;
use crate::mesh::{AffineMap, Mesh, LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::QuadratureRule;
use crate::reference::{
    edge_dofs, face_dofs, interior_dofs, DofEntity, EntityKind, LagrangeBasis, ReferenceBasis,
    MAX_ORDER,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    /// Curl-conforming space of order `p`.
    Nedelec,
    /// Continuous scalar space of order `p + 1`.
    Lagrange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Vanishing tangential trace (vector) or trace (scalar) on the boundary.
    Zero,
    None,
}

#[derive(Clone, Debug)]
enum Basis {
    Nedelec(Arc<ReferenceBasis>),
    Lagrange(Arc<LagrangeBasis>),
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    order: usize,
    flavor: Flavor,
    bc: BoundaryCondition,
    basis: Basis,
    n_dofs: usize,
    local_dim: usize,
    sorted_vertices: Vec<[usize; 4]>,
    cell_dofs: Vec<usize>,
    boundary: Vec<bool>,
    free_dofs: Vec<usize>,
    free_index: Vec<Option<usize>>,
    canonical: Vec<usize>,
}

fn sorted(t: [usize; 4]) -> [usize; 4] {
    let mut s = t;
    s.sort_unstable();
    s
}

impl FeSpace {
    /// Curl-conforming space of order `p`, or the scalar space of order `p + 1`
    /// for the Lagrange flavor.
    pub fn new(
        mesh: Arc<Mesh>,
        p: usize,
        flavor: Flavor,
        bc: BoundaryCondition,
    ) -> Result<Self, FemError> {
        if p > MAX_ORDER {
            return Err(FemError::UnsupportedOrder(p));
        }
        let basis = match flavor {
            Flavor::Nedelec => Basis::Nedelec(Arc::new(ReferenceBasis::new(p)?)),
            Flavor::Lagrange => Basis::Lagrange(Arc::new(LagrangeBasis::new(p + 1)?)),
        };
        let nt = mesh.n_tets();
        let sorted_vertices: Vec<[usize; 4]> = mesh.tets().iter().map(|&t| sorted(t)).collect();
        let mut canonical: Vec<usize> = (0..nt).collect();
        canonical.sort_by_key(|&t| sorted_vertices[t]);
        let mut rank = vec![0; nt];
        for (r, &t) in canonical.iter().enumerate() {
            rank[t] = r;
        }

        let (nv, ne, nf) = (mesh.n_vertices(), mesh.edges().len(), mesh.faces().len());
        let k = p + 1;
        let (per_vertex, per_edge, per_face, per_cell, dofs): (
            usize,
            usize,
            usize,
            usize,
            Vec<DofEntity>,
        ) = match &basis {
            Basis::Nedelec(b) => (
                0,
                edge_dofs(p),
                face_dofs(p),
                interior_dofs(p),
                b.dofs().to_vec(),
            ),
            Basis::Lagrange(b) => (
                1,
                k - 1,
                (k - 1) * k.saturating_sub(2) / 2,
                if k >= 4 {
                    (k - 1) * (k - 2) * (k - 3) / 6
                } else {
                    0
                },
                b.dofs().to_vec(),
            ),
        };
        let edge_base = nv * per_vertex;
        let face_base = edge_base + ne * per_edge;
        let cell_base = face_base + nf * per_face;
        let n_dofs = cell_base + nt * per_cell;
        let local_dim = dofs.len();

        let mut cell_dofs = Vec::with_capacity(nt * local_dim);
        for t in 0..nt {
            let sv = sorted_vertices[t];
            let tet = mesh.tets()[t];
            let face_of = |i: usize| {
                let opposite = sv[i];
                let k = tet.iter().position(|&v| v == opposite).unwrap();
                mesh.tet_faces()[t][k]
            };
            for d in &dofs {
                let g = match d.kind {
                    EntityKind::Vertex => sv[d.index],
                    EntityKind::Edge => {
                        let [a, b] = LOCAL_EDGES[d.index];
                        edge_base + mesh.edge_id(sv[a], sv[b]).unwrap() * per_edge + d.offset
                    }
                    EntityKind::Face => {
                        // LOCAL_FACES[i] is the face opposite local vertex i.
                        face_base + face_of(d.index) * per_face + d.offset
                    }
                    EntityKind::Interior => cell_base + rank[t] * per_cell + d.offset,
                };
                cell_dofs.push(g);
            }
        }
        debug_assert!(LOCAL_FACES.iter().enumerate().all(|(i, f)| !f.contains(&i)));

        let mut boundary = vec![false; n_dofs];
        for v in 0..nv {
            if per_vertex > 0 && mesh.boundary_vertices()[v] {
                boundary[v] = true;
            }
        }
        for e in 0..ne {
            if mesh.boundary_edges()[e] {
                for o in 0..per_edge {
                    boundary[edge_base + e * per_edge + o] = true;
                }
            }
        }
        for f in 0..nf {
            if mesh.boundary_faces()[f] {
                for o in 0..per_face {
                    boundary[face_base + f * per_face + o] = true;
                }
            }
        }
        let mut free_dofs = Vec::new();
        let mut free_index = vec![None; n_dofs];
        for g in 0..n_dofs {
            if bc == BoundaryCondition::None || !boundary[g] {
                free_index[g] = Some(free_dofs.len());
                free_dofs.push(g);
            }
        }
        Ok(Self {
            mesh,
            order: p,
            flavor,
            bc,
            basis,
            n_dofs,
            local_dim,
            sorted_vertices,
            cell_dofs,
            boundary,
            free_dofs,
            free_index,
            canonical,
        })
    }

    pub fn nedelec(mesh: Arc<Mesh>, p: usize, bc: BoundaryCondition) -> Result<Self, FemError> {
        Self::new(mesh, p, Flavor::Nedelec, bc)
    }

    /// Scalar space of order `p + 1`.
    pub fn lagrange(mesh: Arc<Mesh>, p: usize, bc: BoundaryCondition) -> Result<Self, FemError> {
        Self::new(mesh, p, Flavor::Lagrange, bc)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Order `p` of the curl-conforming space this space belongs to.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn free_index(&self, g: usize) -> Option<usize> {
        self.free_index[g]
    }

    /// DOFs lying on boundary edges or faces (and vertices for scalar spaces).
    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.local_dim..(t + 1) * self.local_dim]
    }

    /// Element indices ordered by their sorted vertex tuples.
    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical
    }

    pub fn sorted_vertices(&self, t: usize) -> [usize; 4] {
        self.sorted_vertices[t]
    }

    pub fn nedelec_basis(&self) -> Option<&Arc<ReferenceBasis>> {
        match &self.basis {
            Basis::Nedelec(b) => Some(b),
            Basis::Lagrange(_) => None,
        }
    }

    pub fn lagrange_basis(&self) -> Option<&Arc<LagrangeBasis>> {
        match &self.basis {
            Basis::Lagrange(b) => Some(b),
            Basis::Nedelec(_) => None,
        }
    }

    /// Element map with reference vertices sent to the sorted physical vertices.
    /// The determinant may be negative.
    pub fn element_map(&self, t: usize) -> AffineMap {
        let v = self.sorted_vertices[t].map(|i| self.mesh.vertices()[i]);
        AffineMap::from_vertices(v).expect("valid mesh has no degenerate tets")
    }

    /// Restricts a full coefficient vector to the free DOFs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| full[g]).collect()
    }

    /// Extends a free-DOF vector by zero.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs];
        for (i, &g) in self.free_dofs.iter().enumerate() {
            full[g] = free[i];
        }
        full
    }

    /// Interpolates a physical vector field with the DOF functionals. Exact on
    /// every field that lies in the space, in particular on constants.
    pub fn interpolate(&self, field: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
        let b = self
            .nedelec_basis()
            .expect("vector interpolation needs a curl-conforming space");
        let mut out = vec![0.0; self.n_dofs];
        let mut done = vec![false; self.n_dofs];
        for t in 0..self.mesh.n_tets() {
            let map = self.element_map(t);
            for (i, &g) in self.cell_dofs(t).iter().enumerate() {
                if done[g] {
                    continue;
                }
                done[g] = true;
                let f = &b.functionals()[i];
                out[g] = f
                    .points
                    .iter()
                    .zip(&f.weights)
                    .map(|(&xh, w)| {
                        let x = map.apply(xh);
                        let v = Vector3::from(field(x));
                        let wp = map.jacobian * Vector3::from(*w);
                        wp.dot(&v)
                    })
                    .sum();
            }
        }
        out
    }

    /// Interpolates a scalar function at the nodes.
    pub fn interpolate_scalar(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        let b = self
            .lagrange_basis()
            .expect("scalar interpolation needs a Lagrange space");
        let mut out = vec![0.0; self.n_dofs];
        for t in 0..self.mesh.n_tets() {
            let map = self.element_map(t);
            for (i, &g) in self.cell_dofs(t).iter().enumerate() {
                out[g] = f(map.apply(b.nodes()[i]));
            }
        }
        out
    }

    /// Value and curl of a vector field at reference point `xhat` of element `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, xhat: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let b = self.nedelec_basis().expect("curl-conforming space");
        let map = self.element_map(t);
        let mut v = [0.0; 3];
        let mut c = [0.0; 3];
        for (i, &g) in self.cell_dofs(t).iter().enumerate() {
            let a = coeffs[g];
            if a == 0.0 {
                continue;
            }
            let phi = b.value(i, xhat);
            let cu = b.curl(i, xhat);
            for k in 0..3 {
                v[k] += a * phi[k];
                c[k] += a * cu[k];
            }
        }
        (map_piola(&map, v), map_piola_curl(&map, c))
    }

    /// Field values at every quadrature point of every element, in element order.
    pub fn sample(
        &self,
        coeffs: &[f64],
        rule: &QuadratureRule,
    ) -> Vec<(usize, [f64; 3], [f64; 3])> {
        let mut out = Vec::with_capacity(self.mesh.n_tets() * rule.len());
        for t in 0..self.mesh.n_tets() {
            let map = self.element_map(t);
            for &xh in &rule.points {
                out.push((t, map.apply(xh), self.evaluate(coeffs, t, xh).0));
            }
        }
        out
    }
}

/// Covariant Piola transform of a reference value.
pub fn map_piola(map: &AffineMap, v: [f64; 3]) -> [f64; 3] {
    (map.inverse.transpose() * Vector3::from(v)).into()
}

/// Transform of a reference curl.
pub fn map_piola_curl(map: &AffineMap, c: [f64; 3]) -> [f64; 3] {
    (map.jacobian * Vector3::from(c) / map.det).into()
}

/// `J^{-T}`, used for values and gradients.
pub fn covariant(map: &AffineMap) -> Matrix3<f64> {
    map.inverse.transpose()
}
