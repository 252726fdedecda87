//! Conforming affine tetrahedral meshes of axis-aligned boxes.
//!
//! Boxes are split into cubes and every cube into the six Kuhn tetrahedra that
//! share its main diagonal. Uniform refinement uses Bey's red rule applied to the
//! Kuhn vertex path, so refining a Kuhn mesh of `n` divisions yields exactly the
//! Kuhn mesh of `2n` divisions and the finite element spaces built on the two
//! meshes are nested.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::MeshError;

/// Local edges of a tetrahedron, as pairs of local vertex indices.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces of a tetrahedron; face `i` is opposite local vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl BoxDomain {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Self {
        Self { lower, upper }
    }

    /// Cube `[0, side]^3`.
    pub fn cube(side: f64) -> Self {
        Self::new([0.0; 3], [side; 3])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.upper[a] - self.lower[a]).product()
    }

    /// Largest distance between two points of the box.
    pub fn diameter(&self) -> f64 {
        (0..3)
            .map(|a| (self.upper[a] - self.lower[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Axis-aligned cut separating two subdomains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionPlane {
    pub axis: usize,
    pub coordinate: f64,
}

/// Affine element map `x = origin + jacobian * xhat` for a given vertex ordering.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    pub origin: Vector3<f64>,
    pub jacobian: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub det: f64,
}

impl AffineMap {
    pub fn from_vertices(v: [[f64; 3]; 4]) -> Option<Self> {
        let origin = Vector3::from(v[0]);
        let col = |i: usize| Vector3::from(v[i]) - origin;
        let jacobian = Matrix3::from_columns(&[col(1), col(2), col(3)]);
        let det = jacobian.determinant();
        let inverse = jacobian.try_inverse()?;
        Some(Self {
            origin,
            jacobian,
            inverse,
            det,
        })
    }

    pub fn apply(&self, xhat: [f64; 3]) -> [f64; 3] {
        (self.origin + self.jacobian * Vector3::from(xhat)).into()
    }

    pub fn apply_inverse(&self, x: [f64; 3]) -> [f64; 3] {
        (self.inverse * (Vector3::from(x) - self.origin)).into()
    }
}

#[derive(Clone, Debug)]
pub struct ParentLink {
    pub mesh: Arc<Mesh>,
    /// Parent tetrahedron of every child tetrahedron.
    pub parent_tet: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 3]>,
    /// Vertex order used by red refinement (the Kuhn path for box meshes).
    cells: Vec<[usize; 4]>,
    /// Same tetrahedra, reordered so the element Jacobian is positive.
    tets: Vec<[usize; 4]>,
    labels: Vec<usize>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    tet_edges: Vec<[usize; 6]>,
    tet_edge_signs: Vec<[i8; 6]>,
    tet_faces: Vec<[usize; 4]>,
    tet_face_signs: Vec<[i8; 4]>,
    boundary_vertices: Vec<bool>,
    boundary_edges: Vec<bool>,
    boundary_faces: Vec<bool>,
    edge_lookup: HashMap<[usize; 2], usize>,
    parent: Option<ParentLink>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshStatistics {
    /// Largest element diameter.
    pub h: f64,
    /// Smallest inradius-to-diameter ratio over all elements.
    pub quality: f64,
    pub tets_per_subdomain: Vec<usize>,
    pub volume_per_subdomain: Vec<f64>,
}

fn sort3(mut f: [usize; 3]) -> ([usize; 3], i8) {
    let mut sign = 1;
    for i in 0..3 {
        for j in 0..2 - i {
            if f[j] > f[j + 1] {
                f.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    (f, sign)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn tri_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = Vector3::from(b) - Vector3::from(a);
    let v = Vector3::from(c) - Vector3::from(a);
    0.5 * u.cross(&v).norm()
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and tetrahedra given in refinement order.
    pub fn from_cells(
        vertices: Vec<[f64; 3]>,
        cells: Vec<[usize; 4]>,
        labels: Vec<usize>,
    ) -> Result<Self, MeshError> {
        assert_eq!(cells.len(), labels.len(), "one label per tetrahedron");
        let nv = vertices.len();
        let mut tets = Vec::with_capacity(cells.len());
        for (t, c) in cells.iter().enumerate() {
            for &v in c {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        tet: t,
                        vertex: v,
                        count: nv,
                    });
                }
            }
            let map = AffineMap::from_vertices(c.map(|v| vertices[v]))
                .ok_or(MeshError::DegenerateTet(t))?;
            let scale = (0..3)
                .map(|i| map.jacobian.column(i).norm())
                .product::<f64>();
            if map.det.abs() <= 1e-12 * scale {
                return Err(MeshError::DegenerateTet(t));
            }
            tets.push(if map.det > 0.0 {
                *c
            } else {
                [c[0], c[1], c[3], c[2]]
            });
        }

        let mut edges: Vec<[usize; 2]> = tets
            .iter()
            .flat_map(|t| {
                LOCAL_EDGES.iter().map(move |&[a, b]| {
                    let (u, v) = (t[a], t[b]);
                    [u.min(v), u.max(v)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let edge_lookup: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        let mut face_keys: Vec<[usize; 3]> = tets
            .iter()
            .flat_map(|t| {
                LOCAL_FACES
                    .iter()
                    .map(move |&[a, b, c]| sort3([t[a], t[b], t[c]]).0)
            })
            .collect();
        face_keys.sort_unstable();
        let mut faces = Vec::new();
        let mut face_count = Vec::new();
        for f in face_keys {
            if faces.last() == Some(&f) {
                *face_count.last_mut().unwrap() += 1;
            } else {
                faces.push(f);
                face_count.push(1usize);
            }
        }
        for (f, &c) in faces.iter().zip(&face_count) {
            if c > 2 {
                return Err(MeshError::NonConforming(*f));
            }
        }
        let face_lookup: HashMap<[usize; 3], usize> =
            faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();

        let mut tet_edges = Vec::with_capacity(tets.len());
        let mut tet_edge_signs = Vec::with_capacity(tets.len());
        let mut tet_faces = Vec::with_capacity(tets.len());
        let mut tet_face_signs = Vec::with_capacity(tets.len());
        for t in &tets {
            let mut ids = [0; 6];
            let mut signs = [0i8; 6];
            for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (u, v) = (t[a], t[b]);
                ids[k] = edge_lookup[&[u.min(v), u.max(v)]];
                signs[k] = if u < v { 1 } else { -1 };
            }
            tet_edges.push(ids);
            tet_edge_signs.push(signs);
            let mut fids = [0; 4];
            let mut fsigns = [0i8; 4];
            for (k, &[a, b, c]) in LOCAL_FACES.iter().enumerate() {
                let (key, sign) = sort3([t[a], t[b], t[c]]);
                fids[k] = face_lookup[&key];
                fsigns[k] = sign;
            }
            tet_faces.push(fids);
            tet_face_signs.push(fsigns);
        }

        let boundary_faces: Vec<bool> = face_count.iter().map(|&c| c == 1).collect();
        let mut boundary_vertices = vec![false; nv];
        let mut boundary_edges = vec![false; edges.len()];
        for (f, _) in faces.iter().zip(&boundary_faces).filter(|(_, &b)| b) {
            for &v in f {
                boundary_vertices[v] = true;
            }
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                boundary_edges[edge_lookup[&[f[a], f[b]]]] = true;
            }
        }

        Ok(Self {
            vertices,
            cells,
            tets,
            labels,
            edges,
            faces,
            tet_edges,
            tet_edge_signs,
            tet_faces,
            tet_face_signs,
            boundary_vertices,
            boundary_edges,
            boundary_faces,
            edge_lookup,
            parent: None,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    /// Positively oriented tetrahedra.
    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    /// Tetrahedra in the vertex order used by refinement and the text format.
    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn tet_edges(&self) -> &[[usize; 6]] {
        &self.tet_edges
    }

    /// +1 when the local edge runs from the lower to the higher global vertex id.
    pub fn tet_edge_signs(&self) -> &[[i8; 6]] {
        &self.tet_edge_signs
    }

    pub fn tet_faces(&self) -> &[[usize; 4]] {
        &self.tet_faces
    }

    /// Parity of the permutation sorting each local face into ascending global ids.
    pub fn tet_face_signs(&self) -> &[[i8; 4]] {
        &self.tet_face_signs
    }

    pub fn boundary_vertices(&self) -> &[bool] {
        &self.boundary_vertices
    }

    pub fn boundary_edges(&self) -> &[bool] {
        &self.boundary_edges
    }

    pub fn boundary_faces(&self) -> &[bool] {
        &self.boundary_faces
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&[a.min(b), a.max(b)]).copied()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_subdomains(&self) -> usize {
        self.labels.iter().map(|&l| l + 1).max().unwrap_or(0)
    }

    pub fn parent(&self) -> Option<&ParentLink> {
        self.parent.as_ref()
    }

    pub fn tet_vertices(&self, t: usize) -> [[f64; 3]; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Element map of tetrahedron `t` in its positively oriented vertex order.
    pub fn element_map(&self, t: usize) -> AffineMap {
        AffineMap::from_vertices(self.tet_vertices(t)).expect("valid mesh has no degenerate tets")
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        self.element_map(t).det / 6.0
    }

    pub fn tet_diameter(&self, t: usize) -> f64 {
        let v = self.tet_vertices(t);
        LOCAL_EDGES
            .iter()
            .map(|&[a, b]| dist(v[a], v[b]))
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> [f64; 3] {
        let v = self.tet_vertices(t);
        let mut c = [0.0; 3];
        for p in v {
            for a in 0..3 {
                c[a] += 0.25 * p[a];
            }
        }
        c
    }

    /// Same vertex coordinates and tetrahedra (in refinement order) as `other`.
    pub fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other)
            || (self.vertices == other.vertices
                && self.cells == other.cells
                && self.labels == other.labels)
    }

    /// For every tetrahedron, the tetrahedron of `ancestor` containing it, provided
    /// this mesh was produced from `ancestor` by zero or more uniform refinements.
    pub fn ancestor_map(&self, ancestor: &Mesh) -> Option<Vec<usize>> {
        if self.same_as(ancestor) {
            return Some((0..self.n_tets()).collect());
        }
        let link = self.parent.as_ref()?;
        let up = link.mesh.ancestor_map(ancestor)?;
        Some(link.parent_tet.iter().map(|&p| up[p]).collect())
    }

    pub fn statistics(&self) -> MeshStatistics {
        let ns = self.n_subdomains();
        let mut tets_per_subdomain = vec![0; ns];
        let mut volume_per_subdomain = vec![0.0; ns];
        let mut h = 0.0f64;
        let mut quality = f64::INFINITY;
        for t in 0..self.n_tets() {
            let v = self.tet_vertices(t);
            let diam = self.tet_diameter(t);
            let vol = self.tet_volume(t);
            let area: f64 = LOCAL_FACES
                .iter()
                .map(|&[a, b, c]| tri_area(v[a], v[b], v[c]))
                .sum();
            let inradius = 3.0 * vol / area;
            h = h.max(diam);
            quality = quality.min(inradius / diam);
            tets_per_subdomain[self.labels[t]] += 1;
            volume_per_subdomain[self.labels[t]] += vol;
        }
        MeshStatistics {
            h,
            quality,
            tets_per_subdomain,
            volume_per_subdomain,
        }
    }

    pub fn h(&self) -> f64 {
        (0..self.n_tets())
            .map(|t| self.tet_diameter(t))
            .fold(0.0, f64::max)
    }

    /// Red refinement: every tetrahedron is split into eight children by Bey's rule.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|&[a, b]| {
            let (p, q) = (self.vertices[a], self.vertices[b]);
            [
                0.5 * (p[0] + q[0]),
                0.5 * (p[1] + q[1]),
                0.5 * (p[2] + q[2]),
            ]
        }));
        let mid = |a: usize, b: usize| nv + self.edge_id(a, b).expect("edge of the mesh");

        let mut cells = Vec::with_capacity(8 * self.cells.len());
        let mut labels = Vec::with_capacity(8 * self.cells.len());
        let mut parent_tet = Vec::with_capacity(8 * self.cells.len());
        for (t, &[x0, x1, x2, x3]) in self.cells.iter().enumerate() {
            let (x01, x02, x03) = (mid(x0, x1), mid(x0, x2), mid(x0, x3));
            let (x12, x13, x23) = (mid(x1, x2), mid(x1, x3), mid(x2, x3));
            let children = [
                [x0, x01, x02, x03],
                [x01, x1, x12, x13],
                [x02, x12, x2, x23],
                [x03, x13, x23, x3],
                [x01, x02, x03, x13],
                [x01, x02, x12, x13],
                [x02, x03, x13, x23],
                [x02, x12, x13, x23],
            ];
            for c in children {
                cells.push(c);
                labels.push(self.labels[t]);
                parent_tet.push(t);
            }
        }
        let mut fine = Mesh::from_cells(vertices, cells, labels)
            .expect("red refinement of a valid mesh is valid");
        fine.parent = Some(ParentLink {
            mesh: Arc::new(self.clone()),
            parent_tet,
        });
        fine
    }

    /// Plain-text serialization (`tetmesh v1`).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "tetmesh v1").unwrap();
        writeln!(s, "{}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]).unwrap();
        }
        writeln!(s, "{}", self.cells.len()).unwrap();
        for (c, l) in self.cells.iter().zip(&self.labels) {
            writeln!(s, "{} {} {} {} {}", c[0], c[1], c[2], c[3], l).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
        let err = |line: usize, message: &str| MeshError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let last_line = text.lines().count();
        let mut next = |what: &str| lines.next().ok_or_else(|| err(last_line, what));
        let (ln, header) = next("empty file")?;
        if header != "tetmesh v1" {
            return Err(err(ln, "expected header `tetmesh v1`"));
        }
        let (ln, l) = next("missing vertex count")?;
        let nv: usize = l.parse().map_err(|_| err(ln, "bad vertex count"))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next("missing vertex line")?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| err(ln, "bad coordinate"))?;
            if xs.len() != 3 {
                return Err(err(ln, "expected three coordinates"));
            }
            vertices.push([xs[0], xs[1], xs[2]]);
        }
        let (ln, l) = next("missing tet count")?;
        let nt: usize = l.parse().map_err(|_| err(ln, "bad tet count"))?;
        let mut cells = Vec::with_capacity(nt);
        let mut labels = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = next("missing tet line")?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| err(ln, "bad tet line"))?;
            if ids.len() != 5 {
                return Err(err(ln, "expected four vertex ids and a label"));
            }
            cells.push([ids[0], ids[1], ids[2], ids[3]]);
            labels.push(ids[4]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content"));
        }
        Mesh::from_cells(vertices, cells, labels)
    }
}

/// Kuhn triangulation of a box, with subdomain labels assigned by the cut planes.
pub fn build_box_mesh(
    domain: &BoxDomain,
    divisions: [usize; 3],
    cuts: &[PartitionPlane],
) -> Result<Mesh, MeshError> {
    if divisions.contains(&0) {
        return Err(MeshError::InvalidDivisions(divisions));
    }
    if (0..3).any(|a| !(domain.upper[a] > domain.lower[a])) {
        return Err(MeshError::InvalidExtents {
            lower: domain.lower,
            upper: domain.upper,
        });
    }
    let step: [f64; 3] =
        std::array::from_fn(|a| (domain.upper[a] - domain.lower[a]) / divisions[a] as f64);

    // Cut planes per axis, snapped to division indices.
    let mut cut_index: [Vec<usize>; 3] = Default::default();
    for c in cuts {
        if c.axis > 2 {
            return Err(MeshError::InvalidAxis(c.axis));
        }
        let k = (c.coordinate - domain.lower[c.axis]) / step[c.axis];
        let kr = k.round();
        if (k - kr).abs() > 1e-9 || kr < 1.0 || kr >= divisions[c.axis] as f64 {
            return Err(MeshError::MisalignedPlane {
                axis: c.axis,
                coordinate: c.coordinate,
            });
        }
        cut_index[c.axis].push(kr as usize);
    }
    for ci in cut_index.iter_mut() {
        ci.sort_unstable();
        ci.dedup();
    }
    let slabs: [usize; 3] = std::array::from_fn(|a| cut_index[a].len() + 1);

    let [nx, ny, nz] = divisions;
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let idx = [i, j, k];
                vertices.push(std::array::from_fn(|a| {
                    if idx[a] == divisions[a] {
                        domain.upper[a]
                    } else {
                        domain.lower[a] + idx[a] as f64 * step[a]
                    }
                }));
            }
        }
    }

    const PATHS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6 * nx * ny * nz);
    let mut labels = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let cell = [i, j, k];
                let slab: [usize; 3] =
                    std::array::from_fn(|a| cut_index[a].iter().filter(|&&c| c <= cell[a]).count());
                let label = slab[0] + slabs[0] * (slab[1] + slabs[1] * slab[2]);
                for path in PATHS {
                    let mut p = cell;
                    let mut tet = [vid(p[0], p[1], p[2]); 4];
                    for (s, &axis) in path.iter().enumerate() {
                        p[axis] += 1;
                        tet[s + 1] = vid(p[0], p[1], p[2]);
                    }
                    cells.push(tet);
                    labels.push(label);
                }
            }
        }
    }
    Mesh::from_cells(vertices, cells, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoxDomain {
        BoxDomain::cube(1.0)
    }

    #[test]
    fn single_cube_counts() {
        let m = build_box_mesh(&unit(), [1, 1, 1], &[]).unwrap();
        assert_eq!(m.n_vertices(), 8);
        assert_eq!(m.edges().len(), 19);
        assert_eq!(m.faces().len(), 18);
        assert_eq!(m.n_tets(), 6);
        let euler = 8i64 - 19 + 18 - 6;
        assert_eq!(euler, 1);
    }

    #[test]
    fn stacked_cells() {
        let m = build_box_mesh(&unit(), [2, 1, 1], &[]).unwrap();
        assert_eq!(m.n_vertices(), 12);
        assert_eq!(m.n_tets(), 12);
    }

    #[test]
    fn labels_follow_cut() {
        let dom = BoxDomain::new([-1.0; 3], [1.0; 3]);
        let cut = PartitionPlane {
            axis: 0,
            coordinate: 0.0,
        };
        let m = build_box_mesh(&dom, [2, 2, 2], &[cut]).unwrap();
        for t in 0..m.n_tets() {
            let c = m.centroid(t);
            assert_eq!(m.labels()[t], usize::from(c[0] > 0.0));
        }
        let stats = m.statistics();
        let total: f64 = stats.volume_per_subdomain.iter().sum();
        assert!((total - 8.0).abs() <= 1e-12 * 8.0);
        assert_eq!(stats.tets_per_subdomain, vec![24, 24]);
    }

    #[test]
    fn misaligned_cut_rejected() {
        let cut = PartitionPlane {
            axis: 1,
            coordinate: 0.3,
        };
        match build_box_mesh(&unit(), [2, 2, 2], &[cut]) {
            Err(MeshError::MisalignedPlane { axis, coordinate }) => {
                assert_eq!(axis, 1);
                assert_eq!(coordinate, 0.3);
            }
            other => panic!("expected misaligned plane error, got {other:?}"),
        }
        assert!(matches!(
            build_box_mesh(&unit(), [0, 1, 1], &[]),
            Err(MeshError::InvalidDivisions(_))
        ));
    }

    #[test]
    fn reference_tet_and_kuhn_cell_diameters() {
        let m = Mesh::from_cells(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
            vec![0],
        )
        .unwrap();
        assert!((m.statistics().h - 2f64.sqrt()).abs() < 1e-15);
        let k = build_box_mesh(&unit(), [1, 1, 1], &[]).unwrap();
        assert!((k.h() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quality_translation_invariant() {
        let m = build_box_mesh(&unit(), [2, 1, 1], &[]).unwrap();
        let shifted: Vec<[f64; 3]> = m
            .vertices()
            .iter()
            .map(|v| [v[0] + 3.25, v[1] - 1.5, v[2] + 0.125])
            .collect();
        let s = Mesh::from_cells(shifted, m.cells().to_vec(), m.labels().to_vec()).unwrap();
        assert!((m.statistics().quality - s.statistics().quality).abs() < 1e-14);
    }

    #[test]
    fn positive_orientation_and_conformity() {
        let m = build_box_mesh(&unit(), [2, 3, 1], &[]).unwrap();
        for t in 0..m.n_tets() {
            assert!(m.element_map(t).det > 0.0);
        }
        let mut count = vec![0; m.faces().len()];
        for f in m.tet_faces() {
            for &i in f {
                count[i] += 1;
            }
        }
        for (c, &b) in count.iter().zip(m.boundary_faces()) {
            assert_eq!(*c, if b { 1 } else { 2 });
        }
        for e in m.edges() {
            assert!(e[0] < e[1]);
        }
    }

    #[test]
    fn signs_match_global_order() {
        let m = build_box_mesh(&unit(), [1, 1, 1], &[]).unwrap();
        for (t, tet) in m.tets().iter().enumerate() {
            for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let expected = if tet[a] < tet[b] { 1 } else { -1 };
                assert_eq!(m.tet_edge_signs()[t][k], expected);
            }
        }
    }

    #[test]
    fn refinement_counts_and_diameter() {
        let m = build_box_mesh(&unit(), [1, 1, 1], &[]).unwrap();
        let r = m.refine_uniform();
        assert_eq!(r.n_tets(), 48);
        assert!((r.h() - m.h() / 2.0).abs() < 1e-14);
        let rr = r.refine_uniform();
        assert_eq!(rr.n_tets(), 384);
        for t in 0..rr.n_tets() {
            assert!(rr.element_map(t).det > 0.0);
        }
    }

    #[test]
    fn refinement_of_kuhn_mesh_is_kuhn_mesh() {
        let dom = BoxDomain::new([0.0, -1.0, 0.5], [2.0, 1.0, 1.5]);
        let coarse = build_box_mesh(&dom, [1, 2, 1], &[]).unwrap();
        let fine = coarse.refine_uniform();
        let direct = build_box_mesh(&dom, [2, 4, 2], &[]).unwrap();
        let key = |m: &Mesh| {
            let mut ts: Vec<Vec<[i64; 3]>> = m
                .tets()
                .iter()
                .map(|t| {
                    let mut v: Vec<[i64; 3]> = t
                        .iter()
                        .map(|&i| m.vertices()[i].map(|x| (x * 1e9).round() as i64))
                        .collect();
                    v.sort();
                    v
                })
                .collect();
            ts.sort();
            ts
        };
        assert_eq!(key(&fine), key(&direct));
    }

    #[test]
    fn nesting_of_refinement() {
        let m = build_box_mesh(&unit(), [1, 1, 1], &[]).unwrap();
        let r = m.refine_uniform();
        for (i, v) in m.vertices().iter().enumerate() {
            assert_eq!(&r.vertices()[i], v);
        }
        for &[a, b] in m.edges() {
            let mid = m.n_vertices() + m.edge_id(a, b).unwrap();
            assert!(r.edge_id(a, mid).is_some());
            assert!(r.edge_id(mid, b).is_some());
        }
        let map = r.refine_uniform().ancestor_map(&m).unwrap();
        assert_eq!(map.len(), 384);
        assert!(r
            .ancestor_map(&build_box_mesh(&unit(), [2, 1, 1], &[]).unwrap())
            .is_none());
    }

    #[test]
    fn text_round_trip() {
        let dom = BoxDomain::new([0.1, 0.0, 0.0], [std::f64::consts::PI, 1.0 / 3.0, 2.0]);
        let cut = PartitionPlane {
            axis: 2,
            coordinate: 1.0,
        };
        let m = build_box_mesh(&dom, [3, 1, 2], &[cut]).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("tetmesh v1\n"));
        let back = Mesh::from_text(&text).unwrap();
        assert!(back.same_as(&m));
        assert_eq!(back.tets(), m.tets());
        assert_eq!(back.to_text(), text);
    }
}
