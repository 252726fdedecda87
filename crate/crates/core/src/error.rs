use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("divisions must be at least 1 along every axis, got {0:?}")]
    InvalidDivisions([usize; 3]),
    #[error("box extents are empty or inverted: lower {lower:?}, upper {upper:?}")]
    InvalidExtents { lower: [f64; 3], upper: [f64; 3] },
    #[error("partition plane on axis {axis} at coordinate {coordinate} does not lie on a division plane")]
    MisalignedPlane { axis: usize, coordinate: f64 },
    #[error("partition plane axis {0} out of range")]
    InvalidAxis(usize),
    #[error("tetrahedron {0} is degenerate")]
    DegenerateTet(usize),
    #[error("tetrahedron {tet} references vertex {vertex} but the mesh has {count} vertices")]
    VertexOutOfRange {
        tet: usize,
        vertex: usize,
        count: usize,
    },
    #[error("face {0:?} is shared by more than two tetrahedra")]
    NonConforming([usize; 3]),
    #[error("mesh file parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("{name} on subdomain {label} is not symmetric")]
    NotSymmetric { name: &'static str, label: usize },
    #[error(
        "{name} on subdomain {label} is not positive definite (smallest eigenvalue {min_eig})"
    )]
    NotPositive {
        name: &'static str,
        label: usize,
        min_eig: f64,
    },
    #[error("no material given for subdomain label {0}")]
    MissingMaterial(usize),
    #[error("at least one material is required")]
    Empty,
}

#[derive(Debug, Error)]
pub enum FemError {
    #[error("polynomial order {0} is not supported (supported range 0..={max})", max = crate::reference::MAX_ORDER)]
    UnsupportedOrder(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("resonant frequency: omega = {omega} is within {gap:e} of sqrt(lambda_{index})")]
    Resonant { omega: f64, gap: f64, index: usize },
    #[error("spectral window too small: nearest eigenvalue is the last of {count} computed")]
    WindowTooSmall { count: usize },
    #[error("requested {requested} eigenpairs but the divergence-free subspace has dimension {available}")]
    TooManyEigenpairs { requested: usize, available: usize },
    #[error("eigensolver did not converge: worst relative residual {residual:e} after {iterations} block steps")]
    EigenNotConverged { residual: f64, iterations: usize },
    #[error("right-hand side is not discretely divergence-free (certificate {0:e})")]
    NotDivergenceFree(f64),
    #[error("Lagrange multiplier of constrained solve is not small ({0:e})")]
    MultiplierNotSmall(f64),
    #[error("splitting depth {ell} exceeds the cap p + 1 = {cap}")]
    SplittingTooDeep { ell: usize, cap: usize },
    #[error("fine mesh is not a uniform refinement of the coarse mesh")]
    NotNested,
    #[error(
        "power iteration did not converge in {iterations} steps: last values {previous} -> {last}"
    )]
    PowerNotConverged {
        iterations: usize,
        previous: f64,
        last: f64,
    },
    #[error(transparent)]
    Fem(#[from] FemError),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;
