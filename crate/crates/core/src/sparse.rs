//! Compressed sparse row matrices and direct solvers.

use std::fmt::Write as _;
use std::sync::OnceLock;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky,
    SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use nalgebra::DMatrix;

use crate::error::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// `(ε u, v)`.
    Mass,
    /// `(χ curl u, curl v)`.
    CurlCurl,
    /// `(ε u, grad q)`, vector rows and scalar columns.
    Mixed,
    /// `(ε grad p, grad q)` on the scalar space.
    Stiffness,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    role: Role,
}

impl SparseOperator {
    /// Duplicates are summed in input order after a stable sort by position, so the
    /// result depends only on the triplet sequence.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        role: Role,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            role,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect(), Role::Custom)
    }

    pub fn zeros(nrows: usize, ncols: usize, role: Role) -> Self {
        Self::from_triplets(nrows, ncols, Vec::new(), role)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn transpose(&self) -> Self {
        let t = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (j, i, v))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, t, self.role)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= a);
        s
    }

    /// `a * self + b * other`.
    pub fn add_scaled(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<(usize, usize, f64)> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (i, j, a * v))
            .collect();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.nrows, self.ncols, t, Role::Custom)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut t = Vec::new();
        for i in 0..self.nrows {
            let mut cols = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            t.extend(cols.into_iter().map(|j| (i, j, acc[j])));
        }
        Self::from_triplets(self.nrows, other.ncols, t, Role::Custom)
    }

    /// Submatrix on the rows and columns that the maps send to `Some(index)`.
    pub fn submatrix(
        &self,
        row_map: impl Fn(usize) -> Option<usize>,
        nrows: usize,
        col_map: impl Fn(usize) -> Option<usize>,
        ncols: usize,
    ) -> Self {
        let t = self
            .triplets()
            .into_iter()
            .filter_map(|(i, j, v)| Some((row_map(i)?, col_map(j)?, v)))
            .collect();
        Self::from_triplets(nrows, ncols, t, self.role)
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_error(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut err = 0.0f64;
        for (i, j, v) in self.triplets() {
            err = err.max((v - self.get(j, i)).abs());
        }
        err / scale
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .into_iter()
            .map(|(row, col, val)| Triplet { row, col, val })
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t).expect("valid triplets")
    }

    /// Coordinate text dump. Square matrices that are symmetric to 1e-13 are written
    /// as `symmetric` with the lower triangle only.
    pub fn to_matrix_market(&self) -> String {
        let symmetric = self.nrows == self.ncols && self.symmetry_error() <= 1e-13;
        let entries: Vec<(usize, usize, f64)> = self
            .triplets()
            .into_iter()
            .filter(|&(i, j, _)| !symmetric || j <= i)
            .collect();
        let mut s = String::new();
        writeln!(
            s,
            "%%MatrixMarket matrix coordinate real {}",
            if symmetric { "symmetric" } else { "general" }
        )
        .unwrap();
        writeln!(s, "{} {} {}", self.nrows, self.ncols, entries.len()).unwrap();
        for (i, j, v) in entries {
            writeln!(s, "{} {} {:e}", i + 1, j + 1, v).unwrap();
        }
        s
    }

    /// Symmetric block matrix `[A, Bt; B^T, 0]` where `bt` has `a.nrows()` rows.
    pub fn saddle(a: &Self, bt: &Self) -> Self {
        assert_eq!(a.nrows, bt.nrows);
        let n = a.nrows;
        let m = bt.ncols;
        let mut t = a.triplets();
        for (i, j, v) in bt.triplets() {
            t.push((i, n + j, v));
            t.push((n + j, i, v));
        }
        Self::from_triplets(n + m, n + m, t, Role::Custom)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn to_mat(cols: &[&[f64]], n: usize) -> Mat<f64> {
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn from_mat(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)]).collect())
        .collect()
}

/// LU factorization with partial pivoting, used for indefinite and saddle systems.
pub struct LuSolver {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuSolver {
    pub fn new(a: &SparseOperator) -> Result<Self, SolverError> {
        assert_eq!(a.nrows, a.ncols);
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.nrows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_many(&[b]).pop().unwrap()
    }

    pub fn solve_many(&self, b: &[&[f64]]) -> Vec<Vec<f64>> {
        if self.n == 0 {
            return b.iter().map(|_| Vec::new()).collect();
        }
        let mut m = to_mat(b, self.n);
        self.lu.solve_in_place(m.as_mut());
        from_mat(&m)
    }
}

/// Symmetric indefinite `L B Lᵀ` factorization (Bunch-Kaufman pivoting inside
/// supernodes, fill-reducing AMD ordering) with iterative refinement against the
/// original matrix.
pub struct SymmetricIndefiniteSolver {
    matrix: SparseOperator,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    perm_fwd: Vec<usize>,
    perm_inv: Vec<usize>,
    /// LU used when pivoting restricted to supernodes is not accurate enough.
    fallback: OnceLock<LuSolver>,
}

impl SymmetricIndefiniteSolver {
    pub fn new(a: &SparseOperator) -> Result<Self, SolverError> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let fa = a.to_faer();
        let symbolic = factorize_symbolic_cholesky(
            fa.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams {
                // The simplicial path does not pivot.
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            },
        )
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut perm_fwd = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let req =
            symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default());
        let mut buf = MemBuffer::new(req);
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut perm_fwd,
            &mut perm_inv,
            fa.as_ref(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        );
        let fallback = OnceLock::new();
        if values.iter().chain(&subdiag).any(|v| !v.is_finite()) {
            let _ = fallback.set(LuSolver::new(a)?);
        }
        Ok(Self {
            matrix: a.clone(),
            symbolic,
            values,
            subdiag,
            perm_fwd,
            perm_inv,
            fallback,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    fn raw_solve(&self, m: &mut Mat<f64>) {
        let n = self.dim();
        let perm = unsafe { PermRef::new_unchecked(&self.perm_fwd, &self.perm_inv, n) };
        let f = IntranodeLbltRef::new(&self.symbolic, &self.values, &self.subdiag, perm);
        let req = self
            .symbolic
            .solve_in_place_scratch::<f64>(m.ncols(), Par::Seq);
        let mut buf = MemBuffer::new(req);
        f.solve_in_place_with_conj(Conj::No, m.as_mut(), Par::Seq, MemStack::new(&mut buf));
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_many(&[b]).pop().unwrap()
    }

    /// Solves with up to three steps of iterative refinement, stopping once the
    /// residual is below `1e-14 (|A|_∞ |x|_∞ + |b|_∞)`. Falls back to LU when the
    /// residual is still above `1e-10` times that scale.
    pub fn solve_many(&self, b: &[&[f64]]) -> Vec<Vec<f64>> {
        let n = self.dim();
        if n == 0 {
            return b.iter().map(|_| Vec::new()).collect();
        }
        if let Some(lu) = self.fallback.get() {
            return lu.solve_many(b);
        }
        let mut m = to_mat(b, n);
        self.raw_solve(&mut m);
        let mut x = from_mat(&m);
        let mut worst = f64::INFINITY;
        for step in 0..=3 {
            let (r, w) = self.residuals(&x, b);
            worst = w;
            if !(worst > 1e-14) || step == 3 {
                break;
            }
            let refs: Vec<&[f64]> = r.iter().map(|v| v.as_slice()).collect();
            let mut c = to_mat(&refs, n);
            self.raw_solve(&mut c);
            for (j, xj) in x.iter_mut().enumerate() {
                for (i, v) in xj.iter_mut().enumerate() {
                    *v += c[(i, j)];
                }
            }
        }
        if worst <= 1e-10 {
            return x;
        }
        match LuSolver::new(&self.matrix) {
            Ok(lu) => self.fallback.get_or_init(|| lu).solve_many(b),
            Err(_) => x,
        }
    }

    /// Residuals `b - A x` and the worst scaled residual norm.
    fn residuals(&self, x: &[Vec<f64>], b: &[&[f64]]) -> (Vec<Vec<f64>>, f64) {
        let scale = self.matrix.max_abs();
        let mut worst = 0.0f64;
        let r = x
            .iter()
            .zip(b)
            .map(|(xi, bi)| {
                let ax = self.matrix.matvec(xi);
                let r: Vec<f64> = bi.iter().zip(&ax).map(|(p, q)| p - q).collect();
                let denom = scale * norm_inf(xi) + norm_inf(bi);
                let rel = if denom > 0.0 {
                    norm_inf(&r) / denom
                } else {
                    0.0
                };
                worst = if rel.is_nan() {
                    f64::NAN
                } else {
                    worst.max(rel)
                };
                r
            })
            .collect();
        (r, worst)
    }
}

/// Sparse Cholesky factorization for symmetric positive definite systems.
pub struct CholeskySolver {
    n: usize,
    llt: Option<faer::sparse::linalg::solvers::Llt<usize, f64>>,
}

impl CholeskySolver {
    pub fn new(a: &SparseOperator) -> Result<Self, SolverError> {
        assert_eq!(a.nrows, a.ncols);
        if a.nrows == 0 {
            return Ok(Self { n: 0, llt: None });
        }
        let llt = a
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
        Ok(Self {
            n: a.nrows,
            llt: Some(llt),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_many(&[b]).pop().unwrap()
    }

    pub fn solve_many(&self, b: &[&[f64]]) -> Vec<Vec<f64>> {
        let Some(llt) = &self.llt else {
            return b.iter().map(|_| Vec::new()).collect();
        };
        let mut m = to_mat(b, self.n);
        llt.solve_in_place(m.as_mut());
        from_mat(&m)
    }
}
