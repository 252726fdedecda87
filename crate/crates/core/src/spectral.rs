//! Cavity eigenpairs on the discretely divergence-free subspace, the resonance
//! gap and the discrete stability constant.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SolverError};
use crate::sparse::{dot, CholeskySolver, SymmetricIndefiniteSolver};
use crate::system::MaxwellSystem;

/// Gaps below this are treated as resonance.
pub const RESONANCE_TOLERANCE: f64 = 1e-8;

/// Largest divergence-free dimension handled by the dense path.
pub const DENSE_LIMIT: usize = 5000;

/// Problems at most this large always go through the dense path.
const SMALL_DENSE: usize = 300;

#[derive(Clone, Debug, Default)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal free-DOF coefficient vectors.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `max |φ_iᵀ M φ_j - δ_ij|`.
    pub orthonormality: f64,
    /// `|Bᵀ φ_j|_∞` per pair.
    pub divergence: Vec<f64>,
    /// Relative residuals `|K φ - λ M φ| / (|K φ| + λ |M φ|)`.
    pub residuals: Vec<f64>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().fold(0.0, |m, &d| m.max(d))
    }

    /// Modal coefficients `v_j = φ_jᵀ M v`.
    pub fn expand(&self, system: &MaxwellSystem, v: &[f64]) -> Vec<f64> {
        let mv = system.m_apply(v);
        self.eigenvectors.iter().map(|p| dot(p, &mv)).collect()
    }

    /// `index,lambda,sqrt_lambda,div_certificate`, one row per pair.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,lambda,sqrt_lambda,div_certificate\n");
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let d = self.divergence.get(j).copied().unwrap_or(0.0);
            let _ = writeln!(s, "{j},{l:e},{:e},{d:e}", l.sqrt());
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Shift `σ > 0` of the inverse `(K + σ M)⁻¹ M`; `None` uses the system default.
    pub shift: Option<f64>,
    /// Relative residual required of every returned pair.
    pub tolerance: f64,
    pub max_restarts: usize,
    pub block: Option<usize>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: None,
            tolerance: 1e-10,
            max_restarts: 60,
            block: None,
            seed: 0x5eed,
        }
    }
}

/// Dimension of the discretely divergence-free subspace: the free vector DOFs
/// minus the gradients of the free scalar DOFs.
pub fn divergence_free_dim(system: &MaxwellSystem) -> usize {
    system.n().saturating_sub(system.lagrange.n_free())
}

/// The `count` smallest eigenpairs of `K φ = λ M φ` on the kernel of `Bᵀ`.
pub fn solve_eigs(system: &MaxwellSystem, count: usize) -> Result<EigenDecomposition> {
    solve_eigs_with(system, count, &EigenOptions::default())
}

pub fn solve_eigs_with(
    system: &MaxwellSystem,
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenDecomposition> {
    if count == 0 {
        return Ok(EigenDecomposition::default());
    }
    let available = divergence_free_dim(system);
    if count > available {
        return Err(SolverError::TooManyEigenpairs {
            requested: count,
            available,
        });
    }
    if system.n() <= SMALL_DENSE {
        return solve_eigs_dense(system, count);
    }
    let local;
    let chol = match opts.shift {
        None => system.shifted_solver()?,
        Some(s) => {
            local = CholeskySolver::new(&system.mass.add_scaled(s, &system.curl, 1.0))?;
            &local
        }
    };
    block_krylov(system, &|b| chol.solve_many(b), count, available, opts)
}

/// Eigenpairs nearest to `tau` through an existing factorization of
/// `K - tau M`, e.g. the one a source solve at `ω² = tau` already holds. The
/// result is returned only when it provably holds the `count` smallest pairs,
/// which is the case when the largest computed eigenvalue is at least `2 tau`.
pub fn solve_eigs_shifted(
    system: &MaxwellSystem,
    count: usize,
    factor: &SymmetricIndefiniteSolver,
    tau: f64,
    opts: &EigenOptions,
) -> Result<Option<EigenDecomposition>> {
    if count == 0 {
        return Ok(Some(EigenDecomposition::default()));
    }
    let available = divergence_free_dim(system);
    if count > available {
        return Err(SolverError::TooManyEigenpairs {
            requested: count,
            available,
        });
    }
    let dec = block_krylov(system, &|b| factor.solve_many(b), count, available, opts)?;
    let top = dec.eigenvalues.last().copied().unwrap_or(0.0);
    Ok((top >= 2.0 * tau || count == available).then_some(dec))
}

/// Dense oracle: Cholesky reduction of the full pencil, dropping the kernel of
/// `K` (one zero eigenvalue per free scalar DOF).
pub fn solve_eigs_dense(system: &MaxwellSystem, count: usize) -> Result<EigenDecomposition> {
    if count == 0 {
        return Ok(EigenDecomposition::default());
    }
    let n = system.n();
    let available = divergence_free_dim(system);
    if count > available {
        return Err(SolverError::TooManyEigenpairs {
            requested: count,
            available,
        });
    }
    if n > DENSE_LIMIT {
        return Err(SolverError::Factorization(format!(
            "dense eigensolver limited to {DENSE_LIMIT} DOFs, got {n}"
        )));
    }
    let m = system.mass.to_dense();
    let k = system.curl.to_dense();
    let l = m
        .cholesky()
        .ok_or_else(|| SolverError::Factorization("mass matrix is not positive definite".into()))?
        .l();
    let li = l
        .clone()
        .try_inverse()
        .ok_or_else(|| SolverError::Factorization("singular Cholesky factor".into()))?;
    let mut c = &li * k * li.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let skip = n - available;
    let lti = li.transpose();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &j in order.iter().skip(skip).take(count) {
        values.push(eig.eigenvalues[j]);
        let x = &lti * eig.eigenvectors.column(j);
        vectors.push(x.iter().copied().collect::<Vec<f64>>());
    }
    finish(system, values, vectors)
}

/// Thick-restarted block Krylov iteration on `T = (K - τ M)⁻¹ M`, which is
/// self-adjoint in the M inner product; `apply` solves with `K - τ M`. The
/// eigenvalues of `T` largest in magnitude belong to the `λ` nearest `τ`. Rayleigh-Ritz is done on `T` itself with
/// the images `T v` tracked, so a restart costs no extra solves: the kept Ritz
/// vectors `X` come with `T X`, whose part orthogonal to `X` is the residual
/// block that continues the Krylov sequence. New directions are projected onto
/// the divergence-free subspace to stop rounding drift into gradients.
fn block_krylov(
    system: &MaxwellSystem,
    apply: &dyn Fn(&[&[f64]]) -> Vec<Vec<f64>>,
    count: usize,
    available: usize,
    opts: &EigenOptions,
) -> Result<EigenDecomposition> {
    let n = system.n();
    let block = opts
        .block
        .unwrap_or((count / 2 + 2).clamp(4, 10))
        .min(available);
    let keep = (count + block).min(available);
    let max_dim = (keep + 6 * block).min(available);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seed: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..keep)
        .map(|_| system.random_div_free(&mut rng).map(|v| (v, None)))
        .collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..opts.max_restarts {
        let mut basis = MBasis::new(n);
        let mut frontier = Vec::new();
        for (v, tv) in seed.drain(..) {
            if let Some(i) = basis.push(system, v, tv) {
                frontier.push(i);
            }
        }
        loop {
            let need: Vec<usize> = frontier
                .iter()
                .copied()
                .filter(|&i| basis.tv[i].is_none())
                .collect();
            if !need.is_empty() {
                let rhs: Vec<&[f64]> = need.iter().map(|&i| basis.mv[i].as_slice()).collect();
                for (i, img) in need.iter().zip(apply(&rhs)) {
                    basis.tv[*i] = Some(img);
                }
            }
            if basis.len() >= max_dim || frontier.is_empty() {
                break;
            }
            let candidates: Vec<Vec<f64>> = frontier
                .drain(..)
                .map(|i| basis.tv[i].clone().expect("image computed above"))
                .collect();
            for w in candidates {
                if basis.len() >= max_dim {
                    break;
                }
                let w = system.project_div_free(&w)?;
                if let Some(i) = basis.push(system, w, None) {
                    frontier.push(i);
                }
            }
        }
        let dim = basis.len();
        let tv: Vec<&[f64]> = basis
            .tv
            .iter()
            .map(|t| t.as_deref().expect("all images computed"))
            .collect();
        let h = DMatrix::from_fn(dim, dim, |i, j| {
            0.5 * (dot(&basis.mv[i], tv[j]) + dot(&basis.mv[j], tv[i]))
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .total_cmp(&eig.eigenvalues[a].abs())
        });
        let wanted = keep.min(dim);
        let mut seeds = Vec::with_capacity(wanted);
        for &j in order.iter().take(wanted) {
            let y = eig.eigenvectors.column(j);
            seeds.push((
                combine(&basis.v, y.as_slice()),
                Some(combine_refs(&tv, y.as_slice())),
            ));
        }
        // Pairs are extracted by Rayleigh-Ritz with K on the same subspace: the
        // images under T carry the rounding of the shifted solves, K does not.
        let kv: Vec<Vec<f64>> = basis.v.iter().map(|v| system.curl.matvec(v)).collect();
        let hk = DMatrix::from_fn(dim, dim, |i, j| {
            0.5 * (dot(&basis.v[i], &kv[j]) + dot(&basis.v[j], &kv[i]))
        });
        let keig = SymmetricEigen::new(hk);
        let mut korder: Vec<usize> = (0..dim).collect();
        korder.sort_by(|&a, &b| keig.eigenvalues[a].total_cmp(&keig.eigenvalues[b]));
        let mut pairs = Vec::with_capacity(count);
        worst = 0.0f64;
        for &j in korder.iter().take(count) {
            let y = keig.eigenvectors.column(j);
            let lambda = keig.eigenvalues[j];
            let kx = combine(&kv, y.as_slice());
            let mx = combine(&basis.mv, y.as_slice());
            worst = worst.max(relative_residual(&kx, &mx, lambda));
            pairs.push((lambda, combine(&basis.v, y.as_slice())));
        }
        history.push(worst);
        // Rounding puts a floor under the residual on fine meshes; accept a value
        // within a factor 100 of the tolerance once a restart stops improving it.
        let stalled = history.len() > 1
            && worst <= 100.0 * opts.tolerance
            && worst > 0.5 * history[history.len() - 2];
        if (worst <= opts.tolerance || stalled) && dim >= count {
            let (values, vectors) = pairs.into_iter().unzip();
            return finish(system, values, vectors);
        }
        seed = seeds;
    }
    Err(SolverError::EigenNotConverged {
        residual: worst,
        iterations: opts.max_restarts,
    })
}

fn combine(vs: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
    combine_refs(&refs, y)
}

fn combine_refs(vs: &[&[f64]], y: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; vs[0].len()];
    for (v, &c) in vs.iter().zip(y) {
        for (a, b) in x.iter_mut().zip(v.iter()) {
            *a += c * b;
        }
    }
    x
}

fn relative_residual(kx: &[f64], mx: &[f64], lambda: f64) -> f64 {
    let mut r = 0.0f64;
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    for (p, q) in kx.iter().zip(mx) {
        r += (p - lambda * q).powi(2);
        a += p * p;
        b += q * q;
    }
    let denom = a.sqrt() + lambda.abs() * b.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        r.sqrt() / denom
    }
}

/// M-orthonormal basis with cached `M v` and, where known, `T v`.
struct MBasis {
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
    tv: Vec<Option<Vec<f64>>>,
    n: usize,
}

impl MBasis {
    fn new(n: usize) -> Self {
        Self {
            v: Vec::new(),
            mv: Vec::new(),
            tv: Vec::new(),
            n,
        }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    /// Classical Gram-Schmidt applied twice; rejects nearly dependent vectors.
    /// The image `T w` is carried through the same linear combination when it
    /// and all images it depends on are known.
    fn push(
        &mut self,
        system: &MaxwellSystem,
        mut w: Vec<f64>,
        mut tw: Option<Vec<f64>>,
    ) -> Option<usize> {
        debug_assert_eq!(w.len(), self.n);
        let initial = system.m_norm(&w);
        if initial == 0.0 || !initial.is_finite() {
            return None;
        }
        for pass in 0..3 {
            if pass == 2 {
                // Cancellation in the first passes magnifies any gradient content
                // left in a nearly dependent vector; remove it and orthogonalize again.
                if tw.is_some() {
                    break;
                }
                w = system.project_div_free(&w).ok()?;
            }
            let coeffs: Vec<f64> = self.mv.iter().map(|m| dot(m, &w)).collect();
            for (k, c) in coeffs.into_iter().enumerate() {
                for (a, b) in w.iter_mut().zip(&self.v[k]) {
                    *a -= c * b;
                }
                tw = match (tw, &self.tv[k]) {
                    (Some(mut t), Some(tk)) => {
                        for (a, b) in t.iter_mut().zip(tk) {
                            *a -= c * b;
                        }
                        Some(t)
                    }
                    _ => None,
                };
            }
        }
        let mw = system.m_apply(&w);
        let norm = dot(&w, &mw).max(0.0).sqrt();
        if norm <= 1e-13 * initial {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        if let Some(t) = tw.as_mut() {
            t.iter_mut().for_each(|x| *x /= norm);
        }
        self.mv.push(mw.into_iter().map(|x| x / norm).collect());
        self.v.push(w);
        self.tv.push(tw);
        Some(self.v.len() - 1)
    }
}

/// Normalizes, fixes signs, and fills in the certificates.
fn finish(
    system: &MaxwellSystem,
    values: Vec<f64>,
    mut vectors: Vec<Vec<f64>>,
) -> Result<EigenDecomposition> {
    for v in vectors.iter_mut() {
        system.scale_to_unit(v);
        // Sign convention: the largest-magnitude entry is positive.
        let big = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mv: Vec<Vec<f64>> = vectors.iter().map(|v| system.m_apply(v)).collect();
    let mut orthonormality = 0.0f64;
    for i in 0..vectors.len() {
        for j in 0..vectors.len() {
            let target = if i == j { 1.0 } else { 0.0 };
            orthonormality = orthonormality.max((dot(&vectors[i], &mv[j]) - target).abs());
        }
    }
    let divergence = vectors
        .iter()
        .map(|v| system.divergence_certificate(v))
        .collect();
    let residuals = vectors
        .iter()
        .zip(&mv)
        .zip(&values)
        .map(|((v, m), &l)| relative_residual(&system.curl.matvec(v), m, l))
        .collect();
    Ok(EigenDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
        orthonormality,
        divergence,
        residuals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap {
    pub delta: f64,
    pub index: usize,
}

/// `min_j |√λ_j - ω|` without any checks; ties go to the lowest index.
pub fn nearest_eigenvalue(omega: f64, eigs: &[f64]) -> Option<Gap> {
    let mut best: Option<Gap> = None;
    for (j, &l) in eigs.iter().enumerate() {
        let d = (l.max(0.0).sqrt() - omega).abs();
        if best.is_none_or(|b| d < b.delta) {
            best = Some(Gap { delta: d, index: j });
        }
    }
    best
}

/// Resonance gap over a computed window of the spectrum. The window must
/// contain an eigenvalue above the minimizer.
pub fn resonance_gap(omega: f64, eigs: &[f64]) -> Result<Gap> {
    let gap = checked_gap(omega, eigs)?;
    if gap.index + 1 == eigs.len() {
        return Err(SolverError::WindowTooSmall { count: eigs.len() });
    }
    Ok(gap)
}

fn checked_gap(omega: f64, eigs: &[f64]) -> Result<Gap> {
    let gap = nearest_eigenvalue(omega, eigs).ok_or(SolverError::WindowTooSmall { count: 0 })?;
    if gap.delta < RESONANCE_TOLERANCE {
        return Err(SolverError::Resonant {
            omega,
            gap: gap.delta,
            index: gap.index,
        });
    }
    Ok(gap)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    pub omega: f64,
    pub delta: f64,
    pub index: usize,
    /// `max_j ω √(ω² + λ_j) / |λ_j - ω²|`.
    pub c_s: f64,
    /// `ω / δ`.
    pub bound: f64,
}

impl StabilityReport {
    pub fn bound_holds(&self) -> bool {
        self.c_s <= self.bound + 1e-10
    }
}

/// Modal stability constant over the given eigenvalues, which are taken to be
/// the whole relevant spectrum. Only resonance is an error here.
pub fn stability_constants(omega: f64, eigs: &[f64]) -> Result<StabilityReport> {
    let gap = checked_gap(omega, eigs)?;
    let w2 = omega * omega;
    let c_s = eigs
        .iter()
        .map(|&l| omega * (w2 + l).sqrt() / (l - w2).abs())
        .fold(0.0f64, f64::max);
    Ok(StabilityReport {
        omega,
        delta: gap.delta,
        index: gap.index,
        c_s,
        bound: omega / gap.delta,
    })
}

/// Grows the number of computed pairs until `√λ_max ≥ ω + 2δ` and the nearest
/// eigenvalue is not the last one, or the whole subspace is exhausted. With a
/// factorization of `K - ω² M` at hand, the pairs are computed through it
/// instead of the cached `K + σ M` factorization.
pub fn solve_window(
    system: &MaxwellSystem,
    omega: f64,
    initial: usize,
    opts: &EigenOptions,
    factor: Option<&SymmetricIndefiniteSolver>,
) -> Result<EigenDecomposition> {
    let available = divergence_free_dim(system);
    let mut count = initial.max(2).min(available);
    loop {
        let dec = match factor {
            Some(f) if system.n() > SMALL_DENSE => {
                solve_eigs_shifted(system, count, f, omega * omega, opts)?
            }
            _ => Some(solve_eigs_with(system, count, opts)?),
        };
        if let Some(dec) = dec {
            if count == available {
                return Ok(dec);
            }
            if let Some(gap) = nearest_eigenvalue(omega, &dec.eigenvalues) {
                let top = dec.eigenvalues.last().map_or(0.0, |l| l.max(0.0).sqrt());
                if gap.index + 1 < dec.len() && top >= omega + 2.0 * gap.delta {
                    return Ok(dec);
                }
            }
        }
        count = (2 * count).min(available);
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::coefficients::{CoefficientField, Material};
    use crate::mesh::{build_box_mesh, BoxDomain};

    fn cavity(n: usize, p: usize, eps: f64) -> MaxwellSystem {
        let dom = BoxDomain::cube(std::f64::consts::PI);
        let mesh = Arc::new(build_box_mesh(&dom, [n, n, n], &[]).unwrap());
        let c = CoefficientField::uniform(Material::isotropic(eps, 1.0), &dom).unwrap();
        MaxwellSystem::new(mesh, p, &c).unwrap()
    }

    #[test]
    fn gap_examples() {
        let g = resonance_gap(1.0, &[2.0, 3.0]).unwrap();
        assert!((g.delta - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(g.index, 0);
        assert!(matches!(
            resonance_gap(2f64.sqrt(), &[2.0, 3.0]),
            Err(SolverError::Resonant { .. })
        ));
        // |√3 - 1.6| is smaller than |√2 - 1.6|.
        let g = resonance_gap(1.6, &[2.0, 3.0, 5.0, 6.0]).unwrap();
        assert!((g.delta - (3f64.sqrt() - 1.6)).abs() < 1e-15);
        assert_eq!(g.index, 1);
        assert!(matches!(
            resonance_gap(2.0, &[2.0, 3.0]),
            Err(SolverError::WindowTooSmall { count: 2 })
        ));
        assert!(resonance_gap(1.0, &[]).is_err());
    }

    #[test]
    fn stability_examples() {
        let r = stability_constants(1.0, &[4.0]).unwrap();
        assert!((r.c_s - 5f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((r.bound - 1.0).abs() < 1e-15);
        assert!(r.bound_holds());
        let r = stability_constants(1.0, &[2.0, 3.0]).unwrap();
        assert!((r.c_s - 3f64.sqrt()).abs() < 1e-14);
        assert!((r.bound - 1.0 / (2f64.sqrt() - 1.0)).abs() < 1e-14);
        assert!(r.bound_holds());
        let r = stability_constants(1e-9, &[2.0, 3.0]).unwrap();
        assert!(r.c_s < 1e-8);
    }

    #[test]
    fn zero_count_is_empty() {
        let s = cavity(1, 0, 1.0);
        assert!(solve_eigs(&s, 0).unwrap().is_empty());
    }

    #[test]
    fn too_many_pairs_rejected() {
        let s = cavity(1, 0, 1.0);
        assert!(matches!(
            solve_eigs(&s, 2),
            Err(SolverError::TooManyEigenpairs {
                requested: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn krylov_matches_dense() {
        let s = cavity(3, 1, 1.0);
        assert!(s.n() > SMALL_DENSE);
        let dense = solve_eigs_dense(&s, 8).unwrap();
        let chol = s.shifted_solver().unwrap();
        let apply = |b: &[&[f64]]| chol.solve_many(b);
        let it = block_krylov(
            &s,
            &apply,
            8,
            divergence_free_dim(&s),
            &EigenOptions::default(),
        )
        .unwrap();
        for j in 0..8 {
            assert!((dense.eigenvalues[j] - it.eigenvalues[j]).abs() < 1e-9 * dense.eigenvalues[j]);
        }
        assert!(it.orthonormality < 1e-10);
        assert!(it.max_divergence() < 1e-9);
        for (v, &l) in it.eigenvectors.iter().zip(&it.eigenvalues) {
            assert!((s.curl.bilinear(v, v) - l).abs() < 1e-9 * l);
        }
    }

    #[test]
    fn shifted_operator_agrees() {
        let s = cavity(3, 1, 1.0);
        let dense = solve_eigs_dense(&s, 6).unwrap();
        let tau = 1.0;
        let f = SymmetricIndefiniteSolver::new(&s.mass.add_scaled(-tau, &s.curl, 1.0)).unwrap();
        let it = solve_eigs_shifted(&s, 6, &f, tau, &EigenOptions::default())
            .unwrap()
            .unwrap();
        for j in 0..6 {
            assert!((dense.eigenvalues[j] - it.eigenvalues[j]).abs() < 1e-9 * dense.eigenvalues[j]);
        }
        assert!(it.max_divergence() < 1e-9);
        // A shift above half the largest computed eigenvalue cannot certify completeness.
        let tau = 3.0;
        let f = SymmetricIndefiniteSolver::new(&s.mass.add_scaled(-tau, &s.curl, 1.0)).unwrap();
        assert!(solve_eigs_shifted(&s, 3, &f, tau, &EigenOptions::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn epsilon_scaling_divides_eigenvalues() {
        let a = solve_eigs(&cavity(2, 1, 1.0), 5).unwrap();
        let b = solve_eigs(&cavity(2, 1, 4.0), 5).unwrap();
        for j in 0..5 {
            assert!((a.eigenvalues[j] / 4.0 - b.eigenvalues[j]).abs() < 1e-9 * b.eigenvalues[j]);
        }
        assert!(b.max_divergence() < 1e-9);
    }

    #[test]
    fn window_covers_omega() {
        let s = cavity(2, 0, 1.0);
        let dec = solve_window(&s, 1.0, 2, &EigenOptions::default(), None).unwrap();
        let g = resonance_gap(1.0, &dec.eigenvalues).unwrap();
        assert!(dec.eigenvalues.last().unwrap().sqrt() >= 1.0 + 2.0 * g.delta);
    }

    #[test]
    fn csv_layout() {
        let d = EigenDecomposition {
            eigenvalues: vec![4.0],
            eigenvectors: vec![vec![1.0]],
            orthonormality: 0.0,
            divergence: vec![0.0],
            residuals: vec![0.0],
        };
        assert_eq!(
            d.to_csv(),
            "index,lambda,sqrt_lambda,div_certificate\n0,4e0,2e0,0e0\n"
        );
    }
}
