//! Gauss-type rules on the reference simplices, built from collapsed (Duffy)
//! coordinates with Gauss-Jacobi factors.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss-Jacobi rule on `[0, 1]` for the weight `(1 - t)^alpha`, with `n` points.
pub fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Golub-Welsch on the Jacobi matrix for weight (1-x)^alpha on [-1, 1].
    let a = alpha;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a;
        jac[(k, k)] = if k == 0 {
            -a / (a + 2.0)
        } else {
            -a * a / (s * (s + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + a;
            let b = 4.0 * m * (m + a) * m * (m + a) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(k, k + 1)] = b.sqrt();
            jac[(k + 1, k)] = b.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mu0 = 2f64.powf(a + 1.0) / (a + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            ((1.0 + x) / 2.0, mu0 * v0 * v0 / 2f64.powf(a + 1.0))
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0.0)
}

fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl LineRule {
    /// Rule on `[0, 1]` exact for polynomials of the given degree.
    pub fn new(degree: usize) -> Self {
        let (points, weights) = gauss_legendre(points_for_degree(degree));
        Self {
            points,
            weights,
            degree,
        }
    }
}

/// Rule on the triangle `{s, t >= 0, s + t <= 1}` with weights summing to 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    pub fn new(degree: usize) -> Self {
        let n = points_for_degree(degree);
        let (u, wu) = gauss_legendre(n);
        let (v, wv) = gauss_jacobi(n, 1.0);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (j, &vj) in v.iter().enumerate() {
            for (i, &ui) in u.iter().enumerate() {
                points.push([ui * (1.0 - vj), vj]);
                weights.push(wu[i] * wv[j]);
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }
}

/// Rule on the reference tetrahedron with vertices 0, e1, e2, e3.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Reference coordinates.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Rule exact for all polynomials of total degree `degree`.
    pub fn tet(degree: usize) -> Self {
        let n = points_for_degree(degree);
        let (u, wu) = gauss_legendre(n);
        let (v, wv) = gauss_jacobi(n, 1.0);
        let (w, ww) = gauss_jacobi(n, 2.0);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for (k, &wk) in w.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                for (i, &ui) in u.iter().enumerate() {
                    points.push([ui * (1.0 - vj) * (1.0 - wk), vj * (1.0 - wk), wk]);
                    weights.push(wu[i] * wv[j] * ww[k]);
                }
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates of every point.
    pub fn barycentric(&self) -> Vec<[f64; 4]> {
        self.points
            .iter()
            .map(|p| [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]])
            .collect()
    }

    pub fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^a y^b z^c over the reference tetrahedron.
    fn tet_moment(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)
    }

    #[test]
    fn known_moments() {
        let q = QuadratureRule::tet(2);
        assert!((q.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
        assert!((q.integrate(|p| p[0]) - 1.0 / 24.0).abs() < 1e-15);
        assert!((q.integrate(|p| p[0] * p[1]) - 1.0 / 120.0).abs() < 1e-15);
    }

    #[test]
    fn tet_exactness() {
        for degree in 0..=12 {
            let q = QuadratureRule::tet(degree);
            assert!((q.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-14);
            for a in 0..=degree as u32 {
                for b in 0..=degree as u32 - a {
                    for c in 0..=degree as u32 - a - b {
                        let got = q.integrate(|p| {
                            p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                        });
                        let exact = tet_moment(a, b, c);
                        assert!(
                            (got - exact).abs() <= 1e-14 * exact.max(1e-3),
                            "degree {degree} monomial ({a},{b},{c}): {got} vs {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_and_line_exactness() {
        for degree in 0..=10 {
            let t = TriangleRule::new(degree);
            for a in 0..=degree as u32 {
                for b in 0..=degree as u32 - a {
                    let got: f64 = t
                        .points
                        .iter()
                        .zip(&t.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((got - exact).abs() < 1e-14);
                }
            }
            let l = LineRule::new(degree);
            for a in 0..=degree as i32 {
                let got: f64 = l
                    .points
                    .iter()
                    .zip(&l.weights)
                    .map(|(x, w)| w * x.powi(a))
                    .sum();
                assert!((got - 1.0 / (a as f64 + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn points_inside_reference() {
        let q = QuadratureRule::tet(6);
        for b in q.barycentric() {
            assert!(b.iter().all(|&l| l > 0.0 && l < 1.0));
        }
    }
}
