//! Dense trivariate polynomials in the monomial basis.

use std::collections::HashMap;

/// All monomials `x^a y^b z^c` with `a + b + c <= degree`, ordered by total degree
/// and then lexicographically in descending powers of `x`.
#[derive(Clone, Debug)]
pub struct MonomialSet {
    degree: usize,
    exponents: Vec<[usize; 3]>,
    index: HashMap<[usize; 3], usize>,
}

/// Number of monomials of total degree at most `d` in three variables.
pub fn dim_p(d: usize) -> usize {
    (d + 1) * (d + 2) * (d + 3) / 6
}

impl MonomialSet {
    pub fn new(degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(dim_p(degree));
        for total in 0..=degree {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    exponents.push([a, b, total - a - b]);
                }
            }
        }
        let index = exponents.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Self {
            degree,
            exponents,
            index,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[[usize; 3]] {
        &self.exponents
    }

    pub fn index_of(&self, e: [usize; 3]) -> Option<usize> {
        self.index.get(&e).copied()
    }

    /// Monomials of exact total degree `d`.
    pub fn homogeneous(&self, d: usize) -> impl Iterator<Item = usize> + '_ {
        self.exponents
            .iter()
            .enumerate()
            .filter(move |(_, e)| e[0] + e[1] + e[2] == d)
            .map(|(i, _)| i)
    }

    /// Values of every monomial at `x`.
    pub fn evaluate(&self, x: [f64; 3]) -> Vec<f64> {
        let mut pows = vec![[1.0; 3]; self.degree + 1];
        for k in 1..=self.degree {
            for a in 0..3 {
                pows[k][a] = pows[k - 1][a] * x[a];
            }
        }
        self.exponents
            .iter()
            .map(|e| pows[e[0]][0] * pows[e[1]][1] * pows[e[2]][2])
            .collect()
    }

    /// Coefficients of the partial derivative along `axis`, in the same set.
    pub fn differentiate(&self, coeffs: &[f64], axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, e) in self.exponents.iter().enumerate() {
            if e[axis] > 0 && coeffs[i] != 0.0 {
                let mut f = *e;
                f[axis] -= 1;
                out[self.index[&f]] += coeffs[i] * e[axis] as f64;
            }
        }
        out
    }

    /// Coefficients of `x_axis * q` for `q` given in this set, expressed in `target`.
    pub fn multiply_coordinate(
        &self,
        coeffs: &[f64],
        axis: usize,
        target: &MonomialSet,
    ) -> Vec<f64> {
        assert!(target.degree > self.degree);
        let mut out = vec![0.0; target.len()];
        for (i, e) in self.exponents.iter().enumerate() {
            let mut f = *e;
            f[axis] += 1;
            out[target.index[&f]] += coeffs[i];
        }
        out
    }

    /// Embeds coefficients of a lower-degree set into this one.
    pub fn embed(&self, coeffs: &[f64], source: &MonomialSet) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, e) in source.exponents.iter().enumerate() {
            out[self.index[e]] += coeffs[i];
        }
        out
    }
}

/// Value of a polynomial given monomial values.
pub fn dot(coeffs: &[f64], values: &[f64]) -> f64 {
    coeffs.iter().zip(values).map(|(a, b)| a * b).sum()
}
