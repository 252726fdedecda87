//! Piecewise-constant material tensors.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::CoefficientError;
use crate::mesh::BoxDomain;

/// Permittivity and permeability of one subdomain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub epsilon: Matrix3<f64>,
    pub mu: Matrix3<f64>,
}

impl Material {
    pub fn isotropic(epsilon: f64, mu: f64) -> Self {
        Self {
            epsilon: Matrix3::identity() * epsilon,
            mu: Matrix3::identity() * mu,
        }
    }

    pub fn vacuum() -> Self {
        Self::isotropic(1.0, 1.0)
    }
}

/// Derived data for one subdomain.
#[derive(Clone, Copy, Debug)]
pub struct SubdomainCoefficients {
    pub epsilon: Matrix3<f64>,
    pub mu: Matrix3<f64>,
    pub zeta: Matrix3<f64>,
    pub chi: Matrix3<f64>,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub chi_max: f64,
}

#[derive(Clone, Debug)]
pub struct CoefficientField {
    subdomains: Vec<SubdomainCoefficients>,
    theta: f64,
    diameter: f64,
}

fn spd_extremes(
    m: &Matrix3<f64>,
    name: &'static str,
    label: usize,
) -> Result<(f64, f64), CoefficientError> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-14 * scale {
        return Err(CoefficientError::NotSymmetric { name, label });
    }
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return Err(CoefficientError::NotPositive {
            name,
            label,
            min_eig: lo,
        });
    }
    Ok((lo, hi))
}

impl CoefficientField {
    /// One material per subdomain label, in label order.
    pub fn new(materials: &[Material], domain: &BoxDomain) -> Result<Self, CoefficientError> {
        if materials.is_empty() {
            return Err(CoefficientError::Empty);
        }
        let mut subdomains = Vec::with_capacity(materials.len());
        for (label, m) in materials.iter().enumerate() {
            let (epsilon_min, epsilon_max) = spd_extremes(&m.epsilon, "epsilon", label)?;
            let (mu_min, mu_max) = spd_extremes(&m.mu, "mu", label)?;
            let zeta = m.epsilon.try_inverse().expect("SPD matrix is invertible");
            let chi = m.mu.try_inverse().expect("SPD matrix is invertible");
            let sym = |a: Matrix3<f64>| (a + a.transpose()) * 0.5;
            subdomains.push(SubdomainCoefficients {
                epsilon: m.epsilon,
                mu: m.mu,
                zeta: sym(zeta),
                chi: sym(chi),
                epsilon_min,
                epsilon_max,
                mu_min,
                mu_max,
                chi_max: 1.0 / mu_min,
            });
        }
        let theta = subdomains
            .iter()
            .map(|s| 1.0 / (s.epsilon_max * s.mu_max).sqrt())
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            subdomains,
            theta,
            diameter: domain.diameter(),
        })
    }

    pub fn uniform(material: Material, domain: &BoxDomain) -> Result<Self, CoefficientError> {
        Self::new(&[material], domain)
    }

    /// Checks that every label of a mesh has a material.
    pub fn check_labels(&self, n_subdomains: usize) -> Result<(), CoefficientError> {
        if n_subdomains > self.subdomains.len() {
            return Err(CoefficientError::MissingMaterial(self.subdomains.len()));
        }
        Ok(())
    }

    pub fn subdomain(&self, label: usize) -> &SubdomainCoefficients {
        &self.subdomains[label]
    }

    pub fn n_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    pub fn epsilon(&self, label: usize) -> &Matrix3<f64> {
        &self.subdomains[label].epsilon
    }

    pub fn chi(&self, label: usize) -> &Matrix3<f64> {
        &self.subdomains[label].chi
    }

    /// Smallest wavespeed over all subdomains.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Diameter of the computational box.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// `omega * d / theta`.
    pub fn omega_scale(&self, omega: f64) -> f64 {
        omega * self.diameter / self.theta
    }

    /// Same field with every permittivity multiplied by `factor`.
    pub fn scale_epsilon(&self, factor: f64, domain: &BoxDomain) -> Result<Self, CoefficientError> {
        let materials: Vec<Material> = self
            .subdomains
            .iter()
            .map(|s| Material {
                epsilon: s.epsilon * factor,
                mu: s.mu,
            })
            .collect();
        Self::new(&materials, domain)
    }
}
