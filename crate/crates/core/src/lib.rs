//! Curl-conforming finite elements for the time-harmonic Maxwell cavity problem.

pub mod assembly;
pub mod coefficients;
pub mod error;
pub mod gamma;
pub mod mesh;
pub mod polynomial;
pub mod quadrature;
pub mod reference;
pub mod source;
pub mod space;
pub mod sparse;
pub mod spectral;
pub mod system;
