//! Refining the coarse space against a fixed fine space cannot increase the
//! approximation factor.

use std::sync::Arc;

use maxwell_core::coefficients::{CoefficientField, Material};
use maxwell_core::gamma::{build_prolongation, GammaEstimator};
use maxwell_core::mesh::{build_box_mesh, BoxDomain};
use maxwell_core::system::MaxwellSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gamma_decreases_under_coarse_refinement() {
    let dom = BoxDomain::cube(std::f64::consts::PI);
    let c = CoefficientField::uniform(Material::vacuum(), &dom).unwrap();
    let m1 = Arc::new(build_box_mesh(&dom, [1, 1, 1], &[]).unwrap());
    let m2 = Arc::new(m1.refine_uniform());
    let m4 = Arc::new(m2.refine_uniform());
    let omega = 1.0;
    let s1 = MaxwellSystem::new(m1, 0, &c).unwrap();
    let s2 = MaxwellSystem::new(m2, 0, &c).unwrap();
    let s4 = MaxwellSystem::new(m4, 0, &c).unwrap();
    let p1 = build_prolongation(&s1.nedelec, &s4.nedelec).unwrap();
    let p2 = build_prolongation(&s2.nedelec, &s4.nedelec).unwrap();
    let g1 = GammaEstimator::new(&s4, &p1, omega).unwrap();
    let g2 = GammaEstimator::new(&s4, &p2, omega).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let g = s4.random_div_free(&mut rng).unwrap();
        assert!(g2.value(&g) <= g1.value(&g) * (1.0 + 1e-10));
    }
    let coarse = g1.power(200, 1e-8, 11).unwrap().gamma;
    let mid = g2.power(200, 1e-8, 11).unwrap().gamma;
    assert!(mid <= coarse * 1.05, "{mid} > {coarse}");
    assert!(mid > 0.0);
}
