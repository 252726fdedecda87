//! Property tests over randomly generated meshes, orders and fields.

use std::collections::HashMap;
use std::sync::Arc;

use maxwell_core::assembly::{assemble, norm_energy};
use maxwell_core::coefficients::{CoefficientField, Material};
use maxwell_core::mesh::{build_box_mesh, BoxDomain, Mesh, PartitionPlane};
use maxwell_core::space::{BoundaryCondition, FeSpace};
use maxwell_core::sparse::{norm_inf, Role};
use maxwell_core::system::MaxwellSystem;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_box(ext: [f64; 3]) -> BoxDomain {
    BoxDomain::new([0.0; 3], ext)
}

fn faces_of(mesh: &Mesh) -> HashMap<[usize; 3], usize> {
    let mut count = HashMap::new();
    for t in mesh.tets() {
        for skip in 0..4 {
            let mut f: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| t[i]).collect();
            f.sort_unstable();
            *count.entry([f[0], f[1], f[2]]).or_insert(0) += 1;
        }
    }
    count
}

fn check_conforming(mesh: &Mesh) -> Result<(), TestCaseError> {
    let count = faces_of(mesh);
    let boundary = count.values().filter(|&&c| c == 1).count();
    prop_assert!(count.values().all(|&c| c == 1 || c == 2));
    prop_assert_eq!(
        boundary,
        mesh.boundary_faces().iter().filter(|&&b| b).count()
    );
    prop_assert_eq!(count.len(), mesh.faces().len());
    let (v, e, f, t) = (
        mesh.n_vertices() as i64,
        mesh.edges().len() as i64,
        mesh.faces().len() as i64,
        mesh.n_tets() as i64,
    );
    prop_assert_eq!(v - e + f - t, 1);
    for t in 0..mesh.n_tets() {
        prop_assert!(mesh.tet_volume(t) > 0.0);
        prop_assert!(mesh.element_map(t).jacobian.determinant() > 0.0);
    }
    Ok(())
}

fn vacuum(domain: &BoxDomain) -> CoefficientField {
    CoefficientField::uniform(Material::vacuum(), domain).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn meshes_conform_and_labels_tile(
        nx in 1usize..4, ny in 1usize..4, nz in 2usize..4,
        ext in prop::array::uniform3(0.5f64..3.0),
        cut_at in 1usize..3,
    ) {
        let dom = random_box(ext);
        let k = cut_at.min(nz - 1);
        let cut = PartitionPlane { axis: 2, coordinate: ext[2] * k as f64 / nz as f64 };
        let mesh = build_box_mesh(&dom, [nx, ny, nz], &[cut]).unwrap();
        check_conforming(&mesh)?;
        let st = mesh.statistics();
        let total: f64 = st.volume_per_subdomain.iter().sum();
        prop_assert!((total - dom.volume()).abs() <= 1e-12 * dom.volume());
        for t in 0..mesh.n_tets() {
            let below = mesh.centroid(t)[2] < cut.coordinate;
            prop_assert_eq!(mesh.labels()[t], if below { 0 } else { 1 });
        }
        let fine = mesh.refine_uniform();
        check_conforming(&fine)?;
        prop_assert!((fine.h() - mesh.h() / 2.0).abs() <= 1e-14 * mesh.h());
        // Every coarse vertex is a fine vertex and every coarse edge splits into
        // two fine edges through its midpoint.
        for (i, v) in mesh.vertices().iter().enumerate() {
            prop_assert_eq!(fine.vertices()[i], *v);
        }
        let index: HashMap<[u64; 3], usize> = fine
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, v)| (v.map(f64::to_bits), i))
            .collect();
        for &[a, b] in mesh.edges() {
            let (va, vb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let mid: [f64; 3] = std::array::from_fn(|k| 0.5 * (va[k] + vb[k]));
            let m = index.get(&mid.map(f64::to_bits));
            prop_assert!(m.is_some());
            let m = *m.unwrap();
            prop_assert!(fine.edge_id(a, m).is_some() && fine.edge_id(b, m).is_some());
        }
    }

    #[test]
    fn energy_norm_matches_matrices(n in 1usize..3, p in 0usize..3, omega in 0.1f64..3.0, seed in any::<u64>()) {
        let dom = random_box([1.0, 1.5, 2.0]);
        let mesh = Arc::new(build_box_mesh(&dom, [n, n, n], &[]).unwrap());
        let c = CoefficientField::new(&[Material::isotropic(2.0, 0.5)], &dom).unwrap();
        let s = MaxwellSystem::new(mesh, p, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..s.n()).map(|_| rng.random::<f64>() - 0.5).collect();
        let direct = norm_energy(&s.nedelec, &s.nedelec.extend(&v), &c, omega).unwrap();
        let matrices = s.energy_norm(&v, omega);
        prop_assert!((direct * direct - matrices * matrices).abs() <= 1e-12 * matrices * matrices);
    }

    #[test]
    fn curl_annihilates_gradients(n in 1usize..3, p in 0usize..3, seed in any::<u64>()) {
        let dom = random_box([1.0, 2.0, 1.5]);
        let mesh = Arc::new(build_box_mesh(&dom, [n + 1, n, n + 1], &[]).unwrap());
        let s = MaxwellSystem::new(mesh, p, &vacuum(&dom)).unwrap();
        let kg = s.curl.mul(&s.gradient);
        prop_assert!(kg.max_abs() <= 1e-12 * s.curl.max_abs() * s.gradient.max_abs());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = (0..s.lagrange.n_free()).map(|_| rng.random::<f64>() - 0.5).collect();
        let gq = s.grad(&q);
        let kgq = s.curl.matvec(&gq);
        prop_assert!(norm_inf(&kgq) <= 1e-12 * s.curl.max_abs() * norm_inf(&gq));
    }

    #[test]
    fn vertex_relabelling_preserves_operators(seed in any::<u64>(), p in 0usize..2) {
        let dom = random_box([1.0, 1.0, 1.0]);
        let mesh = build_box_mesh(&dom, [2, 1, 1], &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..mesh.n_vertices()).collect();
        perm.shuffle(&mut rng);
        let mut vertices = vec![[0.0; 3]; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            vertices[new] = mesh.vertices()[old];
        }
        let mut order: Vec<usize> = (0..mesh.n_tets()).collect();
        order.shuffle(&mut rng);
        let cells: Vec<[usize; 4]> = order.iter().map(|&t| mesh.cells()[t].map(|v| perm[v])).collect();
        let labels = vec![0; cells.len()];
        let relabelled = Mesh::from_cells(vertices, cells, labels).unwrap();
        let c = vacuum(&dom);
        let a = FeSpace::nedelec(Arc::new(mesh.clone()), p, BoundaryCondition::None).unwrap();
        let b = FeSpace::nedelec(Arc::new(relabelled.clone()), p, BoundaryCondition::None).unwrap();
        let (ma, ka) = (assemble(&a, &c, Role::Mass).unwrap(), assemble(&a, &c, Role::CurlCurl).unwrap());
        let (mb, kb) = (assemble(&b, &c, Role::Mass).unwrap(), assemble(&b, &c, Role::CurlCurl).unwrap());
        if p == 0 {
            // Edge DOFs map to edge DOFs, with a sign where the orientation flips.
            let mut map = vec![(0usize, 0.0f64); mesh.edges().len()];
            for (e, &[u, v]) in mesh.edges().iter().enumerate() {
                let (pu, pv) = (perm[u], perm[v]);
                let f = relabelled.edge_id(pu.min(pv), pu.max(pv)).unwrap();
                map[e] = (f, if pu < pv { 1.0 } else { -1.0 });
            }
            for (x, y) in [(&ma, &mb), (&ka, &kb)] {
                for (i, j, v) in x.triplets() {
                    let (fi, si) = map[i];
                    let (fj, sj) = map[j];
                    prop_assert!((y.get(fi, fj) - si * sj * v).abs() <= 1e-13 * x.max_abs());
                }
                prop_assert_eq!(x.nnz(), y.nnz());
            }
        } else {
            // Higher-order bases change with the vertex order; the pencil spectrum does not.
            let spectrum = |m: &maxwell_core::sparse::SparseOperator, k: &maxwell_core::sparse::SparseOperator| {
                let l = m.to_dense().cholesky().unwrap().l();
                let li = l.clone().try_inverse().unwrap();
                let a: DMatrix<f64> = &li * k.to_dense() * li.transpose();
                let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                ev
            };
            let (ea, eb) = (spectrum(&ma, &ka), spectrum(&mb, &kb));
            let scale = ea.last().unwrap().abs();
            for (x, y) in ea.iter().zip(&eb) {
                prop_assert!((x - y).abs() <= 1e-10 * scale, "{} {}", x, y);
            }
        }
    }
}

#[test]
fn solves_preserve_divergence_and_splitting_is_linear() {
    use maxwell_core::source::{compute_splitting, SourceProblem, TimeHarmonicSolver};
    let dom = BoxDomain::cube(std::f64::consts::PI);
    let mesh = Arc::new(build_box_mesh(&dom, [2, 2, 2], &[]).unwrap());
    let s = MaxwellSystem::new(mesh, 1, &vacuum(&dom)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for omega in [0.6, 1.1, 2.3] {
        let solver = TimeHarmonicSolver::new(&s, omega).unwrap();
        let g1 = s.random_div_free(&mut rng).unwrap();
        let g2 = s.random_div_free(&mut rng).unwrap();
        let (alpha, beta) = (
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
        );
        let g3: Vec<f64> = g1
            .iter()
            .zip(&g2)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let results: Vec<_> = [g1, g2, g3]
            .into_iter()
            .map(|g| {
                let problem = SourceProblem::new(&s, omega, g, false).unwrap();
                let e = solver.solve(&problem.g);
                assert!(s.relative_divergence(&e) <= 1e-9);
                compute_splitting(&s, &problem, &e, 2).unwrap()
            })
            .collect();
        for r in &results {
            assert!(r.divergence <= 1e-9, "{}", r.divergence);
        }
        for k in 0..=2 {
            let combo: Vec<f64> = results[0].terms[k]
                .iter()
                .zip(&results[1].terms[k])
                .map(|(a, b)| alpha * a + beta * b)
                .collect();
            let scale = norm_inf(&combo)
                .max(norm_inf(&results[2].terms[k]))
                .max(1e-300);
            let diff = combo
                .iter()
                .zip(&results[2].terms[k])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(
                diff <= 1e-10 * scale || scale == 1e-300,
                "term {k}: {diff:e}"
            );
        }
    }
}
