use bethe_gauss_core::bp::{run, BpOptions, BpStatus};
use bethe_gauss_core::energy::{f_alpha, AlphaAssignment};
use bethe_gauss_core::gmrf::*;
use bethe_gauss_core::stability::*;
use bethe_gauss_core::MomentMarginals;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_marginals(model: &GmrfModel, rng: &mut ChaCha8Rng, cmax: f64) -> MomentMarginals {
    let n = model.n();
    let m = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let ve = model.edges().iter().map(|e| rng.random_range(-cmax..cmax) * (v[e.i] * v[e.j]).sqrt()).collect();
    MomentMarginals::new(model, m, v, ve).unwrap()
}

#[test]
fn edge_determinant_identity_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = rng.random_range(2..=8);
        let model = generate_model(&ModelSpec::random(n, rng.random_range(0.0..0.8), 0.5, k)).unwrap();
        let w: Vec<f64> = (0..2 * model.edge_count()).map(|_| rng.random_range(-0.95..0.95)).collect();
        let alpha = rng.random_range(0.1..3.0);
        let (lhs, rhs) = det_identity_check(&model, &w, alpha).unwrap();
        worst = worst.max(rel(lhs, rhs));
    }
    assert!(worst <= 1e-10, "worst {worst}");
}

#[test]
fn hessian_determinant_identity_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for k in 0..100 {
        let n = rng.random_range(2..=6);
        let model = generate_model(&ModelSpec::random(n, rng.random_range(0.0..0.8), 0.7, k)).unwrap();
        let v = random_marginals(&model, &mut rng, 0.9);
        let alpha = rng.random_range(0.2..3.0);
        let id = hessian_det_identity(&model, &v, alpha).unwrap();
        assert!(rel(id.lhs, id.rhs) <= 1e-8, "case {k}: {id:?}");
    }
}

#[test]
fn printed_hessian_factor_disagrees() {
    let model = GmrfModel::from_couplings(vec![0.0; 3], &[(0, 1, 0.3), (1, 2, -0.2), (0, 2, 0.1)]).unwrap();
    let v = MomentMarginals::new(&model, vec![0.0; 3], vec![1.0, 1.2, 0.8], vec![0.3, -0.4, 0.2]).unwrap();
    let id = hessian_det_identity(&model, &v, 0.5).unwrap();
    assert!(rel(id.lhs, id.rhs) < 1e-10);
    assert!(rel(id.lhs, id.rhs_printed) > 1e-2);
}

#[test]
fn hessian_identity_sides_vanish_together() {
    let model = GmrfModel::from_couplings(vec![0.0; 3], &[(0, 1, 0.3), (1, 2, 0.2), (0, 2, 0.1)]).unwrap();
    for alpha in [0.5, 1.0, 2.0] {
        let mut last = f64::INFINITY;
        for c in [0.99, 0.999, 0.9999] {
            let v = MomentMarginals::new(&model, vec![0.0; 3], vec![1.0; 3], vec![c; 3]).unwrap();
            let id = hessian_det_identity(&model, &v, alpha).unwrap();
            // the full Hessian blows up here, so agreement degrades with conditioning
            assert!(rel(id.lhs, id.rhs) < 1e-3);
            assert!(id.lhs.abs() < 0.2 * last);
            last = id.lhs.abs();
        }
        assert!(last < 0.02);
    }
}

#[test]
fn two_node_closed_form() {
    let model = GmrfModel::from_couplings(vec![0.0; 2], &[(0, 1, 0.4)]).unwrap();
    for (w12, w21, a) in [(0.3, -0.7, 0.5), (0.9, 0.8, 2.0), (-0.5, -0.5, 1.3)] {
        let (lhs, rhs) = det_identity_check(&model, &[w12, w21], a).unwrap();
        let closed = 1.0 - w12 * w21 * (1.0 - a) * (1.0 - a) / (a * a);
        assert!((lhs - closed).abs() <= 1e-14);
        assert!((rhs - closed).abs() <= 1e-14);
    }
}

/// Schur complement onto `v` of the central-difference Hessian of `F_α`
/// in `(v, v_ij)` at fixed means.
fn fd_schur(model: &GmrfModel, point: &MomentMarginals, alpha: &AlphaAssignment) -> DMatrix<f64> {
    let (n, ne) = (model.n(), model.edge_count());
    let x0: Vec<f64> = point.v().iter().chain(point.v_edge()).copied().collect();
    let f = |x: &[f64]| {
        let mm = MomentMarginals::new(model, point.m().to_vec(), x[..n].to_vec(), x[n..].to_vec()).unwrap();
        f_alpha(model, &mm, alpha).unwrap().value
    };
    let size = n + ne;
    let h = 1e-4;
    let mut hess = DMatrix::zeros(size, size);
    for a in 0..size {
        for b in a..size {
            let at = |da: f64, db: f64| {
                let mut x = x0.clone();
                x[a] += da;
                x[b] += db;
                f(&x)
            };
            let val = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            hess[(a, b)] = val;
            hess[(b, a)] = val;
        }
    }
    let hvv = hess.view((0, 0), (n, n)).into_owned();
    if ne == 0 {
        return hvv;
    }
    let hve = hess.view((0, n), (n, ne)).into_owned();
    let hee = hess.view((n, n), (ne, ne)).into_owned();
    hvv - &hve * hee.try_inverse().unwrap() * hve.transpose()
}

#[test]
fn schur_hessian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..20 {
        let n = rng.random_range(2..=6);
        let model = generate_model(&ModelSpec::random(n, 0.5, 0.8, 100 + k)).unwrap();
        let point = random_marginals(&model, &mut rng, 0.7);
        let alpha = AlphaAssignment::Uniform(rng.random_range(0.3..2.0));
        let exact = hessian_schur(&model, &point, &alpha).unwrap();
        let fd = fd_schur(&model, &point, &alpha);
        let scale = exact.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let err = (&exact - &fd).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(err <= 1e-4 * scale, "case {k}: err {err} scale {scale}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gershgorin_bounds_both_radii(n in 3usize..10, d in 0.1..0.7f64, t in 0.2..1.5f64, seed in any::<u64>(),
                                    vs in prop::collection::vec(0.3..3.0f64, 10), a in 0.05..3.0f64) {
        let spec = if t < 0.99 { ModelSpec::random(n, d, t, seed) } else { ModelSpec { structure: Structure::Complete, ..ModelSpec::random(n, d, t, seed) } };
        let model = generate_model(&spec);
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        let v = &vs[..n];
        let rep = jacobian_spectra_at(&model, v, a).unwrap();
        let bound = gershgorin_bound(&model, &node_to_local(&model, v), a).unwrap();
        prop_assert!(bound + 1e-12 >= rep.rho_eta.max(rep.rho_lambda));
    }

    #[test]
    fn stable_fixed_points_are_minima(n in 3usize..14, d in 0.0..0.6f64, t in 0.2..0.98f64, seed in any::<u64>(), a in 0.2..2.0f64) {
        let model = generate_model(&ModelSpec::random(n, d, t, seed)).unwrap();
        let s = spectral_analysis(&model).unwrap();
        let p = partition_potentials(&model, PartitionStrategy::auto(&s), Some(&s)).unwrap();
        let res = run(&model, &p, &BpOptions { alpha: a, tol: 1e-13, ..Default::default() }).unwrap();
        prop_assume!(res.status == BpStatus::Converged);
        let mg = res.marginals.unwrap();
        let rep = jacobian_spectra(&model, &mg, a).unwrap();
        if rep.stable {
            let verdict = is_local_minimum(&model, &mg.to_moments(&model).unwrap(), &AlphaAssignment::Uniform(a)).unwrap();
            prop_assert_eq!(verdict, MinimumVerdict::Minimum);
        }
    }

    #[test]
    fn m_alpha_rows_sum_to_degree_minus_alpha(n in 3usize..10, d in 0.1..0.8f64, seed in any::<u64>(), a in 0.0..3.0f64) {
        let model = generate_model(&ModelSpec::random(n, d, 0.5, seed)).unwrap();
        let m = edge_adjacency(&model, a).to_dense();
        let dir = model.directed();
        for row in 0..dir.len() {
            let j = dir.pair(row).1;
            let sum: f64 = m.row(row).iter().sum();
            prop_assert!((sum - (model.degree(j) as f64 - a)).abs() < 1e-14);
        }
    }
}

#[test]
fn m_alpha_singular_exactly_at_degrees() {
    let k4 =
        bethe_gauss_core::kregular::build_k_regular(&bethe_gauss_core::kregular::KRegularSpec { n: 8, k: 4, r: 0.1 })
            .unwrap();
    assert!(m_alpha_singularity(&k4, 4.0).unwrap() <= 1e-10);
    for a in [0.5, 1.0, 2.0, 3.0, 5.0] {
        assert!(m_alpha_singularity(&k4, a).unwrap() > 1e-3);
    }
    // a star is not regular but is singular at both of its degrees
    let star = GmrfModel::from_couplings(vec![0.0; 4], &[(0, 1, 0.1), (0, 2, 0.1), (0, 3, 0.1)]).unwrap();
    assert_eq!(singular_alphas(&star), vec![1, 3]);
    assert!(m_alpha_singularity(&star, 1.0).unwrap() <= 1e-10);
    assert!(m_alpha_singularity(&star, 3.0).unwrap() <= 1e-10);
    assert!(m_alpha_singularity(&star, 2.0).unwrap() > 1e-3);
}
