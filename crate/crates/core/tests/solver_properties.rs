use krein_ridge::solver::g_eigenvector;
use krein_ridge::spectral::sym_eig_with;
use krein_ridge::theory::t_inner;
use krein_ridge::{
    build_g, solve_rkks_sphere, solve_rkks_with, sym_eig, EigenMethod, Error, Tolerances,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sym(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

fn well_conditioned(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    loop {
        let k = sym(rng, m);
        let ev = k.clone().symmetric_eigen().eigenvalues;
        if ev.iter().all(|v| v.abs() > 0.05) && ev.min() < 0.0 && ev.max() > 0.0 {
            return k;
        }
    }
}

/// Brute force over the circle `K alpha = sqrt(2) r (cos t, sin t)`.
fn circle_min(k: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, r: f64, n: usize) -> f64 {
    let kinv = k.clone().try_inverse().unwrap();
    let s = 2f64.sqrt() * r;
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let v = DVector::from_vec(vec![s * t.cos(), s * t.sin()]);
            (&v - y).norm_squared() / 2.0 + lambda * v.dot(&(&kinv * &v))
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_gram_has_closed_form(
        y in prop::collection::vec(-5.0f64..5.0, 1..30),
        lambda in 1e-3f64..2.0,
        r in 0.1f64..3.0,
    ) {
        let y = DVector::from_vec(y);
        prop_assume!(y.norm() > 1e-3);
        let m = y.len() as f64;
        let sol = solve_rkks_sphere(&DMatrix::identity(y.len(), y.len()), &y, lambda, r).unwrap();
        prop_assert!((sol.mu - (lambda - y.norm() / (m.powf(1.5) * r))).abs() < 1e-10);
        let expect = &y * (m.sqrt() * r / y.norm());
        prop_assert!((&sol.alpha - expect).amax() < 1e-10);
    }

    #[test]
    fn two_point_problems_match_circle_oracle(seed in any::<u64>(), lambda in prop::sample::select(vec![0.01, 0.1, 1.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = well_conditioned(&mut rng, 2);
        let y = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sol = solve_rkks_sphere(&k, &y, lambda, 1.0).unwrap();
        let best = circle_min(&k, &y, lambda, 1.0, 200_000);
        prop_assert!(sol.objective <= best + 1e-6, "objective {} above grid min {}", sol.objective, best);
        prop_assert!(sol.constraint_residual.abs() < 1e-9);
    }

    #[test]
    fn backends_give_the_same_solution(seed in any::<u64>(), m in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = sym(&mut rng, m);
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let tol = Tolerances::default();
        let a = sym_eig_with(&k, EigenMethod::Dense, &tol).unwrap();
        let b = sym_eig_with(&k, EigenMethod::Jacobi, &tol).unwrap();
        match (solve_rkks_with(&a, &y, 0.1, 1.0, &tol), solve_rkks_with(&b, &y, 0.1, 1.0, &tol)) {
            (Ok(x), Ok(z)) => {
                prop_assert!((x.objective - z.objective).abs() <= 1e-8 * x.objective.abs().max(1.0));
                prop_assert!((x.mu - z.mu).abs() <= 1e-8 * x.mu.abs().max(1.0));
            }
            (Err(Error::HardCase { .. }), Err(Error::HardCase { .. })) => {}
            (x, z) => prop_assert!(false, "backends disagree: {:?} vs {:?}", x.err(), z.err()),
        }
    }
}

#[test]
fn covariance_inner_product_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let m = rng.random_range(1..12);
        let k = sym(&mut rng, m);
        let a = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(t_inner(&a, &k).unwrap() >= 0.0);
    }
}

#[test]
fn multiplier_is_an_eigenvalue_of_the_block_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let k = well_conditioned(&mut rng, 3);
        let y = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (lambda, r) = (0.1, 1.0);
        let s = sym_eig(&k).unwrap();
        let sol = solve_rkks_sphere(&k, &y, lambda, r).unwrap();
        let g = build_g(&s, &y, lambda, r).unwrap();
        let v = g_eigenvector(&s, &y, lambda, sol.mu);
        let res = (&g * &v - &v * sol.mu).norm();
        assert!(res <= 1e-8 * g.norm(), "residual {res}");
        // no real eigenvalue of G lies below mu
        let ev = g.complex_eigenvalues();
        let below = ev
            .iter()
            .filter(|c| c.im.abs() < 1e-9 && c.re < sol.mu - 1e-7 * sol.mu.abs().max(1.0))
            .count();
        assert_eq!(below, 0);
    }
}

#[test]
fn objective_is_below_random_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let m = rng.random_range(3..15);
        let k = well_conditioned(&mut rng, m);
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sol = solve_rkks_sphere(&k, &y, 0.05, 0.7).unwrap();
        let kinv = k.clone().try_inverse().unwrap();
        let mf = m as f64;
        for _ in 0..2000 {
            let u = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
            let v = u * (mf.sqrt() * 0.7);
            let f = (&v - &y).norm_squared() / mf + 0.05 * v.dot(&(&kinv * &v));
            assert!(sol.objective <= f + 1e-10);
        }
    }
}
