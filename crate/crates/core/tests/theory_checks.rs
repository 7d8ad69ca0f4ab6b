use krein_ridge::theory::{hypothesis_error, RateRegime};
use krein_ridge::{
    henrici_certificate, solve_rkks_sphere, sym_eig, theta_rate, theta_rkhs, RateParams,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>, f64, f64) {
    let m = rng.random_range(2..25);
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (
        (&a + a.transpose()) * 0.5,
        y,
        rng.random_range(0.01..1.0),
        rng.random_range(0.3..2.0),
    )
}

#[test]
fn henrici_certificate_and_negative_control() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 100 {
        let (k, y, lambda, r) = instance(&mut rng);
        let Ok(sol) = solve_rkks_sphere(&k, &y, lambda, r) else {
            continue;
        };
        let s = sym_eig(&k).unwrap();
        let cert = henrici_certificate(&s, &y, lambda, r, sol.mu);
        assert!(cert.passed, "gap {} > bound {}", cert.gap, cert.bound);
        let off = henrici_certificate(&s, &y, lambda, r, sol.mu - 10.0 * cert.bound);
        assert!(!off.passed);
        checked += 1;
    }
}

#[test]
fn hypothesis_error_is_nonnegative_and_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let (k, y, lambda, r) = instance(&mut rng);
        let Ok(h) = hypothesis_error(&k, &y, lambda, r) else {
            continue;
        };
        assert!(h.p >= -1e-8, "P = {}", h.p);
        assert!((h.p1 + h.p2 - h.direct_diff).abs() <= 1e-8 * h.direct_diff.abs().max(1.0));
    }
}

#[test]
fn epsilon_window_is_enforced() {
    let err = theta_rate(&RateParams::new(1.0, 1.0, 1.0, 0.5, 0.5)).unwrap_err();
    assert!(err.to_string().contains("epsilon window"));
    assert!(err.is_usage());
}

proptest! {
    #[test]
    fn exponent_is_monotone_in_eta(s in 0.1f64..3.0, gf in 0.05f64..0.95, b in 0.05f64..1.0, ef in 0.05f64..0.95) {
        let gmax = ((1.0 + 1.0 / (s * (2.0 + s))) / (1.0 + s)).min(1.0);
        let mut p = RateParams::new(gf * gmax, b, s, 1.0, 0.0);
        p.epsilon = ef * p.epsilon_limit();
        let lower = (1.0 - 2.0 / s).max(0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..50 {
            p.eta = lower + (1.0 - lower) * k as f64 / 50.0;
            let t = theta_rate(&p).unwrap();
            prop_assert_eq!(t.regime, RateRegime::Krein);
            prop_assert!(t.theta >= prev);
            prev = t.theta;
        }
        // at and beyond eta = 1 the exponent is the RKHS one
        p.eta = 2.0;
        prop_assert_eq!(theta_rate(&p).unwrap().theta, theta_rkhs(&p).unwrap().theta);
    }
}
