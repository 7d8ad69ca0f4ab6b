use krein_ridge::experiments::{spectrum_experiment, DataSource, InputLaw};
use krein_ridge::spectral::{fit_eigen_decay, DecayPoint};
use krein_ridge::{gram, pseudo_inverse, sym_eig, KernelSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cube(rng: &mut ChaCha8Rng, m: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn moore_penrose_identities_on_singular_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        // repeated rows give an exactly singular Gram matrix
        let base = cube(&mut rng, 8, 3);
        let x = DMatrix::from_fn(12, 3, |i, j| base[(i % 8, j)]);
        let k = gram(
            &KernelSpec::DeltaGauss {
                tau1: 1.0,
                tau2: 0.1,
            },
            &x,
        )
        .unwrap();
        let s = sym_eig(&k).unwrap();
        assert!(
            s.zeros() >= 4,
            "expected a null space, got {} zeros",
            s.zeros()
        );
        let kp = pseudo_inverse(&s);
        let close = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).norm() <= 1e-9 * b.norm().max(1.0);
        assert!(close(&(&k * &kp * &k), &k));
        assert!(close(&(&kp * &k * &kp), &kp));
        assert!(close(&(&k * &kp).transpose(), &(&k * &kp)));
        assert!(close(&(&kp * &k).transpose(), &(&kp * &k)));
    }
}

#[test]
fn log_kernel_has_one_negative_eigenvalue_balancing_the_rest() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in [10, 40, 120] {
        let k = gram(&KernelSpec::LOG, &cube(&mut rng, m, 4)).unwrap();
        let s = sym_eig(&k).unwrap();
        assert_eq!(s.negative, 1);
        let rest: f64 = s.values.iter().take(m - 1).sum();
        assert!((s.values[m - 1] + rest).abs() <= 1e-8 * s.values[m - 1].abs());
    }
}

#[test]
fn delta_gauss_gram_is_traceless_and_indefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = gram(
        &KernelSpec::DeltaGauss {
            tau1: 1.0,
            tau2: 0.1,
        },
        &cube(&mut rng, 60, 5),
    )
    .unwrap();
    assert_eq!(k, k.transpose());
    assert_eq!(k.trace(), 0.0);
    let s = sym_eig(&k).unwrap();
    assert!(s.positive > 0 && s.negative > 0);
}

#[test]
fn gaussian_spectrum_rows_are_psd() {
    let t = spectrum_experiment(
        &KernelSpec::Gaussian { sigma: 1.0 },
        DataSource::Law(InputLaw::UniformCube { dim: 3 }),
        &[20, 40, 80],
        5,
    )
    .unwrap();
    assert!(t.rows.iter().all(|r| r.q == 0));
    assert!(t.fit.is_none() && t.fit_note.is_some());
}

#[test]
fn delta_gauss_decay_exponents_are_positive() {
    let t = spectrum_experiment(
        &KernelSpec::DeltaGauss {
            tau1: 1.0,
            tau2: 0.1,
        },
        DataSource::Law(InputLaw::UniformCube { dim: 5 }),
        &[50, 100, 200, 400],
        7,
    )
    .unwrap();
    let fit = t.fit.expect("both signs present");
    assert!(fit.eta1 > 0.0 && fit.eta2 > 0.0, "{fit:?}");
}

#[test]
fn noisy_power_laws_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (e1, e2) in [(1.0, 1.0), (0.5, 0.9), (0.3, 0.2)] {
        let pts: Vec<DecayPoint> = [32, 64, 128, 256, 512, 1024]
            .iter()
            .map(|&m| {
                let mf = m as f64;
                let n = |rng: &mut ChaCha8Rng| 1.0 + rng.random_range(-0.01..0.01);
                DecayPoint::new(
                    m,
                    1.3 * mf.powf(e1) * n(&mut rng),
                    -0.4 * mf.powf(e2) * n(&mut rng),
                )
            })
            .collect();
        let fit = fit_eigen_decay(&pts).unwrap();
        assert!(
            (fit.eta1 - e1).abs() <= 0.02 && (fit.eta2 - e2).abs() <= 0.02,
            "{fit:?}"
        );
        assert!(fit.cm < 0.0 && fit.c1 > 0.0);
    }
}
