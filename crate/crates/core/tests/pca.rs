use opsgd::dual::{run, DualExpansion};
use opsgd::kernel::{OutputVec, ScalarKernel};
use opsgd::pca::{fit_pca, pca_sgd_run};
use opsgd::schedule::{FiniteHorizonSchedule, Schedule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (2usize..8, 2usize..30).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), m),
            1..=n.min(m),
        )
    })
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn basis_orthonormal_and_spectrum_sorted((xs, d) in samples()) {
        let c = fit_pca(&xs, d).unwrap();
        prop_assert_eq!(c.basis().len(), d);
        for (i, a) in c.basis().iter().enumerate() {
            for (j, b) in c.basis().iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-10);
            }
        }
        prop_assert!(c.spectrum().windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.spectrum().iter().all(|v| *v >= 0.0));
        prop_assert_eq!(c.eigvals().len(), d);
    }

    #[test]
    fn reconstruction_error_is_trailing_sum((xs, d) in samples()) {
        let c = fit_pca(&xs, d).unwrap();
        let mut err = 0.0;
        for x in &xs {
            let p = c.project(x).unwrap();
            let resid: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            // Pythagoras for an orthogonal projection.
            prop_assert!((sq(x) - sq(&p) - sq(&resid)).abs() <= 1e-9 * sq(x).max(1.0));
            err += sq(&resid);
        }
        err /= xs.len() as f64;
        let scale: f64 = c.spectrum().iter().sum::<f64>().max(1.0);
        prop_assert!((err - c.trailing_sum()).abs() <= 1e-8 * scale, "{} vs {}", err, c.trailing_sum());
    }
}

#[test]
fn full_rank_pipeline_is_plain_sgd() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let train: Vec<(Vec<f64>, Vec<f64>)> = (0..64)
        .map(|_| {
            (
                (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let k = ScalarKernel::gaussian(0.5).unwrap();
    let sched = Schedule::Finite(FiniteHorizonSchedule::new(0.5, 0.5, 0.9, 0.1, 64).unwrap());
    let model = pca_sgd_run(&train, 5, 3, k.clone(), &sched).unwrap();
    let plain = run(
        k,
        3,
        train
            .iter()
            .map(|(x, y)| (x.clone(), OutputVec::new(y.clone()).unwrap())),
        &sched,
    )
    .unwrap();
    for i in 0..plain.len() {
        assert_eq!(model.estimator.anchor(i), plain.anchor(i));
    }
    assert_eq!(model.estimator.coefficients(), plain.coefficients());
    let x = vec![0.1, -0.2, 0.3, 0.0, 0.5];
    assert_eq!(
        model.predict(&x).unwrap(),
        plain.predict(&x).unwrap().into_inner()
    );
}
