//! Shape recovery of the moment-matching GGD / AGGD estimators on synthetic
//! draws with known parameters.

use lowlight_core::metrics::{fit_aggd, fit_ggd};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use statrs::function::gamma::gamma;

const N: usize = 1_000_000;

/// Draws from a zero-mean GGD with shape `alpha` and scale `beta`, density
/// proportional to `exp(-(|x| / beta)^alpha)`. If `Y ~ Gamma(1/alpha, 1)`
/// then `beta * Y^(1/alpha)` has the law of `|x|`.
fn ggd_draws(alpha: f64, beta: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Gamma::new(1.0 / alpha, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let mag = beta * g.sample(&mut rng).powf(1.0 / alpha);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

fn ggd_sigma(alpha: f64, beta: f64) -> f64 {
    beta * (gamma(3.0 / alpha) / gamma(1.0 / alpha)).sqrt()
}

#[test]
fn ggd_shape_recovered_within_five_percent() {
    for (i, alpha) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let draws = ggd_draws(alpha, 1.3, N, 100 + i as u64);
        let fit = fit_ggd(&draws).unwrap();
        let rel = (fit.alpha - alpha).abs() / alpha;
        assert!(
            rel < 0.05,
            "alpha {alpha}: fitted {} ({:.2}% off)",
            fit.alpha,
            rel * 100.0
        );
        let sigma = ggd_sigma(alpha, 1.3);
        assert!(
            (fit.sigma - sigma).abs() / sigma < 0.02,
            "alpha {alpha}: sigma {} vs {sigma}",
            fit.sigma
        );
    }
}

#[test]
fn standard_normal_and_laplace() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal: Vec<f64> = Normal::new(0.0, 1.0)
        .unwrap()
        .sample_iter(&mut rng)
        .take(N)
        .collect();
    let fit = fit_ggd(&normal).unwrap();
    assert!((1.95..=2.05).contains(&fit.alpha), "{fit:?}");
    assert!((0.98..=1.02).contains(&fit.sigma), "{fit:?}");

    // Laplace(0, 1) as the difference of two unit exponentials
    let exp = Gamma::new(1.0, 1.0).unwrap();
    let laplace: Vec<f64> = (0..N)
        .map(|_| exp.sample(&mut rng) - exp.sample(&mut rng))
        .collect();
    let fit = fit_ggd(&laplace).unwrap();
    assert!((0.95..=1.05).contains(&fit.alpha), "{fit:?}");
}

#[test]
fn ggd_scale_equivariance() {
    let draws = ggd_draws(1.5, 1.0, 10_000, 3);
    let base = fit_ggd(&draws).unwrap();
    for t in [0.01, 3.0, 250.0] {
        let scaled: Vec<f64> = draws.iter().map(|v| v * t).collect();
        let fit = fit_ggd(&scaled).unwrap();
        assert_eq!(fit.alpha, base.alpha);
        assert!((fit.sigma - t * base.sigma).abs() <= 1e-12 * t * base.sigma.max(1.0));
    }
}

#[test]
fn aggd_symmetric_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws: Vec<f64> = Normal::new(0.0, 1.0)
        .unwrap()
        .sample_iter(&mut rng)
        .take(N)
        .collect();
    let fit = fit_aggd(&draws).unwrap();
    assert!((fit.sigma_l / fit.sigma_r - 1.0).abs() < 0.02, "{fit:?}");
    assert!(fit.eta.abs() < 0.01, "{fit:?}");
    assert!((fit.alpha - 2.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn aggd_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws: Vec<f64> = (0..50_000)
        .map(|_| {
            let v: f64 = rng.random_range(-1.0..2.5);
            v * v.abs()
        })
        .collect();
    let fit = fit_aggd(&draws).unwrap();
    let negated: Vec<f64> = draws.iter().map(|v| -v).collect();
    let mirror = fit_aggd(&negated).unwrap();
    assert_eq!(mirror.alpha, fit.alpha);
    assert!((mirror.sigma_l - fit.sigma_r).abs() < 1e-12);
    assert!((mirror.sigma_r - fit.sigma_l).abs() < 1e-12);
    assert!((mirror.eta + fit.eta).abs() < 1e-12);
    assert!(fit.eta > 0.0);
}

#[test]
fn aggd_unequal_sides() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let narrow = Normal::<f64>::new(0.0, 1.0).unwrap();
    let wide = Normal::<f64>::new(0.0, 2.0).unwrap();
    let draws: Vec<f64> = (0..N)
        .map(|i| {
            if i % 2 == 0 {
                -narrow.sample(&mut rng).abs()
            } else {
                wide.sample(&mut rng).abs()
            }
        })
        .collect();
    let fit = fit_aggd(&draws).unwrap();
    let ratio = fit.sigma_r / fit.sigma_l;
    assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn aggd_needs_both_signs() {
    let positive: Vec<f64> = (1..100).map(f64::from).collect();
    assert!(fit_aggd(&positive).is_err());
    let negative: Vec<f64> = positive.iter().map(|v| -v).collect();
    assert!(fit_aggd(&negative).is_err());
}
