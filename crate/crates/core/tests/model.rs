use decolab::model::{sample_environment, EnvSpin, SpinBathConfig, TimeGrid};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Haar-random qubit states have `|alpha|^2` uniform on `[0, 1]`, so
/// `E(|alpha|^4 + |beta|^4) = ∫ u² + (1-u)² du = 2/3`.
#[test]
fn haar_fourth_moment() {
    let n = 10_000;
    let spins = sample_environment::<f64>(n, 7, 1.0).unwrap();
    let x: Vec<f64> = spins.iter().map(|s| s.p_up().powi(2) + s.p_down().powi(2)).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = (var / n as f64).sqrt();
    assert!((mean - 2.0 / 3.0).abs() < 3.0 * sigma, "mean {mean}, sigma {sigma}");

    // Same moment from uniform populations drawn by an unrelated generator.
    let mut rng = StdRng::seed_from_u64(0xdec0);
    let mc = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            u * u + (1.0 - u) * (1.0 - u)
        })
        .sum::<f64>()
        / n as f64;
    assert!((mean - mc).abs() < 6.0 * sigma, "library {mean}, monte carlo {mc}");
}

#[test]
fn populations_are_uniform() {
    let spins = sample_environment::<f64>(20_000, 11, 1.0).unwrap();
    let mut bins = [0usize; 10];
    for s in &spins {
        bins[((s.p_up() * 10.0) as usize).min(9)] += 1;
    }
    let expected = 2000.0;
    let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 27.88, "chi2 = {chi2}, bins {bins:?}");
}

#[test]
fn sampling_is_a_pure_function() {
    let a = sample_environment::<f64>(64, 3, 2.0).unwrap();
    let b = sample_environment::<f64>(64, 3, 2.0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_environment::<f64>(64, 4, 2.0).unwrap());
    assert!(a.iter().all(|s| s.g > 0.0 && s.g <= 2.0));
    assert!(a.iter().all(|s| (s.p_up() + s.p_down() - 1.0).abs() < 1e-12));
    assert!(sample_environment::<f64>(4, 0, 0.0).is_err());
    assert!(sample_environment::<f64>(0, 0, 1.0).unwrap().is_empty());
}

#[test]
fn f32_sampling_matches_f64() {
    let wide = sample_environment::<f64>(16, 9, 1.0).unwrap();
    let narrow = sample_environment::<f32>(16, 9, 1.0).unwrap();
    for (w, n) in wide.iter().zip(&narrow) {
        assert!((w.g - n.g as f64).abs() < 1e-6);
        assert!((w.alpha.re - n.alpha.re as f64).abs() < 1e-6);
    }
}

#[test]
fn configurations_are_never_renormalized() {
    let s = EnvSpin::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8), 1.0);
    assert!(SpinBathConfig::with_unit_hbar(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0), vec![s]).is_ok());
    let bad = SpinBathConfig::with_unit_hbar(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), vec![s]);
    assert!(bad.unwrap_err().to_string().contains("|a|^2 + |b|^2 = 2"));
    let off = EnvSpin::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8 + 1e-9), 1.0);
    assert!(SpinBathConfig::with_unit_hbar(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), vec![off]).is_err());
}

#[test]
fn grid_endpoints_are_exact() {
    let g = TimeGrid::new(0.0, 50.0, 1001).unwrap();
    assert_eq!(g.time(0), 0.0);
    assert_eq!(g.time(1000), 50.0);
    assert_eq!(g.times().len(), 1001);
    assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
    assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
}
