use decolab::analytic::{
    expectation, expectation_full, expectation_s0, expectation_single_env, gamma0, gamma1, interaction_energy,
    overlap_r, overlap_r_norm_sqr, purity, reduced_state,
};
use decolab::model::{
    observable_system_only, sample_environment, EnvSpin, HermitianBlock2, ObservableSpec, SpinBathConfig,
};
use num_complex::{Complex32, Complex64};
use proptest::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

fn config(n: usize, seed: u64, a: Complex64, b: Complex64) -> SpinBathConfig<f64> {
    SpinBathConfig::with_unit_hbar(a, b, sample_environment(n, seed, 1.0).unwrap()).unwrap()
}

fn haar_ab(v: [f64; 4]) -> (Complex64, Complex64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (Complex64::new(v[0] / n, v[1] / n), Complex64::new(v[2] / n, v[3] / n))
}

fn ab() -> impl Strategy<Value = (Complex64, Complex64)> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(haar_ab)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_invariants((a, b) in ab(), n in 0usize..30, seed in any::<u64>(), t in -100.0f64..100.0) {
        let cfg = config(n, seed, a, b);
        let r = overlap_r(&cfg, t);
        prop_assert!(r.norm() <= 1.0 + 1e-12);
        prop_assert!((overlap_r(&cfg, -t) - r.conj()).norm() < 1e-12);
        prop_assert!((overlap_r_norm_sqr(&cfg, t) - r.norm_sqr()).abs() < 1e-12);
        prop_assert!((overlap_r(&cfg, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reduced_state_is_physical((a, b) in ab(), n in 0usize..30, seed in any::<u64>(), t in 0.0f64..100.0) {
        let cfg = config(n, seed, a, b);
        let rho = reduced_state(&cfg, t);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
        prop_assert!(rho.is_physical(1e-12));
        let p = purity(&cfg, t);
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!((p - rho.purity()).abs() < 1e-12);
    }

    #[test]
    fn identity_env_reduces_to_system_only(
        (a, b) in ab(), n in 0usize..16, seed in any::<u64>(), t in 0.0f64..50.0,
        d0 in -1.0f64..1.0, d1 in -1.0f64..1.0, re in -1.0f64..1.0, im in -1.0f64..1.0,
    ) {
        let cfg = config(n, seed, a, b);
        let s = HermitianBlock2::new(d0, d1, Complex64::new(re, im));
        let full = ObservableSpec::full(s, vec![HermitianBlock2::identity(); n]);
        let lhs = expectation_full(&cfg, &full, t).unwrap();
        prop_assert!((lhs - expectation_s0(&cfg, &s, t)).abs() < 1e-12);
        prop_assert!((gamma1(&cfg, &full, t).unwrap() - overlap_r(&cfg, t)).norm() < 1e-12);
        prop_assert!((gamma0(&cfg, &full, t).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn interaction_energy_is_conserved((a, b) in ab(), n in 1usize..12, seed in any::<u64>()) {
        let cfg = config(n, seed, a, b);
        let e0 = interaction_energy(&cfg, 0.0).unwrap();
        for k in 1..40 {
            let e = interaction_energy(&cfg, k as f64 * 2.7).unwrap();
            prop_assert!((e - e0).abs() < 1e-10, "{e} vs {e0}");
        }
    }
}

#[test]
fn overlap_examples() {
    let h = FRAC_1_SQRT_2;
    let s = EnvSpin::new(Complex64::new(h, 0.0), Complex64::new(h, 0.0), 1.0);
    let cfg = SpinBathConfig::with_unit_hbar(Complex64::new(h, 0.0), Complex64::new(h, 0.0), vec![s]).unwrap();
    // r = cos(t), so |r(π/4)|² = 1/2.
    assert!((overlap_r(&cfg, PI / 4.0).norm_sqr() - 0.5).abs() < 1e-15);
    let empty = config(0, 0, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    assert_eq!(overlap_r(&empty, 17.0), Complex64::new(1.0, 0.0));
    let mut frozen = config(5, 3, Complex64::new(h, 0.0), Complex64::new(h, 0.0));
    frozen.spins.iter_mut().for_each(|s| s.g = 0.0);
    assert!((overlap_r(&frozen, 4.2) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
}

#[test]
fn commensurate_couplings_recur() {
    let mut cfg = config(12, 5, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    for (i, s) in cfg.spins.iter_mut().enumerate() {
        s.g = 0.25 * (1 + i % 5) as f64;
    }
    let period = 2.0 * PI / 0.25;
    for t in [0.3, 1.7, 5.0] {
        assert!((overlap_r(&cfg, t + period) - overlap_r(&cfg, t)).norm() < 1e-12);
        assert!((overlap_r(&cfg, t + 3.0 * period) - overlap_r(&cfg, t)).norm() < 1e-12);
    }
}

#[test]
fn gamma_coincide_at_zero() {
    let cfg = config(6, 9, Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0));
    let env: Vec<_> = (0..6)
        .map(|i| HermitianBlock2::new(0.3 + 0.1 * i as f64, -0.4, Complex64::new(0.2, -0.1 * i as f64)))
        .collect();
    let obs = ObservableSpec::full(HermitianBlock2::pauli_x(), env.clone());
    let g1 = gamma1(&cfg, &obs, 0.0).unwrap();
    let g0 = gamma0(&cfg, &obs, 0.0).unwrap();
    let product: f64 = cfg
        .spins
        .iter()
        .zip(&env)
        .map(|(s, e)| s.p_up() * e.d0 + s.p_down() * e.d1 + 2.0 * (s.alpha.conj() * s.beta * e.off).re)
        .product();
    assert!((g1 - g0).norm() < 1e-14);
    assert!((g0.re - product).abs() < 1e-14);
}

#[test]
fn system_only_examples() {
    let h = FRAC_1_SQRT_2;
    let cfg = config(7, 2, Complex64::new(h, 0.0), Complex64::new(h, 0.0));
    // sigma_x at t = 0 with a = b = 1/√2 is 1: the interference term carries a factor 2.
    assert!((expectation_s0(&cfg, &HermitianBlock2::pauli_x(), 0.0) - 1.0).abs() < 1e-14);
    let z = HermitianBlock2::pauli_z();
    let pop = config(7, 2, Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0));
    for t in [0.0, 3.0, 30.0] {
        assert!((expectation_s0(&pop, &z, t) - (0.36 - 0.64)).abs() < 1e-14);
    }
    let b0 = config(7, 2, Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0));
    let s = HermitianBlock2::new(0.7, -0.2, Complex64::new(0.5, 0.5));
    assert!((expectation_s0(&b0, &s, 12.0) - 0.7).abs() < 1e-14);
}

#[test]
fn single_env_spin_is_periodic_and_averages_out() {
    let cfg = config(9, 4, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    let j = 3;
    let g = cfg.spins[j].g;
    let e = HermitianBlock2::new(0.4, -0.9, Complex64::new(0.3, 0.6));
    let period = 2.0 * PI * cfg.hbar / g;
    // Trapezoid over one period of a trigonometric polynomial is exact.
    let n = 64;
    let mean = (0..n)
        .map(|k| expectation_single_env(&cfg, j, &e, k as f64 * period / n as f64).unwrap())
        .sum::<f64>()
        / n as f64;
    let s = &cfg.spins[j];
    assert!((mean - (s.p_up() * e.d0 + s.p_down() * e.d1)).abs() < 1e-13);
    for t in [0.1, 2.0, 7.7] {
        let v = expectation_single_env(&cfg, j, &e, t).unwrap();
        assert!((expectation_single_env(&cfg, j, &e, t + 50.0 * period).unwrap() - v).abs() < 1e-10);
    }
    let diag = HermitianBlock2::diagonal(0.4, -0.9);
    let c = s.p_up() * 0.4 - s.p_down() * 0.9;
    assert!((expectation_single_env(&cfg, j, &diag, 3.3).unwrap() - c).abs() < 1e-14);
    assert!(expectation_single_env(&cfg, 9, &e, 1.0).is_err());
}

#[test]
fn identity_observable_is_one() {
    let cfg = config(10, 8, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    for t in [0.0, 1.5, 40.0] {
        assert!((expectation(&cfg, &ObservableSpec::identity(10), t).unwrap() - 1.0).abs() < 1e-12);
        let sys = observable_system_only(HermitianBlock2::identity(), 10);
        assert!((expectation(&cfg, &sys, t).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn f32_agrees_with_f64() {
    let wide = config(8, 6, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    let narrow = SpinBathConfig::<f32>::with_unit_hbar(
        Complex32::new(0.6, 0.0),
        Complex32::new(0.0, 0.8),
        sample_environment(8, 6, 1.0f32).unwrap(),
    )
    .unwrap();
    for t in [0.0f32, 0.5, 3.0] {
        let d = overlap_r(&narrow, t) - {
            let r = overlap_r(&wide, t as f64);
            Complex32::new(r.re as f32, r.im as f32)
        };
        assert!(d.norm() < 1e-5, "{d}");
        assert!((purity(&narrow, t) as f64 - purity(&wide, t as f64)).abs() < 1e-5);
    }
}
