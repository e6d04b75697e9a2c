use decolab::analytic;
use decolab::model::{
    observable_single_env, observable_system_only, EnvSpin, HermitianBlock2, ObservableSpec, SpinBathConfig,
};
use decolab::oracle;
use num_complex::Complex64;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn unit_pair(v: [f64; 4]) -> (Complex64, Complex64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (Complex64::new(v[0] / n, v[1] / n), Complex64::new(v[2] / n, v[3] / n))
}

fn non_degenerate() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0).prop_filter("away from zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

fn block() -> impl Strategy<Value = HermitianBlock2<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(d0, d1, re, im)| HermitianBlock2::new(d0, d1, Complex64::new(re, im)))
}

#[derive(Debug, Clone)]
struct Case {
    config: SpinBathConfig<f64>,
    system: HermitianBlock2<f64>,
    env: Vec<HermitianBlock2<f64>>,
    spin: usize,
    t: f64,
}

fn case(n: usize) -> impl Strategy<Value = Case> {
    (
        non_degenerate(),
        prop::collection::vec((non_degenerate(), 0.0f64..2.0), n),
        0.5f64..2.0,
        block(),
        prop::collection::vec(block(), n),
        0..n,
        0.0f64..40.0,
    )
        .prop_map(|(ab, spins, hbar, system, env, spin, t)| {
            let (a, b) = unit_pair(ab);
            let spins = spins
                .into_iter()
                .map(|(v, g)| {
                    let (alpha, beta) = unit_pair(v);
                    EnvSpin::new(alpha, beta, g)
                })
                .collect();
            Case { config: SpinBathConfig::new(a, b, spins, hbar).unwrap(), system, env, spin, t }
        })
}

fn check(c: &Case) -> Result<(), TestCaseError> {
    let cfg = &c.config;
    let n = cfg.n_env();
    let psi = oracle::evolve(&oracle::build_initial(cfg).unwrap(), cfg, c.t).unwrap();
    prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);

    let full = ObservableSpec::full(c.system, c.env.clone());
    let d = analytic::expectation_full(cfg, &full, c.t).unwrap() - oracle::expectation(&psi, &full).unwrap();
    prop_assert!(d.abs() < TOL, "full: {d}");

    let sys = observable_system_only(c.system, n);
    let d = analytic::expectation(cfg, &sys, c.t).unwrap() - oracle::expectation(&psi, &sys).unwrap();
    prop_assert!(d.abs() < TOL, "system-only: {d}");

    let single = observable_single_env(c.spin, c.env[c.spin], n).unwrap();
    let d = analytic::expectation(cfg, &single, c.t).unwrap() - oracle::expectation(&psi, &single).unwrap();
    prop_assert!(d.abs() < TOL, "single-env: {d}");

    let rho_a = analytic::reduced_state(cfg, c.t);
    let rho_o = oracle::partial_trace(&psi);
    prop_assert!((rho_a.p0 - rho_o.p0).abs() < TOL);
    prop_assert!((rho_a.p1 - rho_o.p1).abs() < TOL);
    prop_assert!((rho_a.coh - rho_o.coh).norm() < TOL, "coherence {} vs {}", rho_a.coh, rho_o.coh);

    let r = analytic::overlap_r(cfg, c.t) - oracle::overlap_from_state(cfg, c.t).unwrap();
    prop_assert!(r.norm() < TOL, "overlap: {r}");
    prop_assert!((analytic::purity(cfg, c.t) - rho_o.purity()).abs() < TOL);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn n1(c in case(1)) { check(&c)?; }

    #[test]
    fn n2(c in case(2)) { check(&c)?; }

    #[test]
    fn n4(c in case(4)) { check(&c)?; }

    #[test]
    fn n8(c in case(8)) { check(&c)?; }

    #[test]
    fn n12(c in case(12)) { check(&c)?; }
}

// Dense reference written from the product form of the evolved state:
// a|0> ⊗_i (alpha_i e^{i g_i t/2ħ}|up> + beta_i e^{-i g_i t/2ħ}|down>)
//   + b|1> ⊗_i (same with t -> -t).

fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

fn kron_mat(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::new();
    for ra in a {
        for rb in b {
            out.push(ra.iter().flat_map(|x| rb.iter().map(move |y| x * y)).collect());
        }
    }
    out
}

fn dense(block: &HermitianBlock2<f64>) -> Vec<Vec<Complex64>> {
    vec![
        vec![Complex64::new(block.d0, 0.0), block.off],
        vec![block.off.conj(), Complex64::new(block.d1, 0.0)],
    ]
}

fn env_ket(cfg: &SpinBathConfig<f64>, t: f64) -> Vec<Complex64> {
    // Spin 0 is the most significant factor here.
    cfg.spins.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, s| {
        let ph = Complex64::from_polar(1.0, s.g * t / (2.0 * cfg.hbar));
        kron_vec(&acc, &[s.alpha * ph, s.beta * ph.conj()])
    })
}

fn dense_state(cfg: &SpinBathConfig<f64>, t: f64) -> Vec<Complex64> {
    let mut psi: Vec<Complex64> = env_ket(cfg, t).into_iter().map(|z| cfg.a * z).collect();
    psi.extend(env_ket(cfg, -t).into_iter().map(|z| cfg.b * z));
    psi
}

fn dense_expectation(psi: &[Complex64], system: &HermitianBlock2<f64>, env: &[HermitianBlock2<f64>]) -> Complex64 {
    let m = env.iter().fold(dense(system), |acc, e| kron_mat(&acc, &dense(e)));
    let mut total = Complex64::new(0.0, 0.0);
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            total += psi[i].conj() * x * psi[j];
        }
    }
    total
}

/// Maps the dense ordering (system, spin 0, ..., spin N-1; most significant
/// first) to the oracle ordering (system is bit N, spin i is bit i).
fn oracle_index(dense_index: usize, n: usize) -> usize {
    let sys = dense_index >> n;
    let mut env = 0;
    for i in 0..n {
        if dense_index >> (n - 1 - i) & 1 == 1 {
            env |= 1 << i;
        }
    }
    (sys << n) | env
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dense_reference_agrees(c in (1usize..=5).prop_flat_map(case)) {
        let cfg = &c.config;
        let n = cfg.n_env();
        let reference = dense_state(cfg, c.t);
        let psi = oracle::evolve(&oracle::build_initial(cfg).unwrap(), cfg, c.t).unwrap();
        for (k, z) in reference.iter().enumerate() {
            let w = psi.amplitudes()[oracle_index(k, n)];
            prop_assert!((z - w).norm() < 1e-13, "amplitude {k}: {z} vs {w}");
        }
        let expected = dense_expectation(&reference, &c.system, &c.env);
        prop_assert!(expected.im.abs() < 1e-12);
        let full = ObservableSpec::full(c.system, c.env.clone());
        let got = analytic::expectation_full(cfg, &full, c.t).unwrap();
        prop_assert!((got - expected.re).abs() < TOL, "{got} vs {}", expected.re);
    }
}

#[test]
fn two_spin_initial_amplitudes() {
    let (a, b) = (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    let s1 = EnvSpin::new(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0), 0.4);
    let s2 = EnvSpin::new(Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), 0.9);
    let cfg = SpinBathConfig::with_unit_hbar(a, b, vec![s1, s2]).unwrap();
    let psi = oracle::build_initial(&cfg).unwrap();
    for (sys, amp) in [(0, a), (1, b)] {
        for bits in 0..4usize {
            let f1 = if bits & 1 == 0 { s1.alpha } else { s1.beta };
            let f2 = if bits & 2 == 0 { s2.alpha } else { s2.beta };
            assert_eq!(psi.amplitude(sys, bits), amp * f1 * f2);
        }
    }
}

#[test]
fn capacity_is_enforced() {
    let spins = vec![EnvSpin::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 1.0); 25];
    let cfg = SpinBathConfig::with_unit_hbar(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), spins).unwrap();
    assert!(matches!(oracle::build_initial(&cfg), Err(oracle::OracleError::Capacity { .. })));
}
