use decolab::analytic::{overlap_series, RealSeries};
use decolab::model::{sample_environment, SpinBathConfig, TimeGrid};
use decolab::timescales::{
    crossing_time, decoherence_time_from_relaxation, detect_two_stages, macroscopicity, pole_relaxation_time,
    spin_bath_report, two_times_report, two_times_series, TimeScale, TwoTimesScenario,
};
use num_complex::Complex64;

const HBAR_EV_S: f64 = 6.582e-16;

#[test]
fn pole_formula_magnitudes() {
    let micro = pole_relaxation_time(1.0, HBAR_EV_S).finite().unwrap();
    assert!((5e-16..=8e-16).contains(&micro));
    assert_eq!(micro, HBAR_EV_S);
    let macro_ = pole_relaxation_time(1e24 * 1.0, HBAR_EV_S).finite().unwrap();
    assert!((1e-40..1e-38).contains(&macro_), "{macro_}");
    assert!((macro_ / 6.582e-40 - 1.0).abs() < 1e-12);
    assert_eq!(pole_relaxation_time(0.0, HBAR_EV_S), TimeScale::Infinite);
}

#[test]
fn macroscopicity_examples() {
    assert_eq!(decoherence_time_from_relaxation(1.0, 1e-20).unwrap(), 1e-20);
    let m = macroscopicity::<f64>(1e-10, 1e-2).unwrap();
    assert!((m / 1e-16 - 1.0).abs() < 1e-12);
    let a = decoherence_time_from_relaxation(3.0, 2e-5).unwrap();
    assert_eq!(decoherence_time_from_relaxation(6.0, 2e-5).unwrap(), 2.0 * a);
}

#[test]
fn crossing_examples() {
    let grid = TimeGrid::new(0.0, 5.0, 501).unwrap();
    let decay = RealSeries::sample(grid, |t: f64| (-t).exp());
    let t = crossing_time(&decay, (-1.0f64).exp()).unwrap().finite().unwrap();
    assert!((t - 1.0).abs() <= grid.step() * (1.0 + 1e-9));
    let flat = RealSeries::sample(grid, |_| 2.0);
    assert_eq!(crossing_time(&flat, 0.5).unwrap(), TimeScale::NotReached);
}

fn haar_config(n: usize, seed: u64) -> SpinBathConfig<f64> {
    SpinBathConfig::with_unit_hbar(
        Complex64::new(0.6, 0.0),
        Complex64::new(0.8, 0.0),
        sample_environment(n, seed, 1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn decoherence_crossing_shrinks_with_n() {
    let grid = TimeGrid::new(0.0, 20.0, 4001).unwrap();
    let mean_crossing = |n: usize| {
        (0..20u64)
            .map(|seed| {
                let env = overlap_series(&haar_config(n, seed), grid).abs();
                crossing_time(&env, 0.01).unwrap().finite().expect("finite crossing")
            })
            .sum::<f64>()
            / 20.0
    };
    let (t20, t40) = (mean_crossing(20), mean_crossing(40));
    assert!(t40 < t20, "t20 {t20}, t40 {t40}");
}

#[test]
fn spin_bath_reports() {
    let grid = TimeGrid::new(0.0, 100.0, 2001).unwrap();
    let r = spin_bath_report(&haar_config(20, 1), grid, (-1.0f64).exp()).unwrap();
    assert!(r.t_ds.finite().is_some());
    assert!(r.t_rs.finite().is_some());
    assert!(r.t_ru.is_infinite());
    assert!(r.ordering_ok);

    let empty = spin_bath_report(&haar_config(0, 1), grid, 0.5).unwrap();
    assert_eq!(empty.t_ds, TimeScale::NotReached);
    assert!(empty.t_rs.is_infinite() && empty.t_ru.is_infinite());

    let mut frozen = haar_config(6, 2);
    frozen.spins.iter_mut().for_each(|s| s.g = 0.0);
    let r = spin_bath_report(&frozen, grid, 0.5).unwrap();
    assert_eq!(r.t_ds, TimeScale::NotReached);
    assert!(r.t_ru.is_infinite());
}

#[test]
fn two_stage_recovery() {
    let sc = TwoTimesScenario::<f64>::new(1.0, 1e-3, 1.0, 1.0, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 5000.0, 50_001).unwrap();
    let fit = detect_two_stages(&two_times_series(&sc, grid), 1.0).unwrap();
    let (t1, t2) = (fit.t_r1.finite().unwrap(), fit.t_r2.finite().unwrap());
    assert!((t1 - 1.0).abs() < 0.05, "{fit:?}");
    assert!((t2 / 1000.0 - 1.0).abs() < 0.05, "{fit:?}");
    assert!((t1 / t2 / 1e-3 - 1.0).abs() < 0.05);
    let report = two_times_report(&fit, Some(1e-3)).unwrap();
    assert!(report.ordering_ok);

    let flat = TwoTimesScenario::<f64>::new(1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
    let fit = detect_two_stages(&two_times_series(&flat, TimeGrid::new(0.0, 50.0, 5001).unwrap()), 1.0).unwrap();
    assert!(fit.t_r2.is_infinite());
    assert!((fit.t_r1.finite().unwrap() - 1.0).abs() < 0.05);

    let single = TwoTimesScenario::<f64>::new(0.5, 0.5, 1.0, 1.0, 1.0).unwrap();
    let fit = detect_two_stages(&two_times_series(&single, TimeGrid::new(0.0, 40.0, 4001).unwrap()), 1.0).unwrap();
    assert!(fit.single_stage);
    assert_eq!(fit.t_r1, fit.t_r2);
}

#[test]
fn recovery_across_ratios_and_weights() {
    // Grids spanning only 3/gamma_E still carry two decades in the fast stage.
    for ratio in [1e2, 1e3, 1e4] {
        for (a, b) in [(1.0, 1.0), (5.0, 1.0), (1.0, 5.0)] {
            let ge = 1.0 / ratio;
            let sc = TwoTimesScenario::<f64>::new(1.0, ge, a, b, 1.0).unwrap();
            let grid = TimeGrid::new(0.0, 3.0 / ge, 60_001).unwrap();
            let fit = detect_two_stages(&two_times_series(&sc, grid), 1.0).unwrap();
            assert!((fit.gamma_fast - 1.0).abs() < 0.05, "{ratio} {a} {b}: {fit:?}");
            assert!((fit.gamma_slow / ge - 1.0).abs() < 0.05, "{ratio} {a} {b}: {fit:?}");
        }
    }
}

#[test]
fn shallow_series_is_rejected() {
    let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
    let shallow = RealSeries::sample(grid, |t: f64| 1.0 + 0.5 * (-0.01 * t).exp());
    assert!(detect_two_stages(&shallow, 1.0).is_err());
}
