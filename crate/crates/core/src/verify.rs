//! Oracle-versus-analytic comparison over random `(config, observable, t)`
//! triples.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{self, AnalyticError};
use crate::model::{
    observable_single_env, observable_system_only, sample_environment, HermitianBlock2, ModelError,
    ObservableSpec, SpinBathConfig,
};
use crate::oracle::{self, OracleError};

/// Operations compared by [`run_verification`], in report order.
pub const OPERATIONS: [&str; 7] = [
    "expectation_full",
    "expectation_system_only",
    "expectation_single_env",
    "reduced_state",
    "overlap_r",
    "purity",
    "norm",
];

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One random instance.
#[derive(Debug, Clone)]
pub struct Triple {
    pub config: SpinBathConfig<f64>,
    pub observable: ObservableSpec<f64>,
    pub spin: usize,
    pub t: f64,
}

/// Max absolute deviation of one operation at one environment size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub operation: &'static str,
    pub n_env: usize,
    pub triples: usize,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub passed: bool,
}

fn haar_pair(rng: &mut ChaCha8Rng) -> (Complex<f64>, Complex<f64>) {
    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    (Complex::new(z[0] / norm, z[1] / norm), Complex::new(z[2] / norm, z[3] / norm))
}

/// Hermitian block with entries uniform on `[-1, 1]`.
pub fn random_block(rng: &mut ChaCha8Rng) -> HermitianBlock2<f64> {
    let mut u = || rng.random_range(-1.0..=1.0);
    HermitianBlock2::new(u(), u(), Complex::new(u(), u()))
}

/// Draws a triple: Haar system state, Haar environment with `g_max` in
/// `[0.5, 2]`, generic blocks, and `t` uniform on `[t_min, t_max]`.
pub fn random_triple(rng: &mut ChaCha8Rng, n_env: usize, t_min: f64, t_max: f64) -> Result<Triple, VerifyError> {
    let (a, b) = haar_pair(rng);
    let g_max = rng.random_range(0.5..=2.0);
    let spins = sample_environment(n_env, rng.random(), g_max)?;
    let hbar = rng.random_range(0.5..=2.0);
    let config = SpinBathConfig::new(a, b, spins, hbar)?;
    let system = random_block(rng);
    let env = (0..n_env).map(|_| random_block(rng)).collect();
    let spin = if n_env == 0 { 0 } else { rng.random_range(0..n_env) };
    let t = if t_max > t_min { rng.random_range(t_min..=t_max) } else { t_min };
    Ok(Triple { config, observable: ObservableSpec::full(system, env), spin, t })
}

/// Deviations of each entry of [`OPERATIONS`] for one triple.
pub fn deviations(tr: &Triple) -> Result<[f64; 7], VerifyError> {
    let cfg = &tr.config;
    let n = cfg.n_env();
    let psi = oracle::evolve(&oracle::build_initial(cfg)?, cfg, tr.t)?;
    let full = (analytic::expectation_full(cfg, &tr.observable, tr.t)? - oracle::expectation(&psi, &tr.observable)?).abs();
    let s_obs = observable_system_only(tr.observable.system, n);
    let system = (analytic::expectation(cfg, &s_obs, tr.t)? - oracle::expectation(&psi, &s_obs)?).abs();
    let single = if n == 0 {
        0.0
    } else {
        let e_obs = observable_single_env(tr.spin, tr.observable.env[tr.spin], n)?;
        (analytic::expectation(cfg, &e_obs, tr.t)? - oracle::expectation(&psi, &e_obs)?).abs()
    };
    let rho_a = analytic::reduced_state(cfg, tr.t);
    let rho_o = oracle::partial_trace(&psi);
    let reduced = (rho_a.p0 - rho_o.p0)
        .abs()
        .max((rho_a.p1 - rho_o.p1).abs())
        .max((rho_a.coh - rho_o.coh).norm());
    let overlap = (analytic::overlap_r(cfg, tr.t) - oracle::overlap_from_state(cfg, tr.t)?).norm();
    let purity = (analytic::purity(cfg, tr.t) - rho_o.purity()).abs();
    let norm = (psi.norm_sqr() - 1.0).abs();
    Ok([full, system, single, reduced, overlap, purity, norm])
}

/// Runs `triples` random instances per size in `sizes`. Deterministic in
/// `seed`; each size uses its own stream so the table does not depend on
/// the order of `sizes`.
pub fn run_verification(
    sizes: &[usize],
    triples: usize,
    seed: u64,
    t_range: (f64, f64),
    tolerance: f64,
) -> Result<VerifyReport, VerifyError> {
    let mut rows = Vec::new();
    for &n in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let batch = (0..triples)
            .map(|_| random_triple(&mut rng, n, t_range.0, t_range.1))
            .collect::<Result<Vec<_>, _>>()?;
        let devs = batch.par_iter().map(deviations).collect::<Result<Vec<_>, _>>()?;
        for (k, op) in OPERATIONS.iter().enumerate() {
            let max = devs.iter().map(|d| d[k]).fold(0.0, f64::max);
            rows.push(VerifyRow {
                operation: op,
                n_env: n,
                triples,
                max_abs_deviation: max,
                tolerance,
                passed: max < tolerance,
            });
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(VerifyReport { rows, passed })
}
