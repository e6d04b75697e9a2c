//! Exact time evolution of the spin-bath model.
//!
//! With `E0(t) = ⊗_i (alpha_i e^{i g_i t/2ħ}|up> + beta_i e^{-i g_i t/2ħ}|down>)`
//! and `E1(t) = E0(-t)`, the evolved state is `a|0>E0(t) + b|1>E1(t)`. Every
//! quantity below is a product of per-spin factors of these conditional
//! environment states, evaluated in one fused pass per time point.
//!
//! The pointer basis is `{|0>, |1>}` for all `t`: the system has no
//! self-Hamiltonian, so the moving pointer basis does not move.

use num_complex::Complex;
use thiserror::Error;

use crate::model::{
    EnvSpin, HermitianBlock2, ModelError, ObservableKind, ObservableSpec, SpinBathConfig,
    TimeGrid,
};
use crate::scalar::{cis, Amplitude, ProductAccumulator, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("observable has {got} environment blocks, configuration has {expected} spins")]
    EnvLengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reduced density matrix of `S0` in the pointer basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState2<T: Real> {
    pub p0: T,
    pub p1: T,
    /// Entry (0,1).
    pub coh: Amplitude<T>,
}

impl<T: Real> ReducedState2<T> {
    /// `Tr rho^2 = p0^2 + p1^2 + 2|coh|^2`.
    pub fn purity(&self) -> T {
        self.p0 * self.p0 + self.p1 * self.p1 + T::lit(2.0) * self.coh.norm_sqr()
    }

    pub fn trace(&self) -> T {
        self.p0 + self.p1
    }

    /// Checks unit trace, populations in `[0, 1]` and `|coh|^2 <= p0 p1`.
    pub fn is_physical(&self, tol: T) -> bool {
        let in_unit = |p: T| p >= -tol && p <= T::one() + tol;
        in_unit(self.p0)
            && in_unit(self.p1)
            && (self.trace() - T::one()).abs() <= tol
            && self.coh.norm_sqr() <= self.p0 * self.p1 + tol
    }
}

/// Sampled complex values on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries<T: Real> {
    pub grid: TimeGrid<T>,
    pub values: Vec<Amplitude<T>>,
}

/// Sampled real values on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealSeries<T: Real> {
    pub grid: TimeGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> RealSeries<T> {
    /// Samples `f` at every grid point. Points are independent, so the
    /// parallel evaluation is bit-identical to a serial loop.
    pub fn sample<F>(grid: TimeGrid<T>, f: F) -> Self
    where
        F: Fn(T) -> T + Sync,
    {
        use rayon::prelude::*;
        let values = (0..grid.n_points()).into_par_iter().map(|k| f(grid.time(k))).collect();
        Self { grid, values }
    }

    pub fn try_sample<F, E>(grid: TimeGrid<T>, f: F) -> Result<Self, E>
    where
        F: Fn(T) -> Result<T, E> + Sync,
        E: Send,
    {
        use rayon::prelude::*;
        let values = (0..grid.n_points())
            .into_par_iter()
            .map(|k| f(grid.time(k)))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Self { grid, values })
    }

    pub fn times(&self) -> Vec<T> {
        self.grid.times().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Real> ComplexSeries<T> {
    pub fn sample<F>(grid: TimeGrid<T>, f: F) -> Self
    where
        F: Fn(T) -> Amplitude<T> + Sync,
    {
        use rayon::prelude::*;
        let values = (0..grid.n_points()).into_par_iter().map(|k| f(grid.time(k))).collect();
        Self { grid, values }
    }

    pub fn try_sample<F, E>(grid: TimeGrid<T>, f: F) -> Result<Self, E>
    where
        F: Fn(T) -> Result<Amplitude<T>, E> + Sync,
        E: Send,
    {
        use rayon::prelude::*;
        let values = (0..grid.n_points())
            .into_par_iter()
            .map(|k| f(grid.time(k)))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Self { grid, values })
    }

    /// Pointwise modulus.
    pub fn abs(&self) -> RealSeries<T> {
        RealSeries { grid: self.grid, values: self.values.iter().map(|z| z.norm()).collect() }
    }
}

fn check_len<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
) -> Result<(), AnalyticError> {
    if obs.env.len() != config.n_env() {
        return Err(AnalyticError::EnvLengthMismatch {
            expected: config.n_env(),
            got: obs.env.len(),
        });
    }
    Ok(())
}

/// Phase `g t / ħ` picked up between the up and down branches of one spin.
#[inline]
fn spin_phase<T: Real>(spin: &EnvSpin<T>, t: T, hbar: T) -> Amplitude<T> {
    cis(spin.g * t / hbar)
}

/// Decoherence factor `r(t) = <E1(t)|E0(t)> = ∏ (|alpha|^2 e^{igt/ħ} + |beta|^2 e^{-igt/ħ})`.
pub fn overlap_r<T: Real>(config: &SpinBathConfig<T>, t: T) -> Amplitude<T> {
    let mut acc = ProductAccumulator::new(config.n_env());
    for s in &config.spins {
        let e = spin_phase(s, t, config.hbar);
        acc.push(e.scale(s.p_up()) + e.conj().scale(s.p_down()));
    }
    acc.finish()
}

/// `|r(t)|^2 = ∏ (|alpha|^4 + |beta|^4 + 2|alpha|^2|beta|^2 cos(2 g t/ħ))`,
/// evaluated independently of [`overlap_r`].
pub fn overlap_r_norm_sqr<T: Real>(config: &SpinBathConfig<T>, t: T) -> T {
    let two = T::lit(2.0);
    let mut log_sum = T::zero();
    let mut prod = T::one();
    let log_mode = config.n_env() > crate::scalar::LOG_PRODUCT_THRESHOLD;
    for s in &config.spins {
        let (pu, pd) = (s.p_up(), s.p_down());
        let f = pu * pu + pd * pd + two * pu * pd * (two * s.g * t / config.hbar).cos();
        if log_mode {
            if f <= T::zero() {
                return T::zero();
            }
            log_sum += f.ln();
        } else {
            prod *= f;
        }
    }
    if log_mode {
        log_sum.exp()
    } else {
        prod
    }
}

/// Per-spin factor of `<E0(t)| e |E0(t)>`:
/// `|alpha|^2 e_uu + |beta|^2 e_dd + 2 Re[conj(alpha) beta e_ud e^{-igt/ħ}]`.
#[inline]
fn diag_branch_factor<T: Real>(s: &EnvSpin<T>, e: &HermitianBlock2<T>, phase: Amplitude<T>) -> T {
    let cross = s.alpha.conj() * s.beta * e.off * phase.conj();
    s.p_up() * e.d0 + s.p_down() * e.d1 + T::lit(2.0) * cross.re
}

/// `Γ0(t) = <E0(t)| ⊗ e_i |E0(t)>`; real for Hermitian blocks.
pub fn gamma0<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
    t: T,
) -> Result<Amplitude<T>, AnalyticError> {
    check_len(config, obs)?;
    let mut acc = ProductAccumulator::new(config.n_env());
    for (s, e) in config.spins.iter().zip(&obs.env) {
        let f = diag_branch_factor(s, e, spin_phase(s, t, config.hbar));
        acc.push(Complex::new(f, T::zero()));
    }
    Ok(acc.finish())
}

/// `Γ1(t) = <E1(t)| ⊗ e_i |E0(t)>`, with per-spin factor
/// `|alpha|^2 e_uu e^{igt/ħ} + |beta|^2 e_dd e^{-igt/ħ} + 2 Re[conj(alpha) beta e_ud]`.
pub fn gamma1<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
    t: T,
) -> Result<Amplitude<T>, AnalyticError> {
    check_len(config, obs)?;
    let two = T::lit(2.0);
    let mut acc = ProductAccumulator::new(config.n_env());
    for (s, e) in config.spins.iter().zip(&obs.env) {
        let ph = spin_phase(s, t, config.hbar);
        let cross = (s.alpha.conj() * s.beta * e.off).re * two;
        let f = ph.scale(s.p_up() * e.d0) + ph.conj().scale(s.p_down() * e.d1)
            + Complex::new(cross, T::zero());
        acc.push(f);
    }
    Ok(acc.finish())
}

/// `<ψ(t)| O |ψ(t)>` for a product observable:
/// `|a|^2 s00 Γ0(t) + |b|^2 s11 Γ0(-t) + 2 Re[a conj(b) s10 Γ1(t)]`.
///
/// The `|b|^2` branch sees `E1(t) = E0(-t)`, hence `Γ0(-t)`; the two
/// coincide only when every `conj(alpha) beta e_ud` is real.
pub fn expectation_full<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
    t: T,
) -> Result<T, AnalyticError> {
    let g0_plus = gamma0(config, obs, t)?.re;
    let g0_minus = gamma0(config, obs, -t)?.re;
    let g1 = gamma1(config, obs, t)?;
    let s = &obs.system;
    let s10 = s.off.conj();
    let interference = config.a * config.b.conj() * s10 * g1;
    Ok(config.p0() * s.d0 * g0_plus + config.p1() * s.d1 * g0_minus
        + T::lit(2.0) * interference.re)
}

/// Expectation of `s ⊗ I`: `|a|^2 s00 + |b|^2 s11 + 2 Re[a conj(b) s10 r(t)]`.
pub fn expectation_s0<T: Real>(config: &SpinBathConfig<T>, s: &HermitianBlock2<T>, t: T) -> T {
    let r = overlap_r(config, t);
    let interference = config.a * config.b.conj() * s.off.conj() * r;
    config.p0() * s.d0 + config.p1() * s.d1 + T::lit(2.0) * interference.re
}

/// Expectation of `I ⊗ e` on environment spin `j`. Periodic in `t` with
/// period `2πħ/g_j`.
pub fn expectation_single_env<T: Real>(
    config: &SpinBathConfig<T>,
    j: usize,
    e: &HermitianBlock2<T>,
    t: T,
) -> Result<T, AnalyticError> {
    let s = config.spins.get(j).ok_or(ModelError::SpinIndexOutOfRange {
        index: j,
        n: config.n_env(),
    })?;
    let ph = spin_phase(s, t, config.hbar);
    Ok(config.p0() * diag_branch_factor(s, e, ph) + config.p1() * diag_branch_factor(s, e, ph.conj()))
}

/// Dispatches on [`ObservableKind`] to the matching closed form.
pub fn expectation<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
    t: T,
) -> Result<T, AnalyticError> {
    check_len(config, obs)?;
    match obs.kind {
        ObservableKind::Full => expectation_full(config, obs, t),
        ObservableKind::SystemOnly => Ok(expectation_s0(config, &obs.system, t)),
        ObservableKind::SingleEnvSpin(j) => expectation_single_env(config, j, &obs.env[j], t),
    }
}

/// `rho_S(t)`: populations `|a|^2`, `|b|^2`, coherence `a conj(b) r(t)`.
pub fn reduced_state<T: Real>(config: &SpinBathConfig<T>, t: T) -> ReducedState2<T> {
    ReducedState2 {
        p0: config.p0(),
        p1: config.p1(),
        coh: config.a * config.b.conj() * overlap_r(config, t),
    }
}

/// `Tr rho_S^2 = |a|^4 + |b|^4 + 2|a|^2|b|^2|r(t)|^2`, in `[1/2, 1]`.
pub fn purity<T: Real>(config: &SpinBathConfig<T>, t: T) -> T {
    let (p0, p1) = (config.p0(), config.p1());
    p0 * p0 + p1 * p1 + T::lit(2.0) * p0 * p1 * overlap_r_norm_sqr(config, t)
}

/// `⟨H_SE⟩` as the sum of its `N` product terms
/// `diag(1/2, -1/2) ⊗ diag(g_i, -g_i)`.
pub fn interaction_energy<T: Real>(config: &SpinBathConfig<T>, t: T) -> Result<T, AnalyticError> {
    let half = T::lit(0.5);
    let system = HermitianBlock2::diagonal(half, -half);
    let n = config.n_env();
    let mut total = T::zero();
    for (i, s) in config.spins.iter().enumerate() {
        let mut env = vec![HermitianBlock2::identity(); n];
        env[i] = HermitianBlock2::diagonal(s.g, -s.g);
        total += expectation_full(config, &ObservableSpec::full(system, env), t)?;
    }
    Ok(total)
}

/// Series of `r(t)` on a grid.
pub fn overlap_series<T: Real>(config: &SpinBathConfig<T>, grid: TimeGrid<T>) -> ComplexSeries<T> {
    ComplexSeries::sample(grid, |t| overlap_r(config, t))
}

/// Series of `Γ1(t)` on a grid.
pub fn gamma1_series<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
    grid: TimeGrid<T>,
) -> Result<ComplexSeries<T>, AnalyticError> {
    ComplexSeries::try_sample(grid, |t| gamma1(config, obs, t))
}

/// Series of `<O>(t)` on a grid, dispatching on the observable kind.
pub fn expectation_series<T: Real>(
    config: &SpinBathConfig<T>,
    obs: &ObservableSpec<T>,
    grid: TimeGrid<T>,
) -> Result<RealSeries<T>, AnalyticError> {
    RealSeries::try_sample(grid, |t| expectation(config, obs, t))
}

/// Series of `Tr rho_S^2` on a grid.
pub fn purity_series<T: Real>(config: &SpinBathConfig<T>, grid: TimeGrid<T>) -> RealSeries<T> {
    RealSeries::sample(grid, |t| purity(config, t))
}
