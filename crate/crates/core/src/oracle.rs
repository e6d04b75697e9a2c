//! Brute-force state-vector path for the spin-bath model.
//!
//! Amplitudes live in the `2^(N+1)` product basis, indexed as
//! `(system_bit << N) | env_bits`, where bit `i` of `env_bits` is 0 for
//! `|up>` and 1 for `|down>` on spin `i`. The coupling is diagonal in this
//! basis, so evolution is an exact per-amplitude phase. Nothing here uses
//! the conditional-environment closed forms of [`crate::analytic`].

use num_complex::Complex;
use thiserror::Error;

use crate::analytic::ReducedState2;
use crate::model::{HermitianBlock2, ObservableSpec, SpinBathConfig};
use crate::scalar::{cis, Amplitude, Real};

/// Largest environment the oracle will expand (about 34M amplitudes).
pub const MAX_ORACLE_ENV: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle capacity exceeded: N = {n_env} environment spins, limit is {limit}")]
    Capacity { n_env: usize, limit: usize },
    #[error("state has {state} environment spins but {other} has {expected}")]
    SizeMismatch { state: usize, other: &'static str, expected: usize },
}

/// Dense state vector of `S0 ⊗ E`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState<T: Real> {
    n_env: usize,
    amplitudes: Vec<Amplitude<T>>,
}

impl<T: Real> FullState<T> {
    pub fn n_env(&self) -> usize {
        self.n_env
    }

    pub fn amplitudes(&self) -> &[Amplitude<T>] {
        &self.amplitudes
    }

    /// Amplitude of `|system_bit> ⊗ |env_bits>`.
    pub fn amplitude(&self, system_bit: usize, env_bits: usize) -> Amplitude<T> {
        self.amplitudes[(system_bit << self.n_env) | env_bits]
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn check_capacity(n_env: usize) -> Result<(), OracleError> {
    if n_env > MAX_ORACLE_ENV {
        return Err(OracleError::Capacity { n_env, limit: MAX_ORACLE_ENV });
    }
    Ok(())
}

/// Tensor-product expansion of the initial product state.
pub fn build_initial<T: Real>(config: &SpinBathConfig<T>) -> Result<FullState<T>, OracleError> {
    let n = config.n_env();
    check_capacity(n)?;
    // Environment product built by doubling: after spin i the first 2^(i+1)
    // entries hold the amplitudes over spins 0..=i.
    let mut env = vec![Complex::new(T::zero(), T::zero()); 1 << n];
    env[0] = Complex::new(T::one(), T::zero());
    for (i, s) in config.spins.iter().enumerate() {
        let half = 1usize << i;
        for x in 0..half {
            let v = env[x];
            env[x] = v * s.alpha;
            env[x | half] = v * s.beta;
        }
    }
    let mut amplitudes = Vec::with_capacity(2 << n);
    amplitudes.extend(env.iter().map(|&e| config.a * e));
    amplitudes.extend(env.iter().map(|&e| config.b * e));
    Ok(FullState { n_env: n, amplitudes })
}

/// `m(bits) = Σ_i g_i σ_i` with `σ_i = +1` for up and `-1` for down.
fn coupling_table<T: Real>(config: &SpinBathConfig<T>) -> Vec<T> {
    let n = config.n_env();
    let mut m = vec![T::zero(); 1 << n];
    for (i, s) in config.spins.iter().enumerate() {
        let half = 1usize << i;
        for x in 0..half {
            let base = m[x];
            m[x] = base + s.g;
            m[x | half] = base - s.g;
        }
    }
    m
}

/// Evolves by `t`: system bit 0 picks up `e^{+i t m / 2ħ}`, bit 1 picks up
/// `e^{-i t m / 2ħ}`.
pub fn evolve<T: Real>(
    state: &FullState<T>,
    config: &SpinBathConfig<T>,
    t: T,
) -> Result<FullState<T>, OracleError> {
    if state.n_env != config.n_env() {
        return Err(OracleError::SizeMismatch {
            state: state.n_env,
            other: "configuration",
            expected: config.n_env(),
        });
    }
    let m = coupling_table(config);
    let dim_env = m.len();
    let scale = t / (T::lit(2.0) * config.hbar);
    let mut amplitudes = state.amplitudes.clone();
    for (x, &mx) in m.iter().enumerate() {
        let ph = cis(mx * scale);
        amplitudes[x] = amplitudes[x] * ph;
        amplitudes[dim_env | x] = amplitudes[dim_env | x] * ph.conj();
    }
    Ok(FullState { n_env: state.n_env, amplitudes })
}

/// Applies a 2x2 block to qubit `bit` of every basis pair, in place.
/// Qubit ordering: env spin `i` is bit `i`, the system is bit `N`.
fn apply_block<T: Real>(amps: &mut [Amplitude<T>], bit: usize, block: &HermitianBlock2<T>) {
    let stride = 1usize << bit;
    for base in (0..amps.len()).step_by(stride << 1) {
        for x in base..base + stride {
            let out = block.apply([amps[x], amps[x | stride]]);
            amps[x] = out[0];
            amps[x | stride] = out[1];
        }
    }
}

/// `<ψ| O |ψ>` as a complex number; its imaginary part is rounding noise
/// for Hermitian `O`.
pub fn expectation_complex<T: Real>(
    state: &FullState<T>,
    obs: &ObservableSpec<T>,
) -> Result<Amplitude<T>, OracleError> {
    if obs.env.len() != state.n_env {
        return Err(OracleError::SizeMismatch {
            state: state.n_env,
            other: "observable",
            expected: obs.env.len(),
        });
    }
    let mut o_psi = state.amplitudes.clone();
    for (i, e) in obs.env.iter().enumerate() {
        if !e.is_identity() {
            apply_block(&mut o_psi, i, e);
        }
    }
    apply_block(&mut o_psi, state.n_env, &obs.system);
    Ok(state
        .amplitudes
        .iter()
        .zip(&o_psi)
        .map(|(p, q)| p.conj() * q)
        .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z))
}

/// Real part of [`expectation_complex`].
pub fn expectation<T: Real>(state: &FullState<T>, obs: &ObservableSpec<T>) -> Result<T, OracleError> {
    expectation_complex(state, obs).map(|z| z.re)
}

/// Reduced density matrix of `S0` by summing over environment bit strings.
pub fn partial_trace<T: Real>(state: &FullState<T>) -> ReducedState2<T> {
    let dim_env = 1usize << state.n_env;
    let (lower, upper) = state.amplitudes.split_at(dim_env);
    let mut p0 = T::zero();
    let mut p1 = T::zero();
    let mut coh = Complex::new(T::zero(), T::zero());
    for (u, v) in lower.iter().zip(upper) {
        p0 += u.norm_sqr();
        p1 += v.norm_sqr();
        coh = coh + u * v.conj();
    }
    ReducedState2 { p0, p1, coh }
}

/// `<E1(t)|E0(t)>` read off the evolved state for `a = b = 1/√2`
/// initial amplitudes: `2 * rho_01`. Independent of the product formula.
pub fn overlap_from_state<T: Real>(config: &SpinBathConfig<T>, t: T) -> Result<Amplitude<T>, OracleError> {
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut probe = config.clone();
    probe.a = Complex::new(h, T::zero());
    probe.b = Complex::new(h, T::zero());
    let psi = evolve(&build_initial(&probe)?, &probe, t)?;
    Ok(partial_trace(&psi).coh.scale(T::lit(2.0)))
}
