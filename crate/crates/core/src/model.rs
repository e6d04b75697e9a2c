//! Spin-bath domain types, validation, observable selection and seeded
//! sampling of environments.
//!
//! The composite system is a two-level system `S0` (states `|0>`, `|1>`)
//! coupled to `N` environment spins (states `|up>`, `|down>`). Initial
//! states are product states `(a|0> + b|1>) ⊗_i (alpha_i|up> + beta_i|down>)`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::{is_finite_c, Amplitude, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("g_max must be positive, got {0}")]
    NonPositiveGMax(f64),
    #[error("environment spin index {index} out of range for N = {n}")]
    SpinIndexOutOfRange { index: usize, n: usize },
    #[error("time grid: {0}")]
    Grid(String),
}

/// One failed invariant of a [`SpinBathConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { field: String },
    SystemNorm { norm: f64 },
    SpinNorm { index: usize, norm: f64 },
    NonFiniteCoupling { index: usize },
    NonPositiveHbar { hbar: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "{field}: non-finite amplitude"),
            Violation::SystemNorm { norm } => {
                write!(f, "a, b: |a|^2 + |b|^2 = {norm}, expected 1")
            }
            Violation::SpinNorm { index, norm } => write!(
                f,
                "spins[{index}]: |alpha|^2 + |beta|^2 = {norm}, expected 1"
            ),
            Violation::NonFiniteCoupling { index } => write!(f, "spins[{index}].g: non-finite"),
            Violation::NonPositiveHbar { hbar } => write!(f, "hbar: must be positive, got {hbar}"),
        }
    }
}

/// 2x2 Hermitian matrix stored as two real diagonal entries and the (0,1)
/// entry. The (1,0) entry is the conjugate of `off`.
///
/// For the system factor the basis order is `(|0>, |1>)`, so `off` is
/// `s01` and `s10 = conj(off)`. For an environment factor the order is
/// `(|up>, |down>)` and `off` is the coefficient of `|up><down|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianBlock2<T: Real> {
    pub d0: T,
    pub d1: T,
    pub off: Amplitude<T>,
}

impl<T: Real> HermitianBlock2<T> {
    pub fn new(d0: T, d1: T, off: Amplitude<T>) -> Self {
        Self { d0, d1, off }
    }

    pub fn identity() -> Self {
        Self::diagonal(T::one(), T::one())
    }

    pub fn diagonal(d0: T, d1: T) -> Self {
        Self::new(d0, d1, Complex::new(T::zero(), T::zero()))
    }

    /// `diag(1, -1)`.
    pub fn pauli_z() -> Self {
        Self::diagonal(T::one(), -T::one())
    }

    pub fn pauli_x() -> Self {
        Self::new(T::zero(), T::zero(), Complex::new(T::one(), T::zero()))
    }

    pub fn is_identity(&self) -> bool {
        self.d0 == T::one() && self.d1 == T::one() && self.off == Complex::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.d0.is_finite() && self.d1.is_finite() && is_finite_c(self.off)
    }

    /// Entry `(row, col)` with `row, col ∈ {0, 1}`.
    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> Amplitude<T> {
        match (row, col) {
            (0, 0) => Complex::new(self.d0, T::zero()),
            (1, 1) => Complex::new(self.d1, T::zero()),
            (0, 1) => self.off,
            (1, 0) => self.off.conj(),
            _ => panic!("HermitianBlock2 index out of range: ({row}, {col})"),
        }
    }

    /// Matrix-vector product on a two-component column.
    #[inline]
    pub fn apply(&self, v: [Amplitude<T>; 2]) -> [Amplitude<T>; 2] {
        [
            v[0].scale(self.d0) + self.off * v[1],
            self.off.conj() * v[0] + v[1].scale(self.d1),
        ]
    }

    /// `<v| M |v>` for a two-component vector; real for Hermitian `M`.
    #[inline]
    pub fn quadratic_form(&self, v: [Amplitude<T>; 2]) -> T {
        let mv = self.apply(v);
        (v[0].conj() * mv[0] + v[1].conj() * mv[1]).re
    }
}

/// One environment spin `alpha|up> + beta|down>` with coupling `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpin<T: Real> {
    pub alpha: Amplitude<T>,
    pub beta: Amplitude<T>,
    pub g: T,
}

impl<T: Real> EnvSpin<T> {
    pub fn new(alpha: Amplitude<T>, beta: Amplitude<T>, g: T) -> Self {
        Self { alpha, beta, g }
    }

    /// `|alpha|^2`.
    #[inline]
    pub fn p_up(&self) -> T {
        self.alpha.norm_sqr()
    }

    /// `|beta|^2`.
    #[inline]
    pub fn p_down(&self) -> T {
        self.beta.norm_sqr()
    }
}

/// Closed system: system amplitudes, environment spins and `hbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBathConfig<T: Real> {
    pub a: Amplitude<T>,
    pub b: Amplitude<T>,
    pub spins: Vec<EnvSpin<T>>,
    pub hbar: T,
}

impl<T: Real> SpinBathConfig<T> {
    /// Validated constructor. Configurations that fail normalization are
    /// rejected, never renormalized.
    pub fn new(
        a: Amplitude<T>,
        b: Amplitude<T>,
        spins: Vec<EnvSpin<T>>,
        hbar: T,
    ) -> Result<Self, ModelError> {
        let cfg = Self { a, b, spins, hbar };
        let violations = validate(&cfg);
        if violations.is_empty() {
            Ok(cfg)
        } else {
            let msg = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            Err(ModelError::Invalid(msg))
        }
    }

    /// Builds a configuration with `hbar = 1`.
    pub fn with_unit_hbar(
        a: Amplitude<T>,
        b: Amplitude<T>,
        spins: Vec<EnvSpin<T>>,
    ) -> Result<Self, ModelError> {
        Self::new(a, b, spins, T::one())
    }

    pub fn n_env(&self) -> usize {
        self.spins.len()
    }

    /// `|a|^2`.
    pub fn p0(&self) -> T {
        self.a.norm_sqr()
    }

    /// `|b|^2`.
    pub fn p1(&self) -> T {
        self.b.norm_sqr()
    }
}

/// Lists every violated invariant; empty iff the configuration is valid.
pub fn validate<T: Real>(config: &SpinBathConfig<T>) -> Vec<Violation> {
    let tol = T::norm_tolerance();
    let mut out = Vec::new();
    let mut finite = true;
    for (name, z) in [("a", config.a), ("b", config.b)] {
        if !is_finite_c(z) {
            out.push(Violation::NonFinite { field: name.to_string() });
            finite = false;
        }
    }
    if finite {
        let norm = config.a.norm_sqr() + config.b.norm_sqr();
        if (norm - T::one()).abs() > tol {
            out.push(Violation::SystemNorm { norm: norm.as_f64() });
        }
    }
    for (i, s) in config.spins.iter().enumerate() {
        let mut ok = true;
        for (name, z) in [("alpha", s.alpha), ("beta", s.beta)] {
            if !is_finite_c(z) {
                out.push(Violation::NonFinite { field: format!("spins[{i}].{name}") });
                ok = false;
            }
        }
        if ok {
            let norm = s.p_up() + s.p_down();
            if (norm - T::one()).abs() > tol {
                out.push(Violation::SpinNorm { index: i, norm: norm.as_f64() });
            }
        }
        if !s.g.is_finite() {
            out.push(Violation::NonFiniteCoupling { index: i });
        }
    }
    if !(config.hbar > T::zero()) || !config.hbar.is_finite() {
        out.push(Violation::NonPositiveHbar { hbar: config.hbar.as_f64() });
    }
    out
}

/// Draws `n` environment spins as a pure function of `(n, seed, g_max)`.
///
/// `(alpha, beta)` is Haar-uniform on the qubit state space (two complex
/// Gaussians, normalized); `g` is uniform on `(0, g_max]`.
pub fn sample_environment<T: Real>(
    n: usize,
    seed: u64,
    g_max: T,
) -> Result<Vec<EnvSpin<T>>, ModelError> {
    let g_max_f = g_max.as_f64();
    if !(g_max_f > 0.0) || !g_max_f.is_finite() {
        return Err(ModelError::NonPositiveGMax(g_max_f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spins = (0..n)
        .map(|_| {
            let mut z = [0.0f64; 4];
            for x in z.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            let alpha = Complex::new(T::lit(z[0] / norm), T::lit(z[1] / norm));
            let beta = Complex::new(T::lit(z[2] / norm), T::lit(z[3] / norm));
            // random::<f64>() is in [0, 1), so 1 - u is in (0, 1].
            let u: f64 = rng.random();
            EnvSpin::new(alpha, beta, T::lit(g_max_f * (1.0 - u)))
        })
        .collect();
    Ok(spins)
}

/// Uniform sampling grid on `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T: Real> {
    t_start: T,
    t_end: T,
    n_points: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_start: T, t_end: T, n_points: usize) -> Result<Self, ModelError> {
        if n_points < 2 {
            return Err(ModelError::Grid(format!("n_points must be >= 2, got {n_points}")));
        }
        if !t_start.is_finite() || !t_end.is_finite() || !(t_end > t_start) {
            return Err(ModelError::Grid(format!(
                "t_end ({t_end}) must be finite and greater than t_start ({t_start})"
            )));
        }
        Ok(Self { t_start, t_end, n_points })
    }

    pub fn t_start(&self) -> T {
        self.t_start
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn step(&self) -> T {
        (self.t_end - self.t_start) / T::from_usize_lossy(self.n_points - 1)
    }

    /// k-th sample. The last sample is exactly `t_end`.
    #[inline]
    pub fn time(&self, k: usize) -> T {
        if k + 1 == self.n_points {
            return self.t_end;
        }
        self.t_start + self.step() * T::from_usize_lossy(k)
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        (0..self.n_points).map(move |k| self.time(k))
    }
}

/// Which viewpoint an [`ObservableSpec`] encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    /// Generic product observable on the whole closed system.
    Full,
    /// Acts on `S0` only; identity on every environment spin.
    SystemOnly,
    /// Acts on environment spin `j` only.
    SingleEnvSpin(usize),
}

/// Product observable `S ⊗ E_1 ⊗ ... ⊗ E_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec<T: Real> {
    pub system: HermitianBlock2<T>,
    pub env: Vec<HermitianBlock2<T>>,
    pub kind: ObservableKind,
}

impl<T: Real> ObservableSpec<T> {
    pub fn full(system: HermitianBlock2<T>, env: Vec<HermitianBlock2<T>>) -> Self {
        Self { system, env, kind: ObservableKind::Full }
    }

    pub fn identity(n: usize) -> Self {
        Self::full(HermitianBlock2::identity(), vec![HermitianBlock2::identity(); n])
    }

    pub fn n_env(&self) -> usize {
        self.env.len()
    }

    /// True when `kind` agrees with the block contents.
    pub fn audit(&self) -> bool {
        match self.kind {
            ObservableKind::Full => true,
            ObservableKind::SystemOnly => self.env.iter().all(HermitianBlock2::is_identity),
            ObservableKind::SingleEnvSpin(j) => {
                j < self.env.len()
                    && self.system.is_identity()
                    && self
                        .env
                        .iter()
                        .enumerate()
                        .all(|(i, e)| i == j || e.is_identity())
            }
        }
    }
}

/// `s ⊗ I ⊗ ... ⊗ I` over `n` environment spins.
pub fn observable_system_only<T: Real>(s: HermitianBlock2<T>, n: usize) -> ObservableSpec<T> {
    ObservableSpec {
        system: s,
        env: vec![HermitianBlock2::identity(); n],
        kind: ObservableKind::SystemOnly,
    }
}

/// `I ⊗ ... ⊗ e (slot j) ⊗ ... ⊗ I` over `n` environment spins.
pub fn observable_single_env<T: Real>(
    j: usize,
    e: HermitianBlock2<T>,
    n: usize,
) -> Result<ObservableSpec<T>, ModelError> {
    if j >= n {
        return Err(ModelError::SpinIndexOutOfRange { index: j, n });
    }
    let mut env = vec![HermitianBlock2::identity(); n];
    env[j] = e;
    Ok(ObservableSpec {
        system: HermitianBlock2::identity(),
        env,
        kind: ObservableKind::SingleEnvSpin(j),
    })
}
