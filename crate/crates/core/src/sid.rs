//! Closed-system engine: expectation values of van Hove observables on a
//! quasi-continuous energy grid.
//!
//! A state/observable pair is represented by its product kernel: a
//! diagonal weight `d(ω)` and an off-diagonal kernel `K(ω, ω')`, sampled on
//! a uniform grid `ω_k = k Δω`. The expectation value at time `t` is
//!
//! ```text
//! <O>(t) = Σ_k w_k d(ω_k) Δω + Σ_{k,l} w_k w_l K(ω_k, ω_l) e^{i(ω_k - ω_l)t/ħ} Δω²
//! ```
//!
//! with trapezoid weights `w`. For regular `K` the double sum dies out by
//! destructive interference and `<O>(t)` settles on the diagonal term.
//! On a discrete grid the sum is periodic in `t` with period `2πħ/Δω`, so
//! the decay only holds well before that revival time.

use num_complex::Complex;
use thiserror::Error;

use crate::analytic::RealSeries;
use crate::fit::LineFit;
use crate::model::TimeGrid;
use crate::scalar::{cis, Amplitude, Real};

/// Built-in kernels keep `center ± MASS_SIGMAS * spread` inside
/// `[0, omega_max]`, which leaves less than 1e-7 of the window mass outside.
pub const MASS_SIGMAS: f64 = 5.5;

/// Envelope values below this fraction of the initial value are treated
/// as quadrature round-off and excluded from decay fits.
pub const ENVELOPE_NOISE_FLOOR: f64 = 1e-9;

/// Largest RMS log-residual (nats) for which a decay counts as exponential.
pub const EXPONENTIAL_RESIDUAL_THRESHOLD: f64 = 0.01;

/// Tolerated mirror-revival contamination at the end of a fit window.
pub const REVIVAL_CONTAMINATION: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SidError {
    #[error("kernel: {0}")]
    InvalidKernel(String),
    #[error("off-diagonal kernel is not Hermitian at ({row}, {col}): deviation {deviation}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },
    #[error("kernel family: {0}")]
    InvalidFamily(String),
    #[error("kernel mass outside [0, {omega_max}]: window [{lo}, {hi}] exceeds the grid")]
    MassOutsideGrid { omega_max: f64, lo: f64, hi: f64 },
    #[error("decay fit: non-positive envelope value {value} at t = {t}")]
    FitDomain { t: f64, value: f64 },
    #[error("decay fit: {0}")]
    FitWindow(String),
    #[error("refinement: {0}")]
    Refinement(String),
}

/// Sampled diagonal weight and off-diagonal kernel on `ω_k = k Δω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidKernel<T: Real> {
    omega0: T,
    d_omega: T,
    diag: Vec<T>,
    /// Row-major `n × n`.
    offdiag: Vec<Amplitude<T>>,
    hbar: T,
}

fn trapezoid_weight<T: Real>(k: usize, n: usize) -> T {
    if k == 0 || k + 1 == n {
        T::lit(0.5)
    } else {
        T::one()
    }
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid<T: Real>(values: &[T], step: T) -> T {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| trapezoid_weight::<T>(k, n) * v)
        .sum::<T>()
        * step
}

impl<T: Real> SidKernel<T> {
    /// Kernel on `ω_k = k Δω`. See [`SidKernel::with_origin`].
    pub fn new(
        d_omega: T,
        diag: Vec<T>,
        offdiag: Vec<Amplitude<T>>,
        hbar: T,
    ) -> Result<Self, SidError> {
        Self::with_origin(T::zero(), d_omega, diag, offdiag, hbar)
    }

    /// Kernel on `ω_k = omega0 + k Δω`. Validates shape, finiteness and
    /// Hermitian symmetry of `offdiag`.
    pub fn with_origin(
        omega0: T,
        d_omega: T,
        diag: Vec<T>,
        offdiag: Vec<Amplitude<T>>,
        hbar: T,
    ) -> Result<Self, SidError> {
        let n = diag.len();
        if n < 2 {
            return Err(SidError::InvalidKernel(format!("need at least 2 grid points, got {n}")));
        }
        if offdiag.len() != n * n {
            return Err(SidError::InvalidKernel(format!(
                "off-diagonal table has {} entries, expected {n}x{n}",
                offdiag.len()
            )));
        }
        if !(d_omega > T::zero()) || !d_omega.is_finite() {
            return Err(SidError::InvalidKernel(format!("grid spacing must be positive, got {d_omega}")));
        }
        if !(hbar > T::zero()) || !hbar.is_finite() {
            return Err(SidError::InvalidKernel(format!("hbar must be positive, got {hbar}")));
        }
        if !(omega0 >= T::zero()) || !omega0.is_finite() {
            return Err(SidError::InvalidKernel(format!("grid must start at omega >= 0, got {omega0}")));
        }
        if let Some(k) = diag.iter().position(|v| !v.is_finite()) {
            return Err(SidError::InvalidKernel(format!("diag[{k}] is not finite")));
        }
        if let Some(k) = offdiag.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(SidError::InvalidKernel(format!("offdiag[{}, {}] is not finite", k / n, k % n)));
        }
        let scale = offdiag.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let tol = T::epsilon() * T::lit(64.0) * scale.max(T::min_positive_value());
        for i in 0..n {
            for j in i..n {
                let dev = (offdiag[i * n + j] - offdiag[j * n + i].conj()).norm();
                if dev > tol {
                    return Err(SidError::NotHermitian { row: i, col: j, deviation: dev.as_f64() });
                }
            }
        }
        Ok(Self { omega0, d_omega, diag, offdiag, hbar })
    }

    pub fn n_omega(&self) -> usize {
        self.diag.len()
    }

    pub fn d_omega(&self) -> T {
        self.d_omega
    }

    pub fn omega(&self, k: usize) -> T {
        self.omega0 + self.d_omega * T::from_usize_lossy(k)
    }

    pub fn omega_max(&self) -> T {
        self.omega(self.n_omega() - 1)
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    pub fn offdiag(&self, i: usize, j: usize) -> Amplitude<T> {
        self.offdiag[i * self.n_omega() + j]
    }

    pub fn offdiag_is_zero(&self) -> bool {
        self.offdiag.iter().all(|z| z.re == T::zero() && z.im == T::zero())
    }

    /// Time after which the discrete sum repeats: `2πħ/Δω`.
    pub fn revival_time(&self) -> T {
        T::TAU() * self.hbar / self.d_omega
    }

    /// Diagonal term `Σ w_k d(ω_k) Δω`: the stable long-time value.
    pub fn asymptotic_value(&self) -> T {
        trapezoid(&self.diag, self.d_omega)
    }

    /// Off-diagonal double sum at `t`; real up to rounding for Hermitian `K`.
    pub fn offdiag_term(&self, t: T) -> Amplitude<T> {
        let n = self.n_omega();
        let u: Vec<Amplitude<T>> = (0..n)
            .map(|k| cis(self.omega(k) * t / self.hbar).scale(trapezoid_weight::<T>(k, n)))
            .collect();
        let zero = Complex::new(T::zero(), T::zero());
        let mut total = zero;
        for (i, ui) in u.iter().enumerate() {
            let row = &self.offdiag[i * n..(i + 1) * n];
            let inner = row.iter().zip(&u).fold(zero, |acc, (k, uj)| acc + k * uj.conj());
            total = total + ui * inner;
        }
        total.scale(self.d_omega * self.d_omega)
    }

    /// `<O>(t)` including the imaginary rounding residue.
    pub fn expectation_complex(&self, t: T) -> Amplitude<T> {
        self.offdiag_term(t) + Complex::new(self.asymptotic_value(), T::zero())
    }

    /// `<O>(t)`.
    pub fn expectation_at(&self, t: T) -> T {
        self.expectation_complex(t).re
    }

    /// `|<O>(t) - asymptotic_value|` on a grid.
    pub fn offdiag_envelope(&self, grid: TimeGrid<T>) -> RealSeries<T> {
        let asym = self.asymptotic_value();
        RealSeries::sample(grid, |t| (self.expectation_at(t) - asym).abs())
    }
}

/// Built-in and tabulated kernel families.
///
/// Built-ins share a Gaussian energy window `a(ω) = exp(-(ω - center)²/2 spread²)`:
/// `d(ω) = diag_mass a(ω)²/(√π spread)` and
/// `K(ω, ω') = amplitude a(ω) a(ω') p(ω - ω')/(√π spread)`, where `p` is a
/// unit-mass Lorentzian of half-width `gamma` or Gaussian of standard
/// deviation `sigma`. The window integrates out to `amplitude` times the
/// Fourier transform of `p` smoothed on a time scale `1/(√2 spread)`, so the
/// Lorentzian off-diagonal term decays as `e^{-gamma t/ħ}` once `t` exceeds
/// that scale and the Gaussian one as `e^{-sigma_eff² t²/2ħ²}`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily<T: Real> {
    Lorentzian { center: T, gamma: T, amplitude: T, spread: T, diag_mass: T },
    Gaussian { center: T, sigma: T, amplitude: T, spread: T, diag_mass: T },
    TableDriven { omega0: T, d_omega: T, diag: Vec<T>, offdiag: Vec<Amplitude<T>> },
}

impl<T: Real> KernelFamily<T> {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Lorentzian { .. } => "lorentzian",
            KernelFamily::Gaussian { .. } => "gaussian",
            KernelFamily::TableDriven { .. } => "table",
        }
    }

    /// Samples the family on `n_omega` points spanning `[0, omega_max]`.
    /// Tabulated kernels carry their own grid and ignore both arguments.
    pub fn build(&self, omega_max: T, n_omega: usize, hbar: T) -> Result<SidKernel<T>, SidError> {
        let (center, spread, amplitude, diag_mass, profile): (T, T, T, T, Box<dyn Fn(T) -> T>) =
            match *self {
                KernelFamily::TableDriven { omega0, d_omega, ref diag, ref offdiag } => {
                    return SidKernel::with_origin(omega0, d_omega, diag.clone(), offdiag.clone(), hbar);
                }
                KernelFamily::Lorentzian { center, gamma, amplitude, spread, diag_mass } => {
                    if !(gamma > T::zero()) {
                        return Err(SidError::InvalidFamily(format!("gamma must be positive, got {gamma}")));
                    }
                    let norm = gamma / T::PI();
                    (center, spread, amplitude, diag_mass, Box::new(move |nu: T| norm / (nu * nu + gamma * gamma)))
                }
                KernelFamily::Gaussian { center, sigma, amplitude, spread, diag_mass } => {
                    if !(sigma > T::zero()) {
                        return Err(SidError::InvalidFamily(format!("sigma must be positive, got {sigma}")));
                    }
                    let norm = T::one() / (sigma * T::TAU().sqrt());
                    let two_var = T::lit(2.0) * sigma * sigma;
                    (center, spread, amplitude, diag_mass, Box::new(move |nu: T| norm * (-(nu * nu) / two_var).exp()))
                }
            };
        if !(spread > T::zero()) {
            return Err(SidError::InvalidFamily(format!("spread must be positive, got {spread}")));
        }
        if n_omega < 2 || !(omega_max > T::zero()) {
            return Err(SidError::InvalidFamily(format!(
                "grid needs n_omega >= 2 and omega_max > 0, got {n_omega} and {omega_max}"
            )));
        }
        let reach = T::lit(MASS_SIGMAS) * spread;
        let (lo, hi) = (center - reach, center + reach);
        if lo < T::zero() || hi > omega_max {
            return Err(SidError::MassOutsideGrid {
                omega_max: omega_max.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        let d_omega = omega_max / T::from_usize_lossy(n_omega - 1);
        let omega = |k: usize| d_omega * T::from_usize_lossy(k);
        let window: Vec<T> = (0..n_omega)
            .map(|k| {
                let x = (omega(k) - center) / spread;
                (-(x * x) / T::lit(2.0)).exp()
            })
            .collect();
        let norm = T::one() / (T::PI().sqrt() * spread);
        let diag = window.iter().map(|&w| diag_mass * norm * w * w).collect();
        let mut offdiag = vec![Complex::new(T::zero(), T::zero()); n_omega * n_omega];
        for i in 0..n_omega {
            for j in i..n_omega {
                let v = amplitude * norm * window[i] * window[j] * profile(omega(i) - omega(j));
                offdiag[i * n_omega + j] = Complex::new(v, T::zero());
                offdiag[j * n_omega + i] = Complex::new(v, T::zero());
            }
        }
        SidKernel::new(d_omega, diag, offdiag, hbar)
    }
}

/// Result of fitting `envelope ≈ C e^{-gamma t/ħ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate<T: Real> {
    /// Decay rate in energy units.
    pub gamma: T,
    /// `ħ / gamma`.
    pub t_relax: T,
    /// RMS deviation of the log-envelope from the fitted line, in nats.
    pub residual: T,
    /// `residual <= EXPONENTIAL_RESIDUAL_THRESHOLD`.
    pub exponential: bool,
    pub window: (T, T),
}

/// Extra constraints on the fit window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions<T: Real> {
    /// Discreteness revival time of the sampled kernel, if any.
    pub revival_time: Option<T>,
}

/// Fits a decay rate with no revival constraint. See [`fit_decay_with`].
pub fn fit_decay<T: Real>(envelope: &RealSeries<T>, hbar: T) -> Result<DecayEstimate<T>, SidError> {
    fit_decay_with(envelope, hbar, FitOptions::default())
}

/// Least-squares line through `ln envelope` on `[t_a, t_b]`.
///
/// `t_e` is the first e-folding time; `t_a = t_0 + 3 t_e` skips the
/// transient. `t_b` is the earliest of the grid end, the last point above
/// [`ENVELOPE_NOISE_FLOOR`], and, when a revival time `T` is known, the time
/// where the mirror image `e^{-(T - t)/t_e}` reaches [`REVIVAL_CONTAMINATION`]
/// of the direct decay.
pub fn fit_decay_with<T: Real>(
    envelope: &RealSeries<T>,
    hbar: T,
    opts: FitOptions<T>,
) -> Result<DecayEstimate<T>, SidError> {
    let times = envelope.times();
    let v = &envelope.values;
    let t0 = times[0];
    let v0 = v[0];
    if !(v0 > T::zero()) {
        return Err(SidError::FitDomain { t: t0.as_f64(), value: v0.as_f64() });
    }
    let e_level = v0 / T::E();
    let k_e = v
        .iter()
        .position(|&x| x <= e_level)
        .ok_or_else(|| SidError::FitWindow("envelope never decays by a factor e".into()))?;
    let t_e = times[k_e] - t0;
    if !(t_e > T::zero()) {
        return Err(SidError::FitWindow("envelope drops by e within one sample".into()));
    }
    let t_a = t0 + T::lit(3.0) * t_e;
    let mut t_b = *times.last().unwrap();
    if let Some(t_rev) = opts.revival_time {
        let limit = t0 + T::lit(0.5) * (t_rev + T::lit(REVIVAL_CONTAMINATION).ln() * t_e);
        t_b = t_b.min(limit);
    }
    // The first sample below the floor ends the window; a non-positive one
    // means the series is not an envelope.
    let floor = v0 * T::lit(ENVELOPE_NOISE_FLOOR);
    if let Some(k) = (0..v.len()).find(|&k| times[k] >= t_a && v[k] < floor) {
        if !(v[k] > T::zero()) {
            return Err(SidError::FitDomain { t: times[k].as_f64(), value: v[k].as_f64() });
        }
        t_b = t_b.min(times[k]);
    }
    let idx: Vec<usize> = (0..v.len()).filter(|&k| times[k] >= t_a && times[k] < t_b).collect();
    if idx.len() < 3 {
        return Err(SidError::FitWindow(format!(
            "window [{t_a}, {t_b}] holds {} samples, need at least 3",
            idx.len()
        )));
    }
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &k in &idx {
        if !(v[k] > T::zero()) {
            return Err(SidError::FitDomain { t: times[k].as_f64(), value: v[k].as_f64() });
        }
        xs.push(times[k]);
        ys.push(v[k].ln());
    }
    let line = LineFit::fit(&xs, &ys)
        .ok_or_else(|| SidError::FitWindow("degenerate fit window".into()))?;
    let gamma = -line.slope * hbar;
    if !(gamma > T::zero()) {
        return Err(SidError::FitWindow(format!("envelope does not decay (slope {})", line.slope)));
    }
    let residual = line.rms();
    Ok(DecayEstimate {
        gamma,
        t_relax: hbar / gamma,
        residual,
        exponential: residual <= T::lit(EXPONENTIAL_RESIDUAL_THRESHOLD),
        window: (xs[0], *xs.last().unwrap()),
    })
}

/// One resolution of a [`RefinementReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow<T: Real> {
    pub n_omega: usize,
    pub d_omega: T,
    pub value: T,
    pub revival_time: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport<T: Real> {
    pub t: T,
    pub rows: Vec<RefinementRow<T>>,
    /// `log2(|v_k - v_{k+1}| / |v_{k+1} - v_{k+2}|)` for each consecutive
    /// triple; `None` when a difference is exactly zero.
    pub observed_orders: Vec<Option<T>>,
}

/// Evaluates `<O>(t)` for each resolution in `resolutions` (increasing) and
/// estimates the observed convergence order. Nested doubling uses
/// `n -> 2n - 1` points.
pub fn grid_refinement_check<T: Real>(
    family: &KernelFamily<T>,
    omega_max: T,
    hbar: T,
    t: T,
    resolutions: &[usize],
) -> Result<RefinementReport<T>, SidError> {
    if matches!(family, KernelFamily::TableDriven { .. }) {
        return Err(SidError::Refinement("tabulated kernels cannot be resampled".into()));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SidError::Refinement("resolutions must be strictly increasing".into()));
    }
    let rows = resolutions
        .iter()
        .map(|&n| {
            let k = family.build(omega_max, n, hbar)?;
            Ok(RefinementRow {
                n_omega: n,
                d_omega: k.d_omega(),
                value: k.expectation_at(t),
                revival_time: k.revival_time(),
            })
        })
        .collect::<Result<Vec<_>, SidError>>()?;
    let observed_orders = rows
        .windows(3)
        .map(|w| {
            let d1 = (w[0].value - w[1].value).abs();
            let d2 = (w[1].value - w[2].value).abs();
            if d1 == T::zero() || d2 == T::zero() {
                None
            } else {
                Some((d1 / d2).log2())
            }
        })
        .collect();
    Ok(RefinementReport { t, rows, observed_orders })
}
