//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the simulation is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tolerance for normalization checks on amplitudes.
    fn norm_tolerance() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f64 {
    #[inline]
    fn norm_tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    #[inline]
    fn norm_tolerance() -> Self {
        1e-5
    }
}

/// Complex amplitude over a [`Real`] scalar.
pub type Amplitude<T> = Complex<T>;

#[inline]
pub(crate) fn is_finite_c<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `e^{i theta}`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// Running product of complex factors.
///
/// Switches to log-magnitude plus accumulated phase once the factor count
/// exceeds [`LOG_PRODUCT_THRESHOLD`], so products like `(2/3)^N` for large
/// `N` do not underflow before the final exponentiation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProductAccumulator<T: Real> {
    log_mode: bool,
    direct: Complex<T>,
    log_mag: T,
    phase: T,
    zero: bool,
}

/// Factor count above which products are accumulated in log form.
pub const LOG_PRODUCT_THRESHOLD: usize = 1000;

impl<T: Real> ProductAccumulator<T> {
    pub(crate) fn new(n_factors: usize) -> Self {
        Self {
            log_mode: n_factors > LOG_PRODUCT_THRESHOLD,
            direct: Complex::new(T::one(), T::zero()),
            log_mag: T::zero(),
            phase: T::zero(),
            zero: false,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, f: Complex<T>) {
        if self.log_mode {
            let m = f.norm();
            if m == T::zero() {
                self.zero = true;
            } else {
                self.log_mag += m.ln();
                self.phase += f.arg();
            }
        } else {
            self.direct = self.direct * f;
        }
    }

    pub(crate) fn finish(self) -> Complex<T> {
        if !self.log_mode {
            return self.direct;
        }
        if self.zero {
            return Complex::new(T::zero(), T::zero());
        }
        let tau = T::TAU();
        let phase = self.phase % tau;
        Complex::from_polar(self.log_mag.exp(), phase)
    }
}
