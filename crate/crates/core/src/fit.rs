//! Least-squares line fits used by the decay and two-stage estimators.

use crate::scalar::Real;

/// Ordinary least-squares fit `y ≈ intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T: Real> {
    pub slope: T,
    pub intercept: T,
    /// Sum of squared residuals.
    pub sse: T,
    pub n: usize,
}

impl<T: Real> LineFit<T> {
    /// `None` for fewer than two points or a degenerate abscissa.
    pub fn fit(x: &[T], y: &[T]) -> Option<Self> {
        assert_eq!(x.len(), y.len(), "abscissa and ordinate lengths differ");
        let n = x.len();
        if n < 2 {
            return None;
        }
        let nf = T::from_usize_lossy(n);
        let mx = x.iter().copied().sum::<T>() / nf;
        let my = y.iter().copied().sum::<T>() / nf;
        let mut sxx = T::zero();
        let mut sxy = T::zero();
        for (&xi, &yi) in x.iter().zip(y) {
            let dx = xi - mx;
            sxx += dx * dx;
            sxy += dx * (yi - my);
        }
        if !(sxx > T::zero()) {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let r = yi - (intercept + slope * xi);
                r * r
            })
            .sum();
        Some(Self { slope, intercept, sse, n })
    }

    pub fn predict(&self, x: T) -> T {
        self.intercept + self.slope * x
    }

    /// Root-mean-square residual.
    pub fn rms(&self) -> T {
        (self.sse / T::from_usize_lossy(self.n)).sqrt()
    }

    /// Standard error of the slope given the abscissa it was fitted on.
    pub fn slope_stderr(&self, x: &[T]) -> T {
        if self.n < 3 {
            return T::infinity();
        }
        let nf = T::from_usize_lossy(self.n);
        let mx = x.iter().copied().sum::<T>() / nf;
        let sxx: T = x.iter().map(|&xi| (xi - mx) * (xi - mx)).sum();
        let var = self.sse / T::from_usize_lossy(self.n - 2);
        (var / sxx).sqrt()
    }
}

/// Prefix sums giving O(1) least-squares fits on any contiguous segment.
/// Sums are accumulated in `f64` regardless of `T`.
#[derive(Debug, Clone)]
pub(crate) struct SegmentSums {
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: Vec<f64>,
}

impl SegmentSums {
    pub(crate) fn new<T: Real>(x: &[T], y: &[T]) -> Self {
        let n = x.len();
        let mut s = Self {
            sx: Vec::with_capacity(n + 1),
            sy: Vec::with_capacity(n + 1),
            sxx: Vec::with_capacity(n + 1),
            sxy: Vec::with_capacity(n + 1),
            syy: Vec::with_capacity(n + 1),
        };
        let (mut a, mut b, mut c, mut d, mut e) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for v in [&mut s.sx, &mut s.sy, &mut s.sxx, &mut s.sxy, &mut s.syy] {
            v.push(0.0);
        }
        for (&xi, &yi) in x.iter().zip(y) {
            let (xi, yi) = (xi.as_f64(), yi.as_f64());
            a += xi;
            b += yi;
            c += xi * xi;
            d += xi * yi;
            e += yi * yi;
            s.sx.push(a);
            s.sy.push(b);
            s.sxx.push(c);
            s.sxy.push(d);
            s.syy.push(e);
        }
        s
    }

    /// SSE of the line fit on indices `lo..hi`.
    pub(crate) fn sse(&self, lo: usize, hi: usize) -> f64 {
        let n = (hi - lo) as f64;
        let sx = self.sx[hi] - self.sx[lo];
        let sy = self.sy[hi] - self.sy[lo];
        let sxx = self.sxx[hi] - self.sxx[lo] - sx * sx / n;
        let sxy = self.sxy[hi] - self.sxy[lo] - sx * sy / n;
        let syy = self.syy[hi] - self.syy[lo] - sy * sy / n;
        if sxx <= 0.0 {
            return syy.max(0.0);
        }
        (syy - sxy * sxy / sxx).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = LineFit::fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-14);
        assert!(f.sse < 1e-25);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(LineFit::<f64>::fit(&[1.0], &[2.0]).is_none());
        assert!(LineFit::<f64>::fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn segment_sums_match_direct_fit() {
        let x: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3).sin() + 0.2 * v).collect();
        let sums = SegmentSums::new(&x, &y);
        for &(lo, hi) in &[(0, 40), (3, 17), (20, 23)] {
            let f = LineFit::fit(&x[lo..hi], &y[lo..hi]).unwrap();
            assert!((sums.sse(lo, hi) - f.sse).abs() < 1e-9);
        }
    }
}
