//! Characteristic times: decoherence `t_DS`, subsystem relaxation `t_RS`
//! and whole-system relaxation `t_RU`.

use thiserror::Error;

use crate::analytic::{overlap_series, RealSeries};
use crate::fit::{LineFit, SegmentSums};
use crate::model::{SpinBathConfig, TimeGrid};
use crate::scalar::Real;

/// Samples a threshold crossing must stay below the threshold for.
pub const CROSSING_DEBOUNCE: usize = 3;

/// Default crossing ratio for `t_DS`: one e-fold.
pub const DEFAULT_DECOHERENCE_RATIO: f64 = 0.367_879_441_171_442_33;

/// Relative slope difference under which two segments count as one stage.
pub const SINGLE_STAGE_TOLERANCE: f64 = 0.05;

/// A tail whose log changes by less than this over the series is flat.
pub const FLAT_TAIL_LOG_CHANGE: f64 = 1e-3;

/// The fast component is fitted down to this fraction of its initial
/// excess over the tail.
pub const HEAD_FIT_FLOOR: f64 = 1e-4;

/// Cap on alternating head/tail peeling passes.
pub const PEEL_MAX_ITERATIONS: usize = 100;

/// Excess over the floor, as a multiple, that `t_RS` must settle within.
pub const SETTLING_FACTOR: f64 = std::f64::consts::E;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeScaleError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("threshold ratio must lie in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("series has negative value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("two-stage detection: {0}")]
    Detection(String),
    #[error("two-times scenario: {0}")]
    Scenario(String),
}

/// A time that may be finite, infinite (no dynamics drives it), or not
/// reached within the sampled window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeScale<T: Real> {
    Finite(T),
    Infinite,
    NotReached,
}

impl<T: Real> TimeScale<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            TimeScale::Finite(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, TimeScale::Infinite)
    }

    /// Marker string for non-finite values.
    pub fn marker(self) -> Option<&'static str> {
        match self {
            TimeScale::Finite(_) => None,
            TimeScale::Infinite => Some("infinite"),
            TimeScale::NotReached => Some("not reached"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMethod {
    ThresholdCrossing,
    EnvelopeFit,
    PoleFormula,
}

impl TimeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeMethod::ThresholdCrossing => "threshold-crossing",
            TimeMethod::EnvelopeFit => "envelope-fit",
            TimeMethod::PoleFormula => "pole-formula",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScaleReport<T: Real> {
    pub t_ds: TimeScale<T>,
    pub t_rs: TimeScale<T>,
    pub t_ru: TimeScale<T>,
    pub methods: [TimeMethod; 3],
    pub ordering_ok: bool,
}

impl<T: Real> TimeScaleReport<T> {
    pub fn new(
        t_ds: TimeScale<T>,
        t_rs: TimeScale<T>,
        t_ru: TimeScale<T>,
        methods: [TimeMethod; 3],
    ) -> Self {
        let ordering_ok = ordering_holds(&[t_ds, t_rs, t_ru]);
        Self { t_ds, t_rs, t_ru, methods, ordering_ok }
    }
}

/// `t_DS <= t_RS <= t_RU` over the finite entries; infinite entries sit
/// above every finite one.
fn ordering_holds<T: Real>(times: &[TimeScale<T>]) -> bool {
    let mut last_finite: Option<T> = None;
    let mut seen_infinite = false;
    for t in times {
        match *t {
            TimeScale::Finite(v) => {
                if seen_infinite || last_finite.is_some_and(|p| v < p) {
                    return false;
                }
                last_finite = Some(v);
            }
            TimeScale::Infinite => seen_infinite = true,
            TimeScale::NotReached => {}
        }
    }
    true
}

/// `ħ / V`; infinite for a free system (`V <= 0`).
pub fn pole_relaxation_time<T: Real>(v: T, hbar: T) -> TimeScale<T> {
    if v > T::zero() {
        TimeScale::Finite(hbar / v)
    } else {
        TimeScale::Infinite
    }
}

/// `t_DS = M t_RS`.
pub fn decoherence_time_from_relaxation<T: Real>(t_rs: T, m: T) -> Result<T, TimeScaleError> {
    if !(t_rs > T::zero()) {
        return Err(TimeScaleError::NonPositive { name: "t_rs", value: t_rs.as_f64() });
    }
    if !(m > T::zero()) {
        return Err(TimeScaleError::NonPositive { name: "M", value: m.as_f64() });
    }
    Ok(m * t_rs)
}

/// Macroscopicity coefficient `(λ_DB / L0)²`.
pub fn macroscopicity<T: Real>(lambda_db: T, l0: T) -> Result<T, TimeScaleError> {
    if !(lambda_db > T::zero()) {
        return Err(TimeScaleError::NonPositive { name: "lambda_db", value: lambda_db.as_f64() });
    }
    if !(l0 > T::zero()) {
        return Err(TimeScaleError::NonPositive { name: "L0", value: l0.as_f64() });
    }
    let r = lambda_db / l0;
    Ok(r * r)
}

/// First grid time where `value / value(0)` drops below `ratio` and stays
/// below for the next [`CROSSING_DEBOUNCE`] samples.
pub fn crossing_time<T: Real>(series: &RealSeries<T>, ratio: T) -> Result<TimeScale<T>, TimeScaleError> {
    if !(ratio > T::zero() && ratio < T::one()) {
        return Err(TimeScaleError::BadThreshold(ratio.as_f64()));
    }
    let v = &series.values;
    if let Some(k) = v.iter().position(|&x| x < T::zero()) {
        return Err(TimeScaleError::NegativeValue { index: k, value: v[k].as_f64() });
    }
    let level = v[0] * ratio;
    if !(v[0] > T::zero()) {
        return Ok(TimeScale::NotReached);
    }
    let n = v.len();
    for k in 0..n {
        if v[k] < level && k + CROSSING_DEBOUNCE < n && v[k + 1..=k + CROSSING_DEBOUNCE].iter().all(|&x| x < level) {
            return Ok(TimeScale::Finite(series.grid.time(k)));
        }
    }
    Ok(TimeScale::NotReached)
}

/// Synthetic two-stage relaxation `A e^{-γ_SE t/ħ} + B e^{-γ_E t/ħ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTimesScenario<T: Real> {
    pub gamma_se: T,
    pub gamma_e: T,
    pub weight_a: T,
    pub weight_b: T,
    pub hbar: T,
}

impl<T: Real> TwoTimesScenario<T> {
    pub fn new(gamma_se: T, gamma_e: T, weight_a: T, weight_b: T, hbar: T) -> Result<Self, TimeScaleError> {
        if !(gamma_se >= T::zero()) || !(gamma_e >= T::zero()) {
            return Err(TimeScaleError::Scenario("decay rates must be non-negative".into()));
        }
        if !(weight_a > T::zero()) || !(weight_b > T::zero()) {
            return Err(TimeScaleError::Scenario("weights A and B must be positive".into()));
        }
        if !(hbar > T::zero()) {
            return Err(TimeScaleError::NonPositive { name: "hbar", value: hbar.as_f64() });
        }
        Ok(Self { gamma_se, gamma_e, weight_a, weight_b, hbar })
    }

    pub fn value(&self, t: T) -> T {
        self.weight_a * (-self.gamma_se * t / self.hbar).exp()
            + self.weight_b * (-self.gamma_e * t / self.hbar).exp()
    }
}

pub fn two_times_series<T: Real>(sc: &TwoTimesScenario<T>, grid: TimeGrid<T>) -> RealSeries<T> {
    RealSeries::sample(grid, |t| sc.value(t))
}

/// Output of [`detect_two_stages`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageFit<T: Real> {
    /// `ħ / γ̂_SE`, identified with `t_RS`.
    pub t_r1: TimeScale<T>,
    /// `ħ / γ̂_E`, identified with `t_RU`.
    pub t_r2: TimeScale<T>,
    pub gamma_fast: T,
    /// Zero when the tail is flat.
    pub gamma_slow: T,
    pub single_stage: bool,
    /// Index where the slow segment starts.
    pub split_index: usize,
}

/// Log-linear fit of `values[k] - subtract(t_k)` over the indices where the
/// difference stays positive and above `floor`, stopping at the first
/// failure. Returns the fit and the number of points used.
fn peel_fit<T: Real>(
    times: &[T],
    values: &[T],
    range: std::ops::Range<usize>,
    floor: T,
    subtract: impl Fn(T) -> T,
) -> Option<LineFit<T>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in range {
        let d = values[k] - subtract(times[k]);
        if !(d > floor) {
            break;
        }
        xs.push(times[k]);
        ys.push(d.ln());
    }
    LineFit::fit(&xs, &ys)
}

/// Splits `ln series` into two line segments (minimum total squared error),
/// then refines both rates by peeling: the slow tail is subtracted from the
/// head and the fast component from the tail, until both slopes settle.
///
/// Fails unless the series spans two decades, either overall or in the
/// fast stage's excess over the late-time line.
pub fn detect_two_stages<T: Real>(series: &RealSeries<T>, hbar: T) -> Result<TwoStageFit<T>, TimeScaleError> {
    let v = &series.values;
    let n = v.len();
    if n < 8 {
        return Err(TimeScaleError::Detection(format!("need at least 8 samples, got {n}")));
    }
    if let Some(k) = v.iter().position(|&x| !(x > T::zero())) {
        return Err(TimeScaleError::Detection(format!("non-positive value at index {k}")));
    }
    let times = series.times();
    let logs: Vec<T> = v.iter().map(|x| x.ln()).collect();
    let v_max = v.iter().copied().fold(T::zero(), T::max);
    let v_min = v.iter().copied().fold(T::infinity(), T::min);
    let hundred = T::lit(100.0);
    if !(v_max / v_min >= hundred) {
        // Otherwise the fast stage alone must span two decades: its excess
        // over the extrapolated late-half line has to be at least 1% of the
        // initial value and fall by a factor 100 before mid-series.
        let half = n / 2;
        let late = LineFit::fit(&times[half..], &logs[half..])
            .ok_or_else(|| TimeScaleError::Detection("degenerate late half".into()))?;
        let e0 = v[0] - late.predict(times[0]).exp();
        let e_mid = (v[half] - late.predict(times[half]).exp()).abs();
        let ok = e0 >= v[0] / hundred && e0 >= hundred * e_mid;
        if !ok {
            return Err(TimeScaleError::Detection("insufficient dynamic range (need two decades)".into()));
        }
    }
    let sums = SegmentSums::new(&times, &logs);
    let min_len = 3;
    let mut best = (f64::INFINITY, min_len);
    for k in min_len..=n - min_len {
        let sse = sums.sse(0, k) + sums.sse(k, n);
        if sse < best.0 {
            best = (sse, k);
        }
    }
    let split = best.1;
    let head = LineFit::fit(&times[..split], &logs[..split]).unwrap();
    let tail = LineFit::fit(&times[split..], &logs[split..]).unwrap();

    let span = *times.last().unwrap() - times[0];
    let flat = |slope: T| slope.abs() * span <= T::lit(FLAT_TAIL_LOG_CHANGE);
    let (hs, ts) = (-head.slope, -tail.slope);
    if hs > T::zero() && ts > T::zero() && (hs - ts).abs() <= T::lit(SINGLE_STAGE_TOLERANCE) * hs.max(ts) {
        let whole = LineFit::fit(&times, &logs).unwrap();
        let gamma = -whole.slope * hbar;
        return Ok(TwoStageFit {
            t_r1: TimeScale::Finite(hbar / gamma),
            t_r2: TimeScale::Finite(hbar / gamma),
            gamma_fast: gamma,
            gamma_slow: gamma,
            single_stage: true,
            split_index: split,
        });
    }

    let mut tail_fit = tail;
    let mut head_fit = head;
    for _ in 0..PEEL_MAX_ITERATIONS {
        let (prev_head, prev_tail) = (head_fit.slope, tail_fit.slope);
        let tf = tail_fit;
        let floor = (v[0] - tf.predict(times[0]).exp()) * T::lit(HEAD_FIT_FLOOR);
        head_fit = peel_fit(&times, v, 0..n, floor, |t| tf.predict(t).exp())
            .ok_or_else(|| TimeScaleError::Detection("no fast component above the tail".into()))?;
        let hf = head_fit;
        // The tail starts once the fast component is negligible, so that
        // errors in its extrapolation do not tilt the slow slope.
        let tail_start = (split..n)
            .find(|&k| hf.predict(times[k]).exp() <= T::lit(HEAD_FIT_FLOOR) * v[k])
            .filter(|&k| n - k >= min_len)
            .unwrap_or(split);
        tail_fit = peel_fit(&times, v, tail_start..n, T::zero(), |t| hf.predict(t).exp())
            .ok_or_else(|| TimeScaleError::Detection("tail vanishes after removing the fast component".into()))?;
        let settled = |a: T, b: T| (a - b).abs() <= T::lit(1e-12) * a.abs().max(b.abs()) + T::epsilon();
        if settled(head_fit.slope, prev_head) && settled(tail_fit.slope, prev_tail) {
            break;
        }
    }

    let gamma_fast = -head_fit.slope * hbar;
    if !(gamma_fast > T::zero()) {
        return Err(TimeScaleError::Detection("fast component does not decay".into()));
    }
    let (gamma_slow, t_r2) = if flat(tail_fit.slope) {
        (T::zero(), TimeScale::Infinite)
    } else {
        let g = -tail_fit.slope * hbar;
        if !(g > T::zero()) {
            return Err(TimeScaleError::Detection("tail grows".into()));
        }
        (g, TimeScale::Finite(hbar / g))
    };
    Ok(TwoStageFit {
        t_r1: TimeScale::Finite(hbar / gamma_fast),
        t_r2,
        gamma_fast,
        gamma_slow,
        single_stage: false,
        split_index: split,
    })
}

/// Report for a two-times scenario: `t_RS = t_R1`, `t_RU = t_R2`, and
/// `t_DS = M t_RS` when a macroscopicity coefficient is given.
pub fn two_times_report<T: Real>(
    fit: &TwoStageFit<T>,
    macroscopicity: Option<T>,
) -> Result<TimeScaleReport<T>, TimeScaleError> {
    let t_ds = match (macroscopicity, fit.t_r1) {
        (Some(m), TimeScale::Finite(t_rs)) => TimeScale::Finite(decoherence_time_from_relaxation(t_rs, m)?),
        _ => TimeScale::NotReached,
    };
    Ok(TimeScaleReport::new(
        t_ds,
        fit.t_r1,
        fit.t_r2,
        [TimeMethod::PoleFormula, TimeMethod::EnvelopeFit, TimeMethod::EnvelopeFit],
    ))
}

/// Slope of the log of block maxima of a series, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit<T: Real> {
    pub slope: T,
    pub stderr: T,
    pub n_blocks: usize,
}

impl<T: Real> TrendFit<T> {
    /// `|slope| <= 3 stderr`.
    pub fn is_flat(&self) -> bool {
        self.slope.abs() <= T::lit(3.0) * self.stderr
    }
}

/// Splits `series` into `n_blocks` equal blocks, takes each block's
/// maximum as the envelope and fits a line to its logarithm against the
/// block mid-times. Zero-maximum blocks are skipped.
pub fn envelope_trend<T: Real>(series: &RealSeries<T>, n_blocks: usize) -> Result<TrendFit<T>, TimeScaleError> {
    let n = series.len();
    if n_blocks < 3 || n < n_blocks {
        return Err(TimeScaleError::Detection(format!(
            "trend needs at least 3 blocks and one sample per block, got {n_blocks} blocks for {n} samples"
        )));
    }
    let len = n / n_blocks;
    let mut xs = Vec::with_capacity(n_blocks);
    let mut ys = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let block = &series.values[b * len..(b + 1) * len];
        let peak = block.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        if peak > T::zero() {
            xs.push(series.grid.time(b * len + len / 2));
            ys.push(peak.ln());
        }
    }
    let line = LineFit::fit(&xs, &ys)
        .ok_or_else(|| TimeScaleError::Detection("envelope vanishes in too many blocks".into()))?;
    Ok(TrendFit { slope: line.slope, stderr: line.slope_stderr(&xs), n_blocks: xs.len() })
}

/// Time scales of the spin-bath model.
///
/// * `t_DS`: debounced crossing of `|r(t)|` below `threshold_ratio`.
/// * `t_RS`: first debounced time `|r(t)|` settles within
///   [`SETTLING_FACTOR`] of its floor (median over the last half of the
///   grid). Infinite when no spin couples (`N = 0` or all `g_i = 0`).
/// * `t_RU`: always infinite; the environment spins do not interact with
///   each other, so the closed system never relaxes.
pub fn spin_bath_report<T: Real>(
    config: &SpinBathConfig<T>,
    grid: TimeGrid<T>,
    threshold_ratio: T,
) -> Result<TimeScaleReport<T>, TimeScaleError> {
    let env = overlap_series(config, grid).abs();
    let t_ds = crossing_time(&env, threshold_ratio)?;
    let coupled = config.spins.iter().any(|s| s.g != T::zero());
    let t_rs = if !coupled {
        TimeScale::Infinite
    } else {
        let mut late: Vec<T> = env.values[env.len() / 2..].to_vec();
        late.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let floor = late[late.len() / 2];
        let level = floor * T::lit(SETTLING_FACTOR);
        if !(level < env.values[0]) {
            TimeScale::NotReached
        } else {
            crossing_time(&env, level / env.values[0])?
        }
    };
    Ok(TimeScaleReport::new(
        t_ds,
        t_rs,
        TimeScale::Infinite,
        [TimeMethod::ThresholdCrossing, TimeMethod::EnvelopeFit, TimeMethod::PoleFormula],
    ))
}
