//! Numerical laboratory for decoherence relative to a chosen set of
//! observables.
//!
//! * [`model`]: spin-bath configurations, observables, seeded sampling.
//! * [`analytic`]: closed-form evolution of the spin-bath model.
//! * [`oracle`]: brute-force state-vector cross-check.
//! * [`sid`]: van Hove expectation values on quasi-continuous spectra.
//! * [`timescales`]: decoherence and relaxation time estimators.
//! * [`verify`]: oracle-versus-analytic deviation tables.
//! * [`cli`]: configuration parsing and the batch runner.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod analytic;
pub mod cli;
pub mod fit;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod sid;
pub mod timescales;
pub mod verify;

pub use scalar::{Amplitude, Real};

pub type SpinBathConfigF64 = model::SpinBathConfig<f64>;
pub type SpinBathConfigF32 = model::SpinBathConfig<f32>;
pub type EnvSpinF64 = model::EnvSpin<f64>;
pub type HermitianBlockF64 = model::HermitianBlock2<f64>;
pub type ObservableSpecF64 = model::ObservableSpec<f64>;
pub type ObservableSpecF32 = model::ObservableSpec<f32>;
pub type TimeGridF64 = model::TimeGrid<f64>;
pub type ReducedStateF64 = analytic::ReducedState2<f64>;
pub type RealSeriesF64 = analytic::RealSeries<f64>;
pub type ComplexSeriesF64 = analytic::ComplexSeries<f64>;
pub type FullStateF64 = oracle::FullState<f64>;
pub type SidKernelF64 = sid::SidKernel<f64>;
pub type SidKernelF32 = sid::SidKernel<f32>;
pub type KernelFamilyF64 = sid::KernelFamily<f64>;
pub type DecayEstimateF64 = sid::DecayEstimate<f64>;
pub type TimeScaleReportF64 = timescales::TimeScaleReport<f64>;
pub type TwoTimesScenarioF64 = timescales::TwoTimesScenario<f64>;
