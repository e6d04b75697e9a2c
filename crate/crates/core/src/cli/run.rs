use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::ser::{Serialize, Serializer};

use super::config::{ObservableSelection, RunConfig, Scenario, SidRun, SpinBathRun, TwoTimesRun, VerifyRun};
use super::CliError;
use crate::analytic::{expectation_series, gamma1_series, overlap_r, overlap_series};
use crate::model::{sample_environment, SpinBathConfig, TimeGrid};
use crate::oracle;
use crate::sid::{fit_decay_with, FitOptions};
use crate::timescales::{
    detect_two_stages, envelope_trend, spin_bath_report, two_times_report, two_times_series, TimeScale,
    TimeScaleReport,
};
use crate::verify::{run_verification, VerifyReport};

/// Blocks used for the interference trend in the spin-bath summary.
const TREND_BLOCKS: usize = 20;

/// Time scale rendered as a number, `"infinite"`, `"not reached"` or null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeValue {
    Value(TimeScale<f64>),
    NotApplicable,
}

impl Serialize for TimeValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimeValue::Value(TimeScale::Finite(v)) => s.serialize_f64(*v),
            TimeValue::Value(t) => s.serialize_str(t.marker().unwrap_or("")),
            TimeValue::NotApplicable => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Methods {
    pub t_ds: Option<&'static str>,
    pub t_rs: Option<&'static str>,
    pub t_ru: Option<&'static str>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitSummary {
    pub gamma: f64,
    pub t_relax: f64,
    pub residual: f64,
    pub exponential: bool,
    pub window: [f64; 2],
    pub revival_time: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TwoStageSummary {
    pub gamma_fast: f64,
    pub gamma_slow: f64,
    pub t_r1: TimeValue,
    pub t_r2: TimeValue,
    pub ratio: Option<f64>,
    pub single_stage: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TrendSummary {
    pub slope: f64,
    pub stderr: f64,
    pub flat: bool,
}

/// Contents of `summary.json`. Every key is present for every scenario.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Summary {
    pub scenario: &'static str,
    pub seed: u64,
    pub n_env: Option<usize>,
    pub t_ds: TimeValue,
    pub t_rs: TimeValue,
    pub t_ru: TimeValue,
    pub methods: Methods,
    pub ordering_ok: Option<bool>,
    pub asymptotic_value: Option<f64>,
    pub fit: Option<FitSummary>,
    pub fit_error: Option<String>,
    pub two_stage: Option<TwoStageSummary>,
    pub interference_trend: Option<TrendSummary>,
    pub verification: Option<VerifyReport>,
}

impl Summary {
    fn empty(config: &RunConfig) -> Self {
        Self {
            scenario: config.scenario.name().as_str(),
            seed: config.seed,
            n_env: None,
            t_ds: TimeValue::NotApplicable,
            t_rs: TimeValue::NotApplicable,
            t_ru: TimeValue::NotApplicable,
            methods: Methods { t_ds: None, t_rs: None, t_ru: None },
            ordering_ok: None,
            asymptotic_value: None,
            fit: None,
            fit_error: None,
            two_stage: None,
            interference_trend: None,
            verification: None,
        }
    }

    fn set_report(&mut self, r: &TimeScaleReport<f64>) {
        self.t_ds = TimeValue::Value(r.t_ds);
        self.t_rs = TimeValue::Value(r.t_rs);
        self.t_ru = TimeValue::Value(r.t_ru);
        self.methods = Methods {
            t_ds: Some(r.methods[0].as_str()),
            t_rs: Some(r.methods[1].as_str()),
            t_ru: Some(r.methods[2].as_str()),
        };
        self.ordering_ok = Some(r.ordering_ok);
    }
}

/// One output row; `envelope` is left empty where undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub value: Complex<f64>,
    pub envelope: Option<f64>,
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub series: Vec<SeriesRow>,
    pub summary: Summary,
}

impl Artifacts {
    pub fn verification_failed(&self) -> bool {
        self.summary.verification.as_ref().is_some_and(|v| !v.passed)
    }

    pub fn series_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.series.len() + 1));
        out.push_str("t,value_re,value_im,envelope\n");
        for r in &self.series {
            // `{:?}` is the shortest representation that parses back exactly.
            let _ = write!(out, "{:?},{:?},{:?},", r.t, r.value.re, r.value.im);
            if let Some(e) = r.envelope {
                let _ = write!(out, "{e:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn verify_csv(&self) -> Option<String> {
        let report = self.summary.verification.as_ref()?;
        let mut out = String::from("operation,n_env,triples,max_abs_deviation,tolerance,status\n");
        for r in &report.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?},{}",
                r.operation,
                r.n_env,
                r.triples,
                r.max_abs_deviation,
                r.tolerance,
                if r.passed { "pass" } else { "fail" }
            );
        }
        Some(out)
    }

    /// Writes all files into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut files = vec![
            (dir.join("series.csv"), self.series_csv()),
            (dir.join("summary.json"), self.summary_json()),
        ];
        if let Some(v) = self.verify_csv() {
            files.push((dir.join("verify.csv"), v));
        }
        let mut written = Vec::new();
        for (path, text) in files {
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Computes the artifacts of a run.
pub fn execute(config: &RunConfig) -> Result<Artifacts, CliError> {
    let mut summary = Summary::empty(config);
    let series = match &config.scenario {
        Scenario::SpinBath(run) => spin_bath(run, config, &mut summary)?,
        Scenario::Sid(run) => sid(run, config.grid, &mut summary),
        Scenario::TwoTimes(run) => two_times(run, config.grid, &mut summary)?,
        Scenario::Verify(run) => verify(run, config, &mut summary)?,
    };
    Ok(Artifacts { series, summary })
}

/// Computes and writes the artifacts of a run into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<Artifacts, CliError> {
    let artifacts = execute(config)?;
    artifacts.write(out)?;
    Ok(artifacts)
}

fn spin_bath(run: &SpinBathRun, config: &RunConfig, summary: &mut Summary) -> Result<Vec<SeriesRow>, CliError> {
    let cfg = run.config(config.seed);
    let obs = run.observable();
    let grid = config.grid;
    let values = expectation_series(&cfg, &obs, grid).map_err(CliError::validation)?;
    let interference_scale = |s: &crate::model::HermitianBlock2<f64>| 2.0 * (cfg.a * cfg.b.conj() * s.off.conj()).norm();
    let envelope: Option<Vec<f64>> = match &run.observable {
        ObservableSelection::SystemOnly(s) => {
            let k = interference_scale(s);
            Some(overlap_series(&cfg, grid).abs().values.into_iter().map(|r| k * r).collect())
        }
        ObservableSelection::Full { system, .. } => {
            let k = interference_scale(system);
            let g1 = gamma1_series(&cfg, &obs, grid).map_err(CliError::validation)?;
            Some(g1.abs().values.into_iter().map(|r| k * r).collect())
        }
        ObservableSelection::SingleEnv { .. } => None,
    };
    let report = spin_bath_report(&cfg, grid, run.threshold_ratio).map_err(CliError::validation)?;
    summary.set_report(&report);
    summary.n_env = Some(cfg.n_env());
    summary.asymptotic_value = match &run.observable {
        ObservableSelection::SystemOnly(s) => Some(cfg.p0() * s.d0 + cfg.p1() * s.d1 + if coupled(&cfg) {
            0.0
        } else {
            2.0 * (cfg.a * cfg.b.conj() * s.off.conj()).re
        }),
        _ => None,
    };
    if let Some(env) = &envelope {
        let env_series = crate::analytic::RealSeries { grid, values: env.clone() };
        summary.interference_trend = envelope_trend(&env_series, TREND_BLOCKS)
            .ok()
            .map(|f| TrendSummary { slope: f.slope, stderr: f.stderr, flat: f.is_flat() });
    }
    Ok(grid
        .times()
        .enumerate()
        .map(|(k, t)| SeriesRow {
            t,
            value: Complex::new(values.values[k], 0.0),
            envelope: envelope.as_ref().map(|e| e[k]),
        })
        .collect())
}

fn coupled(cfg: &SpinBathConfig<f64>) -> bool {
    cfg.spins.iter().any(|s| s.g != 0.0)
}

fn sid(run: &SidRun, grid: TimeGrid<f64>, summary: &mut Summary) -> Vec<SeriesRow> {
    let kernel = run.kernel();
    let envelope = kernel.offdiag_envelope(grid);
    let revival = kernel.revival_time();
    summary.asymptotic_value = Some(kernel.asymptotic_value());
    summary.t_ds = TimeValue::NotApplicable;
    summary.t_rs = TimeValue::NotApplicable;
    match fit_decay_with(&envelope, kernel.hbar(), FitOptions { revival_time: Some(revival) }) {
        Ok(fit) => {
            summary.t_ru = TimeValue::Value(TimeScale::Finite(fit.t_relax));
            summary.methods.t_ru = Some(crate::timescales::TimeMethod::EnvelopeFit.as_str());
            summary.fit = Some(FitSummary {
                gamma: fit.gamma,
                t_relax: fit.t_relax,
                residual: fit.residual,
                exponential: fit.exponential,
                window: [fit.window.0, fit.window.1],
                revival_time: revival,
            });
        }
        Err(e) => {
            summary.t_ru = TimeValue::Value(TimeScale::NotReached);
            summary.fit_error = Some(e.to_string());
        }
    }
    let values: Vec<Complex<f64>> = {
        use rayon::prelude::*;
        let times: Vec<f64> = grid.times().collect();
        times.par_iter().map(|&t| kernel.expectation_complex(t)).collect()
    };
    grid.times()
        .enumerate()
        .map(|(k, t)| SeriesRow { t, value: values[k], envelope: Some(envelope.values[k]) })
        .collect()
}

fn two_times(run: &TwoTimesRun, grid: TimeGrid<f64>, summary: &mut Summary) -> Result<Vec<SeriesRow>, CliError> {
    let series = two_times_series(&run.scenario, grid);
    summary.asymptotic_value = Some(if run.scenario.gamma_e == 0.0 { run.scenario.weight_b } else { 0.0 });
    let fit = detect_two_stages(&series, run.scenario.hbar).map_err(CliError::validation)?;
    let report = two_times_report(&fit, run.macroscopicity).map_err(CliError::validation)?;
    summary.set_report(&report);
    if run.macroscopicity.is_none() {
        summary.t_ds = TimeValue::NotApplicable;
        summary.methods.t_ds = None;
    }
    summary.two_stage = Some(TwoStageSummary {
        gamma_fast: fit.gamma_fast,
        gamma_slow: fit.gamma_slow,
        t_r1: TimeValue::Value(fit.t_r1),
        t_r2: TimeValue::Value(fit.t_r2),
        ratio: match (fit.t_r1, fit.t_r2) {
            (TimeScale::Finite(a), TimeScale::Finite(b)) => Some(a / b),
            (TimeScale::Finite(_), TimeScale::Infinite) => Some(0.0),
            _ => None,
        },
        single_stage: fit.single_stage,
    });
    Ok(grid
        .times()
        .zip(series.values)
        .map(|(t, v)| SeriesRow { t, value: Complex::new(v, 0.0), envelope: None })
        .collect())
}

/// The series is `r(t)` from the closed form for a sampled environment of
/// the largest size, with the oracle's `|r(t)|` as the envelope column.
fn verify(run: &VerifyRun, config: &RunConfig, summary: &mut Summary) -> Result<Vec<SeriesRow>, CliError> {
    let grid = config.grid;
    let report = run_verification(&run.sizes, run.triples, config.seed, (grid.t_start(), grid.t_end()), run.tolerance)
        .map_err(CliError::validation)?;
    let n = *run.sizes.iter().max().expect("sizes validated non-empty");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let spins = sample_environment(n, config.seed, 1.0).map_err(CliError::validation)?;
    let cfg = SpinBathConfig::new(Complex::new(h, 0.0), Complex::new(h, 0.0), spins, 1.0)
        .map_err(CliError::validation)?;
    let rows = {
        use rayon::prelude::*;
        let times: Vec<f64> = grid.times().collect();
        times
            .par_iter()
            .map(|&t| {
                let oracle_r = oracle::overlap_from_state(&cfg, t)?;
                Ok(SeriesRow { t, value: overlap_r(&cfg, t), envelope: Some(oracle_r.norm()) })
            })
            .collect::<Result<Vec<_>, oracle::OracleError>>()
            .map_err(CliError::validation)?
    };
    summary.n_env = Some(n);
    summary.verification = Some(report);
    Ok(rows)
}
