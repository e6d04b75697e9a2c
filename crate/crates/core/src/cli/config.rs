use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::model::{
    observable_single_env, observable_system_only, sample_environment, validate, EnvSpin, HermitianBlock2,
    ObservableSpec, SpinBathConfig, TimeGrid, Violation,
};
use crate::sid::{KernelFamily, SidKernel};
use crate::timescales::{TwoTimesScenario, DEFAULT_DECOHERENCE_RATIO};

/// Configuration error with the dotted path of the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    SpinBath,
    Sid,
    TwoTimes,
    Verify,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::SpinBath => "spin-bath",
            ScenarioName::Sid => "sid",
            ScenarioName::TwoTimes => "two-times",
            ScenarioName::Verify => "verify",
        }
    }
}

// Document layer: mirrors the file one-to-one.

type Pair = [f64; 2];

fn c(p: Pair) -> Complex<f64> {
    Complex::new(p[0], p[1])
}

fn pair(z: Complex<f64>) -> Pair {
    [z.re, z.im]
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    scenario: ScenarioName,
    seed: u64,
    grid: GridDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<OutputDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spin_bath: Option<SpinBathDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observable: Option<ObservableDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sid: Option<SidDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    two_times: Option<TwoTimesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verify: Option<VerifyDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    t_start: f64,
    t_end: f64,
    n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputDoc {
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinBathDoc {
    a: Pair,
    b: Pair,
    #[serde(default = "one")]
    hbar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample: Option<SampleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spins: Option<Vec<SpinDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleDoc {
    n: usize,
    g_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinDoc {
    alpha: Pair,
    beta: Pair,
    g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    d0: f64,
    d1: f64,
    #[serde(default)]
    off: Pair,
}

impl From<BlockDoc> for HermitianBlock2<f64> {
    fn from(b: BlockDoc) -> Self {
        HermitianBlock2::new(b.d0, b.d1, c(b.off))
    }
}

impl From<HermitianBlock2<f64>> for BlockDoc {
    fn from(b: HermitianBlock2<f64>) -> Self {
        BlockDoc { d0: b.d0, d1: b.d1, off: pair(b.off) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ObservableKindDoc {
    SystemOnly,
    Full,
    SingleEnv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableDoc {
    kind: ObservableKindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system: Option<BlockDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    env: Option<Vec<BlockDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    env_all: Option<BlockDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    block: Option<BlockDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyDoc {
    Lorentzian,
    Gaussian,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidDoc {
    family: FamilyDoc,
    #[serde(default = "one")]
    hbar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_omega: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diag_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diag_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offdiag_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoTimesDoc {
    gamma_se: f64,
    gamma_e: f64,
    #[serde(default = "one")]
    weight_a: f64,
    #[serde(default = "one")]
    weight_b: f64,
    #[serde(default = "one")]
    hbar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    macroscopicity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyDoc {
    n_env: Vec<usize>,
    #[serde(default = "default_triples")]
    triples: usize,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
}

fn default_triples() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-10
}

// Validated layer.

/// Environment of a spin-bath run: explicit spins or a sampling spec
/// resolved against the run seed.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Explicit(Vec<EnvSpin<f64>>),
    Sampled { n: usize, g_max: f64 },
}

impl Environment {
    pub fn n_env(&self) -> usize {
        match self {
            Environment::Explicit(s) => s.len(),
            Environment::Sampled { n, .. } => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvBlocks {
    Each(Vec<HermitianBlock2<f64>>),
    All(HermitianBlock2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSelection {
    SystemOnly(HermitianBlock2<f64>),
    Full { system: HermitianBlock2<f64>, env: EnvBlocks },
    SingleEnv { spin: usize, block: HermitianBlock2<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinBathRun {
    pub a: Complex<f64>,
    pub b: Complex<f64>,
    pub hbar: f64,
    pub environment: Environment,
    pub observable: ObservableSelection,
    /// Coherence ratio defining `t_DS`.
    pub threshold_ratio: f64,
    explicit_threshold: bool,
}

impl SpinBathRun {
    /// Materializes the configuration; sampled environments use `seed`.
    pub fn config(&self, seed: u64) -> SpinBathConfig<f64> {
        let spins = match &self.environment {
            Environment::Explicit(s) => s.clone(),
            Environment::Sampled { n, g_max } => {
                sample_environment(*n, seed, *g_max).expect("g_max validated at parse time")
            }
        };
        SpinBathConfig { a: self.a, b: self.b, spins, hbar: self.hbar }
    }

    pub fn observable(&self) -> ObservableSpec<f64> {
        let n = self.environment.n_env();
        match &self.observable {
            ObservableSelection::SystemOnly(s) => observable_system_only(*s, n),
            ObservableSelection::Full { system, env } => match env {
                EnvBlocks::Each(blocks) => ObservableSpec::full(*system, blocks.clone()),
                EnvBlocks::All(block) => ObservableSpec::full(*system, vec![*block; n]),
            },
            ObservableSelection::SingleEnv { spin, block } => {
                observable_single_env(*spin, *block, n).expect("spin index validated at parse time")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidRun {
    pub family: KernelFamily<f64>,
    pub omega_max: f64,
    pub n_omega: usize,
    pub hbar: f64,
    /// `(diag, offdiag)` paths of a tabulated kernel, as written in the file.
    pub table_files: Option<(PathBuf, PathBuf)>,
}

impl SidRun {
    pub fn kernel(&self) -> SidKernel<f64> {
        self.family
            .build(self.omega_max, self.n_omega, self.hbar)
            .expect("kernel validated at parse time")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimesRun {
    pub scenario: TwoTimesScenario<f64>,
    pub macroscopicity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRun {
    pub sizes: Vec<usize>,
    pub triples: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    SpinBath(SpinBathRun),
    Sid(SidRun),
    TwoTimes(TwoTimesRun),
    Verify(VerifyRun),
}

impl Scenario {
    pub fn name(&self) -> ScenarioName {
        match self {
            Scenario::SpinBath(_) => ScenarioName::SpinBath,
            Scenario::Sid(_) => ScenarioName::Sid,
            Scenario::TwoTimes(_) => ScenarioName::TwoTimes,
            Scenario::Verify(_) => ScenarioName::Verify,
        }
    }
}

/// Validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: TimeGrid<f64>,
    pub output_dir: Option<PathBuf>,
    pub scenario: Scenario,
}

/// Parses a configuration whose relative file references resolve against
/// the current directory.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_in(text, Path::new("."))
}

/// Parses a configuration; relative table paths resolve against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigError::new("(document)", e.message())
    })?;
    let doc: Document = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { "(document)".to_string() } else { path }, e.into_inner().message())
    })?;
    doc.validate(base)
}

impl RunConfig {
    /// Renders the configuration back to the file format.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("configuration documents always serialize")
    }

    fn to_document(&self) -> Document {
        let mut doc = Document {
            scenario: self.scenario.name(),
            seed: self.seed,
            grid: GridDoc {
                t_start: self.grid.t_start(),
                t_end: self.grid.t_end(),
                n_points: self.grid.n_points(),
            },
            output: self.output_dir.clone().map(|dir| OutputDoc { dir }),
            spin_bath: None,
            observable: None,
            sid: None,
            two_times: None,
            verify: None,
        };
        match &self.scenario {
            Scenario::SpinBath(run) => {
                let (sample, spins) = match &run.environment {
                    Environment::Sampled { n, g_max } => (Some(SampleDoc { n: *n, g_max: *g_max }), None),
                    Environment::Explicit(s) => (
                        None,
                        Some(
                            s.iter()
                                .map(|s| SpinDoc { alpha: pair(s.alpha), beta: pair(s.beta), g: s.g })
                                .collect(),
                        ),
                    ),
                };
                doc.spin_bath = Some(SpinBathDoc {
                    a: pair(run.a),
                    b: pair(run.b),
                    hbar: run.hbar,
                    threshold_ratio: run.explicit_threshold.then_some(run.threshold_ratio),
                    sample,
                    spins,
                });
                let empty = ObservableDoc {
                    kind: ObservableKindDoc::SystemOnly,
                    system: None,
                    env: None,
                    env_all: None,
                    spin: None,
                    block: None,
                };
                doc.observable = Some(match &run.observable {
                    ObservableSelection::SystemOnly(s) => ObservableDoc { system: Some((*s).into()), ..empty },
                    ObservableSelection::Full { system, env } => {
                        let (env, env_all) = match env {
                            EnvBlocks::Each(b) => (Some(b.iter().map(|&b| b.into()).collect()), None),
                            EnvBlocks::All(b) => (None, Some((*b).into())),
                        };
                        ObservableDoc {
                            kind: ObservableKindDoc::Full,
                            system: Some((*system).into()),
                            env,
                            env_all,
                            ..empty
                        }
                    }
                    ObservableSelection::SingleEnv { spin, block } => ObservableDoc {
                        kind: ObservableKindDoc::SingleEnv,
                        spin: Some(*spin),
                        block: Some((*block).into()),
                        ..empty
                    },
                });
            }
            Scenario::Sid(run) => {
                let mut sid = SidDoc {
                    family: FamilyDoc::Table,
                    hbar: run.hbar,
                    omega_max: None,
                    n_omega: None,
                    center: None,
                    gamma: None,
                    sigma: None,
                    spread: None,
                    amplitude: None,
                    diag_mass: None,
                    diag_file: None,
                    offdiag_file: None,
                };
                match run.family {
                    KernelFamily::Lorentzian { center, gamma, amplitude, spread, diag_mass } => {
                        sid.family = FamilyDoc::Lorentzian;
                        sid.gamma = Some(gamma);
                        sid.fill_window(run, center, amplitude, spread, diag_mass);
                    }
                    KernelFamily::Gaussian { center, sigma, amplitude, spread, diag_mass } => {
                        sid.family = FamilyDoc::Gaussian;
                        sid.sigma = Some(sigma);
                        sid.fill_window(run, center, amplitude, spread, diag_mass);
                    }
                    KernelFamily::TableDriven { .. } => {
                        let (d, o) = run.table_files.clone().expect("tabulated kernels keep their paths");
                        sid.diag_file = Some(d);
                        sid.offdiag_file = Some(o);
                    }
                }
                doc.sid = Some(sid);
            }
            Scenario::TwoTimes(run) => {
                let s = run.scenario;
                doc.two_times = Some(TwoTimesDoc {
                    gamma_se: s.gamma_se,
                    gamma_e: s.gamma_e,
                    weight_a: s.weight_a,
                    weight_b: s.weight_b,
                    hbar: s.hbar,
                    macroscopicity: run.macroscopicity,
                });
            }
            Scenario::Verify(run) => {
                doc.verify = Some(VerifyDoc {
                    n_env: run.sizes.clone(),
                    triples: run.triples,
                    tolerance: run.tolerance,
                });
            }
        }
        doc
    }
}

impl SidDoc {
    fn fill_window(&mut self, run: &SidRun, center: f64, amplitude: f64, spread: f64, diag_mass: f64) {
        self.omega_max = Some(run.omega_max);
        self.n_omega = Some(run.n_omega);
        self.center = Some(center);
        self.amplitude = Some(amplitude);
        self.spread = Some(spread);
        self.diag_mass = Some(diag_mass);
    }
}

fn require<T>(value: Option<T>, path: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::new(path, "missing required field"))
}

fn forbid<T>(value: &Option<T>, path: &str, reason: &str) -> Result<(), ConfigError> {
    match value {
        Some(_) => Err(ConfigError::new(path, reason)),
        None => Ok(()),
    }
}

fn positive(value: f64, path: &str) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {value}")))
    }
}

fn violation_error(prefix: &str, v: &Violation) -> ConfigError {
    match v {
        Violation::NonFinite { field } => ConfigError::new(format!("{prefix}.{field}"), "non-finite amplitude"),
        Violation::SystemNorm { norm } => ConfigError::new(
            format!("{prefix}.a"),
            format!("|a|^2 + |b|^2 = {norm}, must equal 1 (amplitudes are never renormalized)"),
        ),
        Violation::SpinNorm { index, norm } => ConfigError::new(
            format!("{prefix}.spins[{index}].alpha"),
            format!("|alpha|^2 + |beta|^2 = {norm}, must equal 1"),
        ),
        Violation::NonFiniteCoupling { index } => ConfigError::new(format!("{prefix}.spins[{index}].g"), "non-finite"),
        Violation::NonPositiveHbar { hbar } => {
            ConfigError::new(format!("{prefix}.hbar"), format!("must be positive, got {hbar}"))
        }
    }
}

fn read_table_file(path: &Path, field: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(field, format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::new(field, format!("{}:{}: {e}", path.display(), line_no + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Diagonal file: `omega value` per line on a uniform grid. Off-diagonal
/// file: `k re im` per line with `k = i * n + j`; absent entries are zero.
fn load_table(base: &Path, diag_path: &Path, offdiag_path: &Path) -> Result<KernelFamily<f64>, ConfigError> {
    let diag_rows = read_table_file(&base.join(diag_path), "sid.diag_file")?;
    if diag_rows.len() < 2 {
        return Err(ConfigError::new("sid.diag_file", "need at least two rows"));
    }
    if let Some(k) = diag_rows.iter().position(|r| r.len() != 2) {
        return Err(ConfigError::new("sid.diag_file", format!("row {k}: expected `omega value`")));
    }
    let omega0 = diag_rows[0][0];
    let d_omega = diag_rows[1][0] - omega0;
    let n = diag_rows.len();
    for (k, r) in diag_rows.iter().enumerate() {
        let expected = omega0 + d_omega * k as f64;
        if (r[0] - expected).abs() > 1e-9 * d_omega.abs().max(expected.abs()) {
            return Err(ConfigError::new(
                "sid.diag_file",
                format!("row {k}: omega {} breaks the uniform grid (expected {expected})", r[0]),
            ));
        }
    }
    let diag = diag_rows.iter().map(|r| r[1]).collect();
    let mut offdiag = vec![Complex::new(0.0, 0.0); n * n];
    for (k, r) in read_table_file(&base.join(offdiag_path), "sid.offdiag_file")?.iter().enumerate() {
        let idx = match r.as_slice() {
            [i, _, _] if *i >= 0.0 && i.fract() == 0.0 && (*i as usize) < n * n => *i as usize,
            _ => {
                return Err(ConfigError::new(
                    "sid.offdiag_file",
                    format!("row {k}: expected `k re im` with 0 <= k < {}", n * n),
                ))
            }
        };
        offdiag[idx] = Complex::new(r[1], r[2]);
    }
    Ok(KernelFamily::TableDriven { omega0, d_omega, diag, offdiag })
}

impl Document {
    fn validate(self, base: &Path) -> Result<RunConfig, ConfigError> {
        let grid = TimeGrid::new(self.grid.t_start, self.grid.t_end, self.grid.n_points)
            .map_err(|e| ConfigError::new("grid", e))?;
        let used = self.scenario;
        let sections = [
            ("spin_bath", self.spin_bath.is_some(), ScenarioName::SpinBath),
            ("observable", self.observable.is_some(), ScenarioName::SpinBath),
            ("sid", self.sid.is_some(), ScenarioName::Sid),
            ("two_times", self.two_times.is_some(), ScenarioName::TwoTimes),
            ("verify", self.verify.is_some(), ScenarioName::Verify),
        ];
        for (name, present, owner) in sections {
            if present && owner != used {
                return Err(ConfigError::new(
                    name,
                    format!("section not used by scenario \"{}\"", used.as_str()),
                ));
            }
        }
        let scenario = match used {
            ScenarioName::SpinBath => {
                Scenario::SpinBath(validate_spin_bath(require(self.spin_bath, "spin_bath")?, self.observable)?)
            }
            ScenarioName::Sid => Scenario::Sid(validate_sid(require(self.sid, "sid")?, base)?),
            ScenarioName::TwoTimes => {
                let d = require(self.two_times, "two_times")?;
                let scenario = TwoTimesScenario::new(d.gamma_se, d.gamma_e, d.weight_a, d.weight_b, d.hbar)
                    .map_err(|e| ConfigError::new("two_times", e))?;
                if let Some(m) = d.macroscopicity {
                    positive(m, "two_times.macroscopicity")?;
                }
                Scenario::TwoTimes(TwoTimesRun { scenario, macroscopicity: d.macroscopicity })
            }
            ScenarioName::Verify => {
                let d = require(self.verify, "verify")?;
                if d.n_env.is_empty() {
                    return Err(ConfigError::new("verify.n_env", "list must not be empty"));
                }
                if d.triples == 0 {
                    return Err(ConfigError::new("verify.triples", "must be at least 1"));
                }
                positive(d.tolerance, "verify.tolerance")?;
                Scenario::Verify(VerifyRun { sizes: d.n_env, triples: d.triples, tolerance: d.tolerance })
            }
        };
        Ok(RunConfig { seed: self.seed, grid, output_dir: self.output.map(|o| o.dir), scenario })
    }
}

fn validate_spin_bath(d: SpinBathDoc, obs: Option<ObservableDoc>) -> Result<SpinBathRun, ConfigError> {
    let environment = match (d.sample, d.spins) {
        (Some(s), None) => {
            positive(s.g_max, "spin_bath.sample.g_max")?;
            Environment::Sampled { n: s.n, g_max: s.g_max }
        }
        (None, Some(spins)) => Environment::Explicit(
            spins.into_iter().map(|s| EnvSpin::new(c(s.alpha), c(s.beta), s.g)).collect(),
        ),
        (Some(_), Some(_)) => {
            return Err(ConfigError::new("spin_bath", "give either `sample` or `spins`, not both"))
        }
        (None, None) => return Err(ConfigError::new("spin_bath", "missing `sample` or `spins`")),
    };
    let spins = match &environment {
        Environment::Explicit(s) => s.clone(),
        Environment::Sampled { .. } => Vec::new(),
    };
    let probe = SpinBathConfig { a: c(d.a), b: c(d.b), spins, hbar: d.hbar };
    if let Some(v) = validate(&probe).first() {
        return Err(violation_error("spin_bath", v));
    }
    let threshold_ratio = d.threshold_ratio.unwrap_or(DEFAULT_DECOHERENCE_RATIO);
    if !(threshold_ratio > 0.0 && threshold_ratio < 1.0) {
        return Err(ConfigError::new(
            "spin_bath.threshold_ratio",
            format!("must lie in (0, 1), got {threshold_ratio}"),
        ));
    }
    let n = environment.n_env();
    let observable = match obs {
        None => ObservableSelection::SystemOnly(HermitianBlock2::pauli_x()),
        Some(o) => validate_observable(o, n)?,
    };
    Ok(SpinBathRun {
        a: c(d.a),
        b: c(d.b),
        hbar: d.hbar,
        environment,
        observable,
        threshold_ratio,
        explicit_threshold: d.threshold_ratio.is_some(),
    })
}

fn check_block(b: BlockDoc, path: &str) -> Result<HermitianBlock2<f64>, ConfigError> {
    let block: HermitianBlock2<f64> = b.into();
    if block.is_finite() {
        Ok(block)
    } else {
        Err(ConfigError::new(path, "non-finite entry"))
    }
}

fn validate_observable(o: ObservableDoc, n: usize) -> Result<ObservableSelection, ConfigError> {
    match o.kind {
        ObservableKindDoc::SystemOnly => {
            forbid(&o.env, "observable.env", "not used by kind \"system-only\"")?;
            forbid(&o.env_all, "observable.env_all", "not used by kind \"system-only\"")?;
            forbid(&o.spin, "observable.spin", "not used by kind \"system-only\"")?;
            forbid(&o.block, "observable.block", "not used by kind \"system-only\"")?;
            Ok(ObservableSelection::SystemOnly(check_block(
                require(o.system, "observable.system")?,
                "observable.system",
            )?))
        }
        ObservableKindDoc::Full => {
            forbid(&o.spin, "observable.spin", "not used by kind \"full\"")?;
            forbid(&o.block, "observable.block", "not used by kind \"full\"")?;
            let system = check_block(require(o.system, "observable.system")?, "observable.system")?;
            let env = match (o.env, o.env_all) {
                (Some(list), None) => {
                    if list.len() != n {
                        return Err(ConfigError::new(
                            "observable.env",
                            format!("expected {n} blocks (one per environment spin), got {}", list.len()),
                        ));
                    }
                    let blocks = list
                        .into_iter()
                        .enumerate()
                        .map(|(i, b)| check_block(b, &format!("observable.env[{i}]")))
                        .collect::<Result<_, _>>()?;
                    EnvBlocks::Each(blocks)
                }
                (None, Some(b)) => EnvBlocks::All(check_block(b, "observable.env_all")?),
                (Some(_), Some(_)) => {
                    return Err(ConfigError::new("observable", "give either `env` or `env_all`, not both"))
                }
                (None, None) => return Err(ConfigError::new("observable.env", "missing required field")),
            };
            Ok(ObservableSelection::Full { system, env })
        }
        ObservableKindDoc::SingleEnv => {
            forbid(&o.system, "observable.system", "not used by kind \"single-env\"")?;
            forbid(&o.env, "observable.env", "not used by kind \"single-env\"")?;
            forbid(&o.env_all, "observable.env_all", "not used by kind \"single-env\"")?;
            let spin = require(o.spin, "observable.spin")?;
            if spin >= n {
                return Err(ConfigError::new(
                    "observable.spin",
                    format!("index {spin} out of range for N = {n}"),
                ));
            }
            let block = check_block(require(o.block, "observable.block")?, "observable.block")?;
            Ok(ObservableSelection::SingleEnv { spin, block })
        }
    }
}

fn validate_sid(d: SidDoc, base: &Path) -> Result<SidRun, ConfigError> {
    positive(d.hbar, "sid.hbar")?;
    let window_fields = |d: &SidDoc| -> Result<(f64, f64, f64, f64, f64, usize), ConfigError> {
        let center = require(d.center, "sid.center")?;
        let spread = positive(require(d.spread, "sid.spread")?, "sid.spread")?;
        let amplitude = d.amplitude.unwrap_or(1.0);
        let diag_mass = d.diag_mass.unwrap_or(1.0);
        let omega_max = positive(require(d.omega_max, "sid.omega_max")?, "sid.omega_max")?;
        let n_omega = require(d.n_omega, "sid.n_omega")?;
        if n_omega < 2 {
            return Err(ConfigError::new("sid.n_omega", format!("must be >= 2, got {n_omega}")));
        }
        Ok((center, spread, amplitude, diag_mass, omega_max, n_omega))
    };
    let run = match d.family {
        FamilyDoc::Lorentzian => {
            forbid(&d.sigma, "sid.sigma", "not used by family \"lorentzian\"")?;
            forbid(&d.diag_file, "sid.diag_file", "not used by family \"lorentzian\"")?;
            forbid(&d.offdiag_file, "sid.offdiag_file", "not used by family \"lorentzian\"")?;
            let gamma = positive(require(d.gamma, "sid.gamma")?, "sid.gamma")?;
            let (center, spread, amplitude, diag_mass, omega_max, n_omega) = window_fields(&d)?;
            SidRun {
                family: KernelFamily::Lorentzian { center, gamma, amplitude, spread, diag_mass },
                omega_max,
                n_omega,
                hbar: d.hbar,
                table_files: None,
            }
        }
        FamilyDoc::Gaussian => {
            forbid(&d.gamma, "sid.gamma", "not used by family \"gaussian\"")?;
            forbid(&d.diag_file, "sid.diag_file", "not used by family \"gaussian\"")?;
            forbid(&d.offdiag_file, "sid.offdiag_file", "not used by family \"gaussian\"")?;
            let sigma = positive(require(d.sigma, "sid.sigma")?, "sid.sigma")?;
            let (center, spread, amplitude, diag_mass, omega_max, n_omega) = window_fields(&d)?;
            SidRun {
                family: KernelFamily::Gaussian { center, sigma, amplitude, spread, diag_mass },
                omega_max,
                n_omega,
                hbar: d.hbar,
                table_files: None,
            }
        }
        FamilyDoc::Table => {
            for (v, p) in [
                (d.omega_max, "sid.omega_max"),
                (d.center, "sid.center"),
                (d.gamma, "sid.gamma"),
                (d.sigma, "sid.sigma"),
                (d.spread, "sid.spread"),
                (d.amplitude, "sid.amplitude"),
                (d.diag_mass, "sid.diag_mass"),
            ] {
                forbid(&v, p, "not used by family \"table\"")?;
            }
            forbid(&d.n_omega, "sid.n_omega", "not used by family \"table\"")?;
            let diag_file = require(d.diag_file, "sid.diag_file")?;
            let offdiag_file = require(d.offdiag_file, "sid.offdiag_file")?;
            let family = load_table(base, &diag_file, &offdiag_file)?;
            let n_omega = match &family {
                KernelFamily::TableDriven { diag, .. } => diag.len(),
                _ => unreachable!(),
            };
            SidRun { family, omega_max: 0.0, n_omega, hbar: d.hbar, table_files: Some((diag_file, offdiag_file)) }
        }
    };
    run.family
        .build(run.omega_max, run.n_omega, run.hbar)
        .map_err(|e| ConfigError::new("sid", e))?;
    Ok(run)
}
