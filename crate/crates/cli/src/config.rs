//! Run configuration: defaults, then a TOML file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use octabush::potentials::{
    reference_c4v, reference_d4h, ClusterModel, PairPotential, PolynomialPes, ReducedRhs,
};
use octabush::symmetry::MoleculeGeometry;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lj,
    Morse,
    PesD4h,
    PesC4v,
    PesFile,
}

impl ModelKind {
    pub fn is_cluster(self) -> bool {
        matches!(self, ModelKind::Lj | ModelKind::Morse)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    #[value(alias = "eq11")]
    D4h,
    #[value(alias = "eq14")]
    C4v,
}

impl Comparison {
    pub fn reference(self) -> PolynomialPes {
        match self {
            Comparison::D4h => reference_d4h(),
            Comparison::C4v => reference_c4v(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LjParams {
    pub a: f64,
    pub b: f64,
}

impl Default for LjParams {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorseParams {
    pub depth: f64,
    pub alpha: f64,
    pub r0: f64,
}

impl Default for MorseParams {
    fn default() -> Self {
        Self { depth: 1.0, alpha: 3.0, r0: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    pub include_center: bool,
    /// Centre-vertex distance; the radial minimum when absent.
    pub d0: Option<f64>,
    pub masses: [f64; 6],
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { include_center: true, d0: None, masses: [1.0; 6] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PesParams {
    pub file: Option<PathBuf>,
    pub masses: [f64; 3],
}

impl Default for PesParams {
    fn default() -> Self {
        Self { file: None, masses: [1.0; 3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorParams {
    /// Cluster default: T0/2000 from the breathing frequency. Reduced: 0.01.
    pub dt: Option<f64>,
    pub steps: usize,
    pub stride: Option<usize>,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self { dt: None, steps: 10_000, stride: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisParams {
    pub closure_threshold: f64,
    /// Secondary counts as excited above this fraction of the largest
    /// initial amplitude.
    pub excitation_threshold: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self { closure_threshold: 1e-8, excitation_threshold: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitParams {
    pub vars: String,
    pub degree: u32,
    pub compare: Option<Comparison>,
    /// Grid half-width; cluster default scales with d0, PES default 0.3/0.25.
    pub half_width: Option<f64>,
    pub count: Option<usize>,
}

impl Default for FitParams {
    fn default() -> Self {
        Self { vars: "ab".into(), degree: 4, compare: None, half_width: None, count: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub mode: String,
    pub range: Option<String>,
    pub periods: f64,
    pub dt: f64,
    pub steps_per_period: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self { mode: "a".into(), range: None, periods: 20.0, dt: 0.01, steps_per_period: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub workers: usize,
    pub output: PathBuf,
    pub lj: LjParams,
    pub morse: MorseParams,
    pub cluster: ClusterParams,
    pub pes: PesParams,
    /// Mode amplitudes keyed by `a`/`b`/`c` or `phi1`/`phi2`/`phi3`.
    pub excite: BTreeMap<String, f64>,
    pub integrator: IntegratorParams,
    pub analysis: AnalysisParams,
    pub fit: FitParams,
    pub sweep: SweepParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::PesD4h,
            seed: octabush::acceptance::AcceptanceOptions::default().seed,
            workers: 1,
            output: PathBuf::from("."),
            lj: LjParams::default(),
            morse: MorseParams::default(),
            cluster: ClusterParams::default(),
            pes: PesParams::default(),
            excite: BTreeMap::new(),
            integrator: IntegratorParams::default(),
            analysis: AnalysisParams::default(),
            fit: FitParams::default(),
            sweep: SweepParams::default(),
        }
    }
}

/// Rejection naming the offending key.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub fn load_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let at = e.span().map(|s| s.start);
        let leaf = at.and_then(|a| line_key(&text, a));
        let table = at.and_then(|a| enclosing_table(&text, a));
        let key = match (table, leaf) {
            (Some(t), Some(k)) => format!("{t}.{k}"),
            (Some(t), None) => t,
            (None, Some(k)) => k,
            (None, None) => "<file>".into(),
        };
        ConfigError::new(key, format!("{}: {e}", path.display()))
    })
}

/// Key assigned on the line containing byte offset `at`.
fn line_key(text: &str, at: usize) -> Option<String> {
    let at = at.min(text.len());
    let start = text[..at].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let (k, _) = line.split_once('=')?;
    Some(k.trim().trim_matches('"').to_string()).filter(|k| !k.is_empty() && !k.starts_with('['))
}

/// Name of the `[table]` header governing byte offset `at`.
fn enclosing_table(text: &str, at: usize) -> Option<String> {
    let at = at.min(text.len());
    let end = text[at..].find('\n').map_or(text.len(), |i| at + i);
    text[..end]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && !l.starts_with("[["))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
}

/// Amplitude variable index for an excitation or mode key.
pub fn variable_index(key: &str) -> Option<usize> {
    match key {
        "a" | "phi1" => Some(0),
        "b" | "phi2" => Some(1),
        "c" | "phi3" => Some(2),
        _ => None,
    }
}

/// `"lo:hi:n"` into `n` evenly spaced values.
pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected lo:hi:n, got `{s}`"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound `{hi}`"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}`"))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(format!("need finite lo <= hi and n >= 1, got `{s}`"));
    }
    Ok(octabush::acceptance::linspace(lo, hi, n))
}

fn positive(key: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be positive and finite, got {x}")))
    }
}

/// Built model: the cluster or a reduced polynomial system.
pub enum Model {
    Cluster(ClusterModel),
    Reduced(ReducedRhs),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::new("workers", "must be at least 1"));
        }
        if let Some(dt) = self.integrator.dt {
            positive("integrator.dt", dt)?;
        }
        if self.integrator.steps == 0 {
            return Err(ConfigError::new("integrator.steps", "must be at least 1"));
        }
        if self.integrator.stride == Some(0) {
            return Err(ConfigError::new("integrator.stride", "must be at least 1"));
        }
        positive("analysis.closure_threshold", self.analysis.closure_threshold)?;
        positive("analysis.excitation_threshold", self.analysis.excitation_threshold)?;
        match self.model {
            ModelKind::Lj => {
                positive("lj.a", self.lj.a)?;
                positive("lj.b", self.lj.b)?;
            }
            ModelKind::Morse => {
                positive("morse.depth", self.morse.depth)?;
                positive("morse.alpha", self.morse.alpha)?;
                positive("morse.r0", self.morse.r0)?;
            }
            ModelKind::PesFile if self.pes.file.is_none() => {
                return Err(ConfigError::new("pes.file", "required for model pes-file"));
            }
            _ => {}
        }
        if self.model.is_cluster() {
            if let Some(d0) = self.cluster.d0 {
                positive("cluster.d0", d0)?;
            }
            for m in self.cluster.masses {
                positive("cluster.masses", m)?;
            }
        } else {
            for m in self.pes.masses {
                positive("pes.masses", m)?;
            }
        }
        for (k, v) in &self.excite {
            let key = format!("excite.{k}");
            if variable_index(k).is_none() {
                return Err(ConfigError::new(key, "unknown mode; use a|b|c or phi1|phi2|phi3"));
            }
            if !v.is_finite() {
                return Err(ConfigError::new(key, format!("must be finite, got {v}")));
            }
        }
        if !matches!(self.fit.vars.as_str(), "ab" | "abc") {
            return Err(ConfigError::new("fit.vars", format!("expected ab or abc, got `{}`", self.fit.vars)));
        }
        if self.fit.degree == 0 {
            return Err(ConfigError::new("fit.degree", "must be at least 1"));
        }
        if let Some(h) = self.fit.half_width {
            positive("fit.half_width", h)?;
        }
        if self.fit.count.is_some_and(|n| n < 2) {
            return Err(ConfigError::new("fit.count", "must be at least 2"));
        }
        if variable_index(&self.sweep.mode).is_none() {
            return Err(ConfigError::new("sweep.mode", format!("unknown mode `{}`", self.sweep.mode)));
        }
        if let Some(r) = &self.sweep.range {
            parse_range(r).map_err(|e| ConfigError::new("sweep.range", e))?;
        }
        positive("sweep.periods", self.sweep.periods)?;
        positive("sweep.dt", self.sweep.dt)?;
        if self.sweep.steps_per_period < 8 {
            return Err(ConfigError::new("sweep.steps_per_period", "must be at least 8"));
        }
        Ok(())
    }

    /// Initial amplitudes indexed by variable.
    pub fn amplitudes(&self) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (k, v) in &self.excite {
            if let Some(i) = variable_index(k) {
                x[i] += v;
            }
        }
        x
    }

    pub fn build_model(&self) -> Result<Model, ConfigError> {
        fn wrap(key: &'static str) -> impl Fn(octabush::Error) -> ConfigError {
            move |e| ConfigError::new(key, e.to_string())
        }
        let pes = match self.model {
            ModelKind::Lj | ModelKind::Morse => {
                let (key, pot) = match self.model {
                    ModelKind::Lj => ("lj", PairPotential::lennard_jones(self.lj.a, self.lj.b)),
                    _ => ("morse", PairPotential::morse(self.morse.depth, self.morse.alpha, self.morse.r0)),
                };
                let pot = pot.map_err(wrap(key))?;
                let c = &self.cluster;
                let model = match c.d0 {
                    Some(d0) => MoleculeGeometry::new(d0)
                        .and_then(|g| ClusterModel::new(g, pot, c.include_center, c.masses)),
                    None => ClusterModel::at_equilibrium(pot, c.include_center)
                        .and_then(|m| m.with_masses(c.masses)),
                };
                return model.map(Model::Cluster).map_err(wrap("cluster"));
            }
            ModelKind::PesD4h => reference_d4h(),
            ModelKind::PesC4v => reference_c4v(),
            ModelKind::PesFile => {
                let path = self.pes.file.as_ref().expect("validated");
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::new("pes.file", format!("cannot read {}: {e}", path.display())))?;
                PolynomialPes::from_json(&text).map_err(wrap("pes.file"))?
            }
        };
        let rhs = octabush::potentials::reduced_equations(&pes, self.pes.masses).map_err(wrap("pes"))?;
        for (k, v) in &self.excite {
            let i = variable_index(k).expect("validated");
            if *v != 0.0 && i >= rhs.variable_count() {
                return Err(ConfigError::new(
                    format!("excite.{k}"),
                    format!("model has {} amplitude variables", rhs.variable_count()),
                ));
            }
        }
        Ok(Model::Reduced(rhs))
    }
}
