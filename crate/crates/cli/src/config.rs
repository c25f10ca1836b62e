//! Scenario files. Units: frequencies in the same (arbitrary) unit as
//! `omega0`, times in its inverse, `beta` in inverse frequency.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nonmarkov::lindblad::{default_fock_dim, DensityMatrix};
use nonmarkov::model::{discretize_bath, random_discrete_bath};
use nonmarkov::probe::ProbeConfig;
use nonmarkov::{BathSpec, CMat, Statistics, TimeGrid, UniverseModel, C64};
use serde::{Deserialize, Deserializer};

use crate::error::{core_error, CliError};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemSection,
    pub bath: BathSection,
    pub grid: GridSection,
    pub probe: Option<ProbeSection>,
    pub evolve: Option<EvolveSection>,
    pub oracle: Option<OracleSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum StatisticsTag {
    #[default]
    Bose,
    Fermi,
}

impl From<StatisticsTag> for Statistics {
    fn from(s: StatisticsTag) -> Self {
        match s {
            StatisticsTag::Bose => Statistics::Bose,
            StatisticsTag::Fermi => Statistics::Fermi,
        }
    }
}

/// Either a single mode (`omega0`) or a Hermitian matrix given by real and
/// optional imaginary parts.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default)]
    pub statistics: StatisticsTag,
    pub omega0: Option<f64>,
    pub hamiltonian: Option<Vec<Vec<f64>>>,
    pub hamiltonian_im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BathSection {
    Ohmic {
        lambda: f64,
        cutoff: f64,
        #[serde(default = "infinite", deserialize_with = "beta")]
        beta: f64,
    },
    /// `coupling[i][l]` is `η_il` (rows per system mode).
    Discrete {
        omega: Vec<f64>,
        coupling: Vec<Vec<f64>>,
        coupling_im: Option<Vec<Vec<f64>>>,
        #[serde(default = "infinite", deserialize_with = "beta")]
        beta: f64,
    },
    Tabulated {
        omega: Vec<f64>,
        density: Vec<f64>,
        #[serde(default = "infinite", deserialize_with = "beta")]
        beta: f64,
    },
    Random {
        modes: usize,
        omega_min: f64,
        omega_max: f64,
        max_coupling: f64,
        seed: u64,
        #[serde(default = "infinite", deserialize_with = "beta")]
        beta: f64,
    },
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// A number or the string `"inf"` (zero temperature).
fn beta<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(x) => Ok(x),
        Raw::Int(x) => Ok(x as f64),
        Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
        Raw::Text(s) => Err(serde::de::Error::custom(format!("beta must be a number or \"inf\", got {s:?}"))),
    }
}

impl BathSection {
    pub fn beta(&self) -> f64 {
        match self {
            BathSection::Ohmic { beta, .. }
            | BathSection::Discrete { beta, .. }
            | BathSection::Tabulated { beta, .. }
            | BathSection::Random { beta, .. } => *beta,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, BathSection::Discrete { .. } | BathSection::Random { .. })
    }
}

/// `t_max` with exactly one of `h` or `n_steps`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t_max: f64,
    pub h: Option<f64>,
    pub n_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub delta: f64,
    pub alpha_sq: f64,
    #[serde(default = "half_pi")]
    pub theta: f64,
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Coherent,
    Fock,
    Fermion,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub initial: InitialState,
    #[serde(default)]
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub occupation: f64,
    pub fock_dim: Option<usize>,
    /// Compare moments with the exact propagator.
    #[serde(default = "yes")]
    pub oracle: bool,
    /// Modes used to discretize a continuum bath for the comparison.
    #[serde(default = "default_oracle_modes")]
    pub oracle_modes: usize,
}

fn yes() -> bool {
    true
}

fn default_oracle_modes() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_unitarity_tolerance")]
    pub unitarity_tolerance: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            tolerance: default_tolerance(),
            unitarity_tolerance: default_unitarity_tolerance(),
        }
    }
}

fn default_samples() -> usize {
    101
}

fn default_tolerance() -> f64 {
    1e-5
}

fn default_unitarity_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    /// Revival peaks recorded per point in the sweep index.
    #[serde(default = "default_peaks")]
    pub peaks: usize,
}

fn default_peaks() -> usize {
    3
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: Format,
    /// Write every `stride`-th sample.
    #[serde(default = "one")]
    pub stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: Format::default(),
            stride: 1,
        }
    }
}

fn default_dir() -> String {
    "out".into()
}

fn one() -> usize {
    1
}

/// Reads the file, applies `key.path=value` overrides and deserializes.
/// Returns the config and the raw bytes that were hashed.
pub fn load(path: &Path, overrides: &[String]) -> Result<(Config, Vec<u8>), CliError> {
    let raw = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&raw)
        .map_err(|_| CliError::Config(format!("{} is not valid UTF-8", path.display())))?;
    let config = parse(text, overrides)?;
    let mut hashed = raw.clone();
    for o in overrides {
        hashed.push(b'\n');
        hashed.extend_from_slice(o.as_bytes());
    }
    Ok((config, hashed))
}

pub fn parse(text: &str, overrides: &[String]) -> Result<Config, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: Config = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {item:?} is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {part} is not a section")))?;
    }
    node.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn matrix(re: &[Vec<f64>], im: Option<&[Vec<f64>]>, what: &str) -> Result<CMat, CliError> {
    let rows = re.len();
    let cols = re.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || re.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!("{what} must be a nonempty rectangular array")));
    }
    if let Some(im) = im {
        if im.len() != rows || im.iter().any(|r| r.len() != cols) {
            return Err(CliError::Config(format!("{what}_im must have the same shape as {what}")));
        }
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        C64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

impl Config {
    fn validate(&self) -> Result<(), CliError> {
        match (self.system.omega0, &self.system.hamiltonian) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(CliError::Config(
                    "[system] needs exactly one of omega0 or hamiltonian".into(),
                ))
            }
        }
        if self.system.hamiltonian_im.is_some() && self.system.hamiltonian.is_none() {
            return Err(CliError::Config("[system] hamiltonian_im given without hamiltonian".into()));
        }
        if self.grid.h.is_some() == self.grid.n_steps.is_some() {
            return Err(CliError::Config("[grid] needs exactly one of h or n_steps".into()));
        }
        if self.output.stride == 0 {
            return Err(CliError::Config("[output] stride must be at least 1".into()));
        }
        if let Some(s) = &self.sweep {
            if s.lambdas.is_empty() {
                return Err(CliError::Config("[sweep] lambdas must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        let g = &self.grid;
        let grid = match (g.h, g.n_steps) {
            (Some(h), None) => TimeGrid::with_step(g.t_max, h),
            (None, Some(n)) => TimeGrid::new(g.t_max, n),
            _ => unreachable!("checked in validate"),
        };
        grid.map_err(|e| core_error("grid", e))
    }

    pub fn statistics(&self) -> Statistics {
        self.system.statistics.into()
    }

    pub fn system_matrix(&self) -> Result<CMat, CliError> {
        match (&self.system.omega0, &self.system.hamiltonian) {
            (Some(w), _) => Ok(CMat::from_element(1, 1, C64::new(*w, 0.0))),
            (None, Some(h)) => matrix(h, self.system.hamiltonian_im.as_deref(), "hamiltonian"),
            _ => unreachable!("checked in validate"),
        }
    }

    pub fn bath_spec(&self, n_sys: usize) -> Result<BathSpec, CliError> {
        Ok(match &self.bath {
            BathSection::Ohmic { lambda, cutoff, .. } => BathSpec::Ohmic {
                lambda: *lambda,
                cutoff: *cutoff,
            },
            BathSection::Discrete {
                omega,
                coupling,
                coupling_im,
                ..
            } => {
                let c = matrix(coupling, coupling_im.as_deref(), "coupling")?;
                if c.nrows() != n_sys || c.ncols() != omega.len() {
                    return Err(CliError::Config(format!(
                        "coupling must be {n_sys} × {} (system modes × bath modes), got {} × {}",
                        omega.len(),
                        c.nrows(),
                        c.ncols()
                    )));
                }
                BathSpec::Discrete {
                    omega: omega.clone(),
                    coupling: c,
                }
            }
            BathSection::Tabulated { omega, density, .. } => BathSpec::Tabulated {
                omega: omega.clone(),
                density: density.clone(),
            },
            BathSection::Random {
                modes,
                omega_min,
                omega_max,
                max_coupling,
                seed,
                ..
            } => {
                if !(omega_min < omega_max) {
                    return Err(CliError::Config("[bath] random needs omega_min < omega_max".into()));
                }
                random_discrete_bath(n_sys, *modes, (*omega_min, *omega_max), *max_coupling, *seed)
            }
        })
    }

    pub fn model(&self) -> Result<UniverseModel, CliError> {
        let m = self.system_matrix()?;
        let bath = self.bath_spec(m.nrows())?;
        UniverseModel::new(m, self.statistics(), bath, self.bath.beta()).map_err(|e| core_error("model", e))
    }

    /// Discrete model for the exact propagator; continua are discretized
    /// with `modes` midpoint modes up to their default truncation.
    pub fn oracle_model(&self, model: &UniverseModel, modes: usize) -> Result<UniverseModel, CliError> {
        if !model.bath.is_continuum() {
            return Ok(model.clone());
        }
        let omega_max = model
            .bath
            .default_omega_max()
            .ok_or_else(|| CliError::Config("bath has no frequency range".into()))?;
        let bath = discretize_bath(&model.bath, modes, omega_max).map_err(|e| core_error("oracle", e))?;
        UniverseModel::new(model.system.clone(), model.statistics, bath, model.beta)
            .map_err(|e| core_error("oracle", e))
    }

    /// Probe scenario at coupling `lambda` (the `[bath]` value if `None`).
    pub fn probe(&self, lambda: Option<f64>) -> Result<ProbeConfig, CliError> {
        let p = self
            .probe
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [probe] section".into()))?;
        let BathSection::Ohmic {
            lambda: l0,
            cutoff,
            beta,
        } = self.bath
        else {
            return Err(CliError::Config("the probe needs an ohmic bath".into()));
        };
        if beta.is_finite() {
            return Err(CliError::Config("the probe runs at zero temperature (beta = \"inf\")".into()));
        }
        if self.statistics() != Statistics::Bose {
            return Err(CliError::Config("the probe cavity is a bosonic mode".into()));
        }
        let omega0 = self
            .system
            .omega0
            .ok_or_else(|| CliError::Config("the probe needs a single-mode [system] omega0".into()))?;
        let mut c = ProbeConfig::new(omega0, p.delta, p.alpha_sq, lambda.unwrap_or(l0), cutoff, self.grid()?)
            .map_err(|e| core_error("probe", e))?;
        c.theta = p.theta;
        c.validate().map_err(|e| core_error("probe", e))?;
        Ok(c)
    }

    pub fn initial_state(&self) -> Result<DensityMatrix, CliError> {
        let e = self
            .evolve
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [evolve] section".into()))?;
        let fermi = self.statistics() == Statistics::Fermi;
        let state = match (e.initial, fermi) {
            (InitialState::Fermion, true) => DensityMatrix::fermion(e.occupation),
            (InitialState::Coherent, false) => {
                let alpha = C64::new(e.alpha_re, e.alpha_im);
                DensityMatrix::coherent(alpha, e.fock_dim.unwrap_or_else(|| default_fock_dim(alpha.norm_sqr())))
            }
            (InitialState::Fock, false) => {
                DensityMatrix::fock(e.n, e.fock_dim.unwrap_or_else(|| default_fock_dim(e.n as f64 + 1.0)))
            }
            (InitialState::Fermion, false) => {
                return Err(CliError::Config("initial = \"fermion\" needs fermi statistics".into()))
            }
            (_, true) => {
                return Err(CliError::Config(
                    "fermi statistics need initial = \"fermion\"".into(),
                ))
            }
        };
        state.map_err(|e| core_error("evolve", e))
    }
}
