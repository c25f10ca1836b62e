//! System + bath model: quadratic system Hamiltonian, bath description,
//! statistics and temperature.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_residual, hermitian_eigenvalues, CMat, C64};

/// Default Ohmic truncation in units of the cutoff frequency.
pub const OHMIC_OMEGA_MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Bose,
    Fermi,
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistics::Bose => write!(f, "bose"),
            Statistics::Fermi => write!(f, "fermi"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BathSpec {
    /// Finite set of bath modes. `coupling` is `n_sys × N_b` with entries `η_il`.
    Discrete { omega: Vec<f64>, coupling: CMat },
    /// `J(ω) = λ ω exp(-ω/Ω_c)`, scalar systems only.
    Ohmic { lambda: f64, cutoff: f64 },
    /// Piecewise-linear `J(ω)` on a strictly increasing grid, scalar systems only.
    Tabulated { omega: Vec<f64>, density: Vec<f64> },
}

impl BathSpec {
    pub fn is_continuum(&self) -> bool {
        !matches!(self, BathSpec::Discrete { .. })
    }

    /// Continuum spectral density `J(ω)`; `None` for discrete baths.
    pub fn spectral_density(&self, omega: f64) -> Option<f64> {
        match self {
            BathSpec::Discrete { .. } => None,
            BathSpec::Ohmic { lambda, cutoff } => Some(if omega <= 0.0 {
                0.0
            } else {
                lambda * omega * (-omega / cutoff).exp()
            }),
            BathSpec::Tabulated { omega: grid, density } => {
                Some(interpolate(grid, density, omega))
            }
        }
    }

    /// Upper frequency used when a continuum has to be truncated.
    pub fn default_omega_max(&self) -> Option<f64> {
        match self {
            BathSpec::Discrete { .. } => None,
            BathSpec::Ohmic { cutoff, .. } => Some(OHMIC_OMEGA_MAX_FACTOR * cutoff),
            BathSpec::Tabulated { omega, .. } => omega.last().copied(),
        }
    }

    pub fn n_modes(&self) -> Option<usize> {
        match self {
            BathSpec::Discrete { omega, .. } => Some(omega.len()),
            _ => None,
        }
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if grid.is_empty() || x < grid[0] || x > grid[grid.len() - 1] {
        return 0.0;
    }
    if grid.len() == 1 {
        return values[0];
    }
    let idx = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
    let (x0, x1) = (grid[idx - 1], grid[idx]);
    let (y0, y1) = (values[idx - 1], values[idx]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Quadratic system Hamiltonian `M`, bath, statistics and inverse temperature.
/// `beta = f64::INFINITY` denotes zero temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct UniverseModel {
    pub system: CMat,
    pub statistics: Statistics,
    pub bath: BathSpec,
    pub beta: f64,
}

impl UniverseModel {
    /// Builds a model and rejects it if the report has fatal findings.
    pub fn new(system: CMat, statistics: Statistics, bath: BathSpec, beta: f64) -> Result<Self> {
        let model = Self {
            system,
            statistics,
            bath,
            beta,
        };
        let report = validate_model(&model);
        if let Some(issue) = report.fatal().next() {
            return Err(Error::InvalidModel(issue.to_string()));
        }
        Ok(model)
    }

    /// Single-mode system of frequency `omega0`.
    pub fn scalar(omega0: f64, statistics: Statistics, bath: BathSpec, beta: f64) -> Result<Self> {
        Self::new(
            CMat::from_element(1, 1, C64::new(omega0, 0.0)),
            statistics,
            bath,
            beta,
        )
    }

    pub fn n_sys(&self) -> usize {
        self.system.nrows()
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta == f64::INFINITY
    }

    /// Per-mode occupations of a discrete bath.
    pub fn bath_occupations(&self) -> Result<Vec<f64>> {
        match &self.bath {
            BathSpec::Discrete { omega, .. } => omega
                .iter()
                .map(|&w| occupation(w, self.beta, self.statistics))
                .collect(),
            _ => Err(Error::Unsupported(
                "bath occupations require a discrete bath".into(),
            )),
        }
    }
}

/// Uniform time grid `t_k = k h`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Domain(format!("t_max must be positive, got {t_max}")));
        }
        if n_steps == 0 {
            return Err(Error::Domain("n_steps must be positive".into()));
        }
        Ok(Self { t_max, n_steps })
    }

    /// Grid with step closest to (and not above) `h`.
    pub fn with_step(t_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("step must be positive, got {h}")));
        }
        Self::new(t_max, (t_max / h - 1e-9).ceil().max(1.0) as usize)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn h(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    /// Number of samples, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t(k)).collect()
    }

    /// Index of the sample nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.h()).round().max(0.0) as usize).min(self.n_steps)
    }
}

/// Mean occupation of a bath mode of frequency `omega`.
pub fn occupation(omega: f64, beta: f64, statistics: Statistics) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!(
            "inverse temperature must be positive or +inf, got {beta}"
        )));
    }
    if !omega.is_finite() {
        return Err(Error::Domain(format!("non-finite frequency {omega}")));
    }
    match statistics {
        Statistics::Bose => {
            if omega <= 0.0 {
                return Err(Error::Domain(format!(
                    "Bose occupation undefined for beta*omega = {}",
                    beta * omega
                )));
            }
            if beta == f64::INFINITY {
                return Ok(0.0);
            }
            Ok(1.0 / (beta * omega).exp_m1())
        }
        Statistics::Fermi => {
            if beta == f64::INFINITY {
                return Ok(if omega > 0.0 {
                    0.0
                } else if omega < 0.0 {
                    1.0
                } else {
                    0.5
                });
            }
            let x = beta * omega;
            // 1/(e^x + 1) written to stay finite for large |x|.
            Ok(if x >= 0.0 {
                let e = (-x).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + x.exp())
            })
        }
    }
}

/// `J(ω) f(ω)` with the finite `ω → 0` limit of the Bose integrand.
pub(crate) fn thermal_density(bath: &BathSpec, omega: f64, beta: f64, stats: Statistics) -> Result<f64> {
    let j = bath.spectral_density(omega).unwrap_or(0.0);
    if beta == f64::INFINITY {
        return Ok(match stats {
            Statistics::Bose => 0.0,
            Statistics::Fermi => {
                if omega < 0.0 {
                    j
                } else if omega == 0.0 {
                    0.5 * j
                } else {
                    0.0
                }
            }
        });
    }
    if stats == Statistics::Bose && omega <= 0.0 {
        if omega == 0.0 {
            // J(ω)/(βω) at ω → 0, from the slope of J at the origin.
            let eps = 1e-6 * bath.default_omega_max().unwrap_or(1.0);
            let slope = bath.spectral_density(eps).unwrap_or(0.0) / eps;
            return Ok(slope / beta);
        }
        if j == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(j * occupation(omega, beta, stats)?)
}

/// Midpoint discretization of a continuum bath into `n_modes` discrete modes
/// on `(0, omega_max]`, with `|η_l|² = J(ω_l) Δω`.
pub fn discretize_bath(spec: &BathSpec, n_modes: usize, omega_max: f64) -> Result<BathSpec> {
    if !spec.is_continuum() {
        return Err(Error::Unsupported("bath is already discrete".into()));
    }
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::Domain(format!("omega_max must be positive, got {omega_max}")));
    }
    if n_modes == 0 {
        return Err(Error::Domain("n_modes must be at least 1".into()));
    }
    let dw = omega_max / n_modes as f64;
    let omega: Vec<f64> = (0..n_modes).map(|l| (l as f64 + 0.5) * dw).collect();
    let coupling = CMat::from_fn(1, n_modes, |_, l| {
        let j = spec.spectral_density(omega[l]).unwrap_or(0.0).max(0.0);
        C64::new((j * dw).sqrt(), 0.0)
    });
    Ok(BathSpec::Discrete { omega, coupling })
}

/// Random discrete bath for verification runs; reproducible for a given seed.
pub fn random_discrete_bath(
    n_sys: usize,
    n_modes: usize,
    omega_range: (f64, f64),
    max_coupling: f64,
    seed: u64,
) -> BathSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega: Vec<f64> = (0..n_modes)
        .map(|_| rng.random_range(omega_range.0..omega_range.1))
        .collect();
    let coupling = CMat::from_fn(n_sys, n_modes, |_, _| {
        let r = max_coupling * rng.random::<f64>();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        C64::from_polar(r, phi)
    });
    BathSpec::Discrete { omega, coupling }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelIssue {
    NonHermitian { residual: f64 },
    ComplexSpectrum { max_imag: f64 },
    NotPositiveDefinite { min_eigenvalue: f64 },
    EmptySystem,
    CouplingShape { expected: (usize, usize), found: (usize, usize) },
    NonFiniteFrequency { index: usize },
    NegativeCoupling { lambda: f64 },
    NonPositiveCutoff { cutoff: f64 },
    GridNotIncreasing { index: usize },
    NegativeDensity { index: usize },
    TableLength { omega: usize, density: usize },
    ContinuumMultiMode { n_sys: usize },
    InvalidBeta { beta: f64 },
}

impl ModelIssue {
    /// Everything except a non-positive-definite `M` prevents a run.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, ModelIssue::NotPositiveDefinite { .. })
    }
}

impl fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelIssue::NonHermitian { residual } => {
                write!(f, "system matrix is not Hermitian (max |M - M†| = {residual:.3e})")
            }
            ModelIssue::ComplexSpectrum { max_imag } => {
                write!(f, "system matrix has complex eigenvalues (max |Im| = {max_imag:.3e})")
            }
            ModelIssue::NotPositiveDefinite { min_eigenvalue } => write!(
                f,
                "system matrix is not positive definite (min eigenvalue {min_eigenvalue:.6})"
            ),
            ModelIssue::EmptySystem => write!(f, "system matrix is empty or not square"),
            ModelIssue::CouplingShape { expected, found } => write!(
                f,
                "coupling matrix has shape {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            ModelIssue::NonFiniteFrequency { index } => {
                write!(f, "bath frequency {index} is not finite")
            }
            ModelIssue::NegativeCoupling { lambda } => {
                write!(f, "Ohmic coupling must be nonnegative, got {lambda}")
            }
            ModelIssue::NonPositiveCutoff { cutoff } => {
                write!(f, "Ohmic cutoff must be positive, got {cutoff}")
            }
            ModelIssue::GridNotIncreasing { index } => {
                write!(f, "tabulated frequency grid not strictly increasing at {index}")
            }
            ModelIssue::NegativeDensity { index } => {
                write!(f, "tabulated spectral density negative at {index}")
            }
            ModelIssue::TableLength { omega, density } => write!(
                f,
                "tabulated grid has {omega} frequencies but {density} density samples"
            ),
            ModelIssue::ContinuumMultiMode { n_sys } => write!(
                f,
                "unsupported combination: continuum bath with {n_sys} system modes (only 1 supported)"
            ),
            ModelIssue::InvalidBeta { beta } => {
                write!(f, "inverse temperature must be positive or +inf, got {beta}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelReport {
    pub issues: Vec<ModelIssue>,
}

impl ModelReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.fatal().next().is_none()
    }

    pub fn fatal(&self) -> impl Iterator<Item = &ModelIssue> {
        self.issues.iter().filter(|i| i.is_fatal())
    }
}

/// Lists every invariant violation of `model`. Never fails.
pub fn validate_model(model: &UniverseModel) -> ModelReport {
    let mut issues = Vec::new();
    let m = &model.system;
    let n_sys = m.nrows();
    if n_sys == 0 || m.ncols() != n_sys {
        issues.push(ModelIssue::EmptySystem);
    } else {
        let residual = hermiticity_residual(m);
        if residual > 1e-12 || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            issues.push(ModelIssue::NonHermitian { residual });
            let max_imag = m
                .clone()
                .try_schur(1e-14, 10_000)
                .and_then(|s| s.eigenvalues())
                .map_or(f64::INFINITY, |ev| ev.iter().fold(0.0f64, |a, z| a.max(z.im.abs())));
            if max_imag > 1e-10 {
                issues.push(ModelIssue::ComplexSpectrum { max_imag });
            }
        } else {
            let min = hermitian_eigenvalues(m)[0];
            if min <= 0.0 {
                issues.push(ModelIssue::NotPositiveDefinite { min_eigenvalue: min });
            }
        }
    }
    if !(model.beta > 0.0) {
        issues.push(ModelIssue::InvalidBeta { beta: model.beta });
    }
    match &model.bath {
        BathSpec::Discrete { omega, coupling } => {
            for (index, w) in omega.iter().enumerate() {
                if !w.is_finite() {
                    issues.push(ModelIssue::NonFiniteFrequency { index });
                }
            }
            let expected = (n_sys, omega.len());
            let found = (coupling.nrows(), coupling.ncols());
            if expected != found {
                issues.push(ModelIssue::CouplingShape { expected, found });
            }
        }
        BathSpec::Ohmic { lambda, cutoff } => {
            if !(*lambda >= 0.0) {
                issues.push(ModelIssue::NegativeCoupling { lambda: *lambda });
            }
            if !(*cutoff > 0.0) {
                issues.push(ModelIssue::NonPositiveCutoff { cutoff: *cutoff });
            }
        }
        BathSpec::Tabulated { omega, density } => {
            if omega.len() != density.len() || omega.is_empty() {
                issues.push(ModelIssue::TableLength {
                    omega: omega.len(),
                    density: density.len(),
                });
            }
            for index in 1..omega.len() {
                if !(omega[index] > omega[index - 1]) {
                    issues.push(ModelIssue::GridNotIncreasing { index });
                }
            }
            for (index, j) in density.iter().enumerate() {
                if !(*j >= 0.0) {
                    issues.push(ModelIssue::NegativeDensity { index });
                }
            }
        }
    }
    if model.bath.is_continuum() && n_sys != 1 {
        issues.push(ModelIssue::ContinuumMultiMode { n_sys });
    }
    ModelReport { issues }
}
