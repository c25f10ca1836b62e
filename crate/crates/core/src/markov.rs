//! Wigner-Weisskopf solution and constant Born-Markov coefficients for a
//! single mode in a continuum bath.

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{occupation, BathSpec, Statistics, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovParams {
    pub omega0: f64,
    /// `Γ₀ = π J(Ω₀)`.
    pub gamma0: f64,
    /// Lamb shift `Δω = -P∫ J(ω)/(ω - Ω₀) dω`.
    pub delta_omega: f64,
    /// Bath occupation at `Ω₀`.
    pub f0: f64,
}

/// Constant `(Γ, Γ̃, Ω̃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BornMarkovCoeffs {
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub omega_tilde: f64,
}

const GL_DEGREE: usize = 24;
const PANELS: usize = 400;

/// `∫ f` over `[a, b]`, composite Gauss-Legendre with panels no wider than `width`.
fn composite(gl: &GaussLegendre, a: f64, b: f64, width: f64, f: &impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = ((b - a) / width).ceil().max(1.0) as usize;
    let step = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let lo = a + i as f64 * step;
            gl.integrate(lo, lo + step, f)
        })
        .sum()
}

/// Principal value `P∫₀^{ω_max} J(ω)/(ω - Ω₀) dω` by singularity subtraction.
pub fn principal_value(bath: &BathSpec, omega0: f64, omega_max: f64) -> Result<f64> {
    if !(omega_max > omega0) {
        return Err(Error::Domain(format!(
            "frequency cutoff {omega_max} must exceed Ω₀ = {omega0}"
        )));
    }
    let j = |w: f64| bath.spectral_density(w).unwrap_or(0.0);
    let j0 = j(omega0);
    let smooth = |w: f64| {
        let x = w - omega0;
        if x == 0.0 {
            0.0
        } else {
            (j(w) - j0) / x
        }
    };
    // Break at Ω₀ and at every table node so each panel sees a smooth integrand.
    let mut breaks = vec![0.0, omega0, omega_max];
    if let BathSpec::Tabulated { omega, .. } = bath {
        breaks.extend(omega.iter().copied().filter(|&w| w > 0.0 && w < omega_max));
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let gl = GaussLegendre::new(GL_DEGREE).expect("valid Gauss-Legendre degree");
    let width = omega_max / PANELS as f64;
    let body: f64 = breaks
        .windows(2)
        .map(|w| composite(&gl, w[0], w[1], width, &smooth))
        .sum();
    Ok(body + j0 * ((omega_max - omega0) / omega0).ln())
}

pub fn ww_params(bath: &BathSpec, omega0: f64, beta: f64, statistics: Statistics) -> Result<MarkovParams> {
    if !(omega0 > 0.0) {
        return Err(Error::Domain(format!("Ω₀ must be positive, got {omega0}")));
    }
    let omega_max = bath.default_omega_max().ok_or_else(|| {
        Error::Unsupported("Markov parameters need a continuum spectral density".into())
    })?;
    let j0 = bath.spectral_density(omega0).unwrap_or(0.0);
    Ok(MarkovParams {
        omega0,
        gamma0: std::f64::consts::PI * j0,
        delta_omega: -principal_value(bath, omega0, omega_max)?,
        f0: occupation(omega0, beta, statistics)?,
    })
}

/// `W(t) = exp[-Γ₀t - i(Ω₀+Δω)t]` at each grid sample.
pub fn ww_solution(params: &MarkovParams, grid: TimeGrid) -> Vec<C64> {
    let rate = C64::new(-params.gamma0, -(params.omega0 + params.delta_omega));
    (0..grid.len()).map(|k| (rate * grid.t(k)).exp()).collect()
}

/// `Ω̃ = Ω₀ + Δω`, `Γ = Γ₀`, `Γ̃ = 2 f(Ω₀) Γ₀`.
pub fn born_markov_coeffs(params: &MarkovParams) -> BornMarkovCoeffs {
    BornMarkovCoeffs {
        gamma: params.gamma0,
        gamma_tilde: 2.0 * params.f0 * params.gamma0,
        omega_tilde: params.omega0 + params.delta_omega,
    }
}
