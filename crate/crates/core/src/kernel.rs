//! Memory kernel `G(t) = ∫ J(ω) e^{-iωt} dω` and noise kernel
//! `G̃(t) = ∫ J(ω) f(ω) e^{-iωt} dω`, exact for discrete baths and by
//! quadrature (or closed form) for continua.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, MatSeq, C64};
use crate::model::{occupation, thermal_density, BathSpec, Statistics, TimeGrid, UniverseModel};

/// Ohmic noise-kernel quadrature runs to this multiple of the cutoff.
const OHMIC_NOISE_OMEGA_FACTOR: f64 = 40.0;
/// Finest spacing (in units of the cutoff) used for Ohmic noise quadrature.
const OHMIC_NOISE_RESOLUTION: f64 = 1e-3;

/// Kernels tabulated on a uniform grid. `g[k] = G(t_k)`, `g_tilde[k] = G̃(t_k)`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub grid: TimeGrid,
    pub g: MatSeq,
    pub g_tilde: MatSeq,
    noise_free: bool,
}

impl KernelTable {
    pub fn build(model: &UniverseModel, grid: TimeGrid) -> Result<Self> {
        let times = grid.times();
        let n_sys = model.n_sys();
        let g = memory_kernel_series(&model.bath, n_sys, &times)?;
        let noise_free = noise_vanishes(model);
        let g_tilde = if noise_free {
            MatSeq::zeros(n_sys, times.len())
        } else {
            noise_kernel_series(&model.bath, n_sys, model.beta, model.statistics, &times)?
        };
        Ok(Self {
            grid,
            g,
            g_tilde,
            noise_free,
        })
    }

    /// `true` when `G̃ ≡ 0` (zero-temperature Bose bath, or a Fermi bath with
    /// every mode above the Fermi level).
    pub fn is_noise_free(&self) -> bool {
        self.noise_free
    }

    pub fn n_sys(&self) -> usize {
        self.g.dim()
    }
}

fn noise_vanishes(model: &UniverseModel) -> bool {
    if !model.is_zero_temperature() {
        return false;
    }
    match (&model.bath, model.statistics) {
        (_, Statistics::Bose) => true,
        (BathSpec::Discrete { omega, .. }, Statistics::Fermi) => omega.iter().all(|&w| w > 0.0),
        (BathSpec::Ohmic { .. }, Statistics::Fermi) => true,
        (BathSpec::Tabulated { omega, density }, Statistics::Fermi) => omega
            .iter()
            .zip(density)
            .all(|(&w, &j)| w > 0.0 || j == 0.0),
    }
}

/// `G(t)` for a single time.
pub fn memory_kernel(bath: &BathSpec, t: f64) -> Result<CMat> {
    check_time(t)?;
    Ok(memory_kernel_series(bath, bath_dim(bath), &[t])?.get(0))
}

/// `G̃(t)` for a single time; zero matrix at zero temperature.
pub fn noise_kernel(bath: &BathSpec, beta: f64, statistics: Statistics, t: f64) -> Result<CMat> {
    check_time(t)?;
    Ok(noise_kernel_series(bath, bath_dim(bath), beta, statistics, &[t])?.get(0))
}

fn bath_dim(bath: &BathSpec) -> usize {
    match bath {
        BathSpec::Discrete { coupling, .. } => coupling.nrows(),
        _ => 1,
    }
}

/// Closed-form Ohmic memory kernel `λ Ω_c² / (1 + iΩ_c t)²`.
pub fn ohmic_memory_kernel(lambda: f64, cutoff: f64, t: f64) -> C64 {
    let denom = C64::new(1.0, cutoff * t);
    C64::new(lambda * cutoff * cutoff, 0.0) / (denom * denom)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("kernel time must be nonnegative, got {t}")));
    }
    Ok(())
}

fn max_time(times: &[f64]) -> Result<f64> {
    let mut t_max: f64 = 0.0;
    for &t in times {
        check_time(t)?;
        t_max = t_max.max(t);
    }
    Ok(t_max)
}

fn check_continuum_dim(bath: &BathSpec, n_sys: usize) -> Result<()> {
    if bath.is_continuum() && n_sys != 1 {
        return Err(Error::Unsupported(format!(
            "continuum bath with {n_sys} system modes"
        )));
    }
    Ok(())
}

pub(crate) fn memory_kernel_series(bath: &BathSpec, n_sys: usize, times: &[f64]) -> Result<MatSeq> {
    let t_max = max_time(times)?;
    check_continuum_dim(bath, n_sys)?;
    match bath {
        BathSpec::Discrete { omega, coupling } => {
            Ok(discrete_series(omega, coupling, |_| Ok(1.0), times)?)
        }
        BathSpec::Ohmic { lambda, cutoff } => {
            let vals: Vec<C64> = times
                .iter()
                .map(|&t| ohmic_memory_kernel(*lambda, *cutoff, t))
                .collect();
            Ok(MatSeq::from_scalars(&vals))
        }
        BathSpec::Tabulated { omega, density } => {
            check_spacing(omega, t_max)?;
            let nodes = trapezoid_nodes(omega, |i, _| Ok(density[i]))?;
            Ok(MatSeq::from_scalars(&fourier_sum(&nodes, times)))
        }
    }
}

pub(crate) fn noise_kernel_series(
    bath: &BathSpec,
    n_sys: usize,
    beta: f64,
    statistics: Statistics,
    times: &[f64],
) -> Result<MatSeq> {
    let t_max = max_time(times)?;
    check_continuum_dim(bath, n_sys)?;
    if !(beta > 0.0) {
        return Err(Error::Domain(format!(
            "inverse temperature must be positive or +inf, got {beta}"
        )));
    }
    match bath {
        BathSpec::Discrete { omega, coupling } => discrete_series(
            omega,
            coupling,
            |w| occupation(w, beta, statistics),
            times,
        ),
        BathSpec::Ohmic { cutoff, .. } => {
            if beta == f64::INFINITY && statistics == Statistics::Bose {
                return Ok(MatSeq::zeros(1, times.len()));
            }
            let omega = ohmic_noise_grid(*cutoff, t_max);
            let nodes = trapezoid_nodes(&omega, |_, w| thermal_density(bath, w, beta, statistics))?;
            Ok(MatSeq::from_scalars(&fourier_sum(&nodes, times)))
        }
        BathSpec::Tabulated { omega, .. } => {
            check_spacing(omega, t_max)?;
            let nodes = trapezoid_nodes(omega, |_, w| thermal_density(bath, w, beta, statistics))?;
            Ok(MatSeq::from_scalars(&fourier_sum(&nodes, times)))
        }
    }
}

/// Largest frequency spacing that resolves `e^{-iωt}` up to `t_max`.
pub fn max_frequency_spacing(t_max: f64) -> f64 {
    if t_max > 0.0 {
        PI / (4.0 * t_max)
    } else {
        f64::INFINITY
    }
}

fn check_spacing(omega: &[f64], t_max: f64) -> Result<()> {
    let limit = max_frequency_spacing(t_max);
    let spacing = omega
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    if spacing > limit {
        return Err(Error::GridTooCoarse {
            spacing,
            limit,
            t_max,
        });
    }
    Ok(())
}

fn ohmic_noise_grid(cutoff: f64, t_max: f64) -> Vec<f64> {
    let upper = OHMIC_NOISE_OMEGA_FACTOR * cutoff;
    let dw = max_frequency_spacing(t_max).min(OHMIC_NOISE_RESOLUTION * cutoff);
    let n = (upper / dw).ceil() as usize;
    let dw = upper / n as f64;
    (0..=n).map(|i| i as f64 * dw).collect()
}

/// Composite-trapezoid nodes `(ω_i, weight_i · value_i)`.
fn trapezoid_nodes<F>(omega: &[f64], mut value: F) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(usize, f64) -> Result<f64>,
{
    let n = omega.len();
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let left = if i > 0 { omega[i] - omega[i - 1] } else { 0.0 };
        let right = if i + 1 < n { omega[i + 1] - omega[i] } else { 0.0 };
        let weight = 0.5 * (left + right);
        if weight == 0.0 {
            continue;
        }
        let v = value(i, omega[i])?;
        if v != 0.0 {
            nodes.push((omega[i], weight * v));
        }
    }
    Ok(nodes)
}

/// `Σ_i c_i e^{-iω_i t}` at each time.
fn fourier_sum(nodes: &[(f64, f64)], times: &[f64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); times.len()];
    if let Some(h) = uniform_step(times) {
        for &(w, c) in nodes {
            let step = C64::from_polar(1.0, -w * h);
            let mut phase = C64::new(c, 0.0);
            for acc in out.iter_mut() {
                *acc += phase;
                phase *= step;
            }
        }
    } else {
        for (acc, &t) in out.iter_mut().zip(times) {
            for &(w, c) in nodes {
                *acc += C64::from_polar(c, -w * t);
            }
        }
    }
    out
}

/// Step `h` when `times` is `0, h, 2h, ...` with at least two samples.
fn uniform_step(times: &[f64]) -> Option<f64> {
    if times.len() < 2 || times[0] != 0.0 {
        return None;
    }
    let h = times[1];
    let uniform = times
        .iter()
        .enumerate()
        .all(|(k, &t)| (t - k as f64 * h).abs() <= 1e-12 * t.max(1.0));
    uniform.then_some(h)
}

fn discrete_series<F>(omega: &[f64], coupling: &CMat, mut weight: F, times: &[f64]) -> Result<MatSeq>
where
    F: FnMut(f64) -> Result<f64>,
{
    let d = coupling.nrows();
    let mut out = MatSeq::zeros(d, times.len());
    let uniform = uniform_step(times);
    let mut outer = vec![C64::new(0.0, 0.0); d * d];
    for (l, &w) in omega.iter().enumerate() {
        let f = weight(w)?;
        if f == 0.0 {
            continue;
        }
        // η_il η*_jl f_l, column-major.
        for j in 0..d {
            for i in 0..d {
                outer[i + d * j] = coupling[(i, l)] * coupling[(j, l)].conj() * f;
            }
        }
        let step = uniform.map(|h| C64::from_polar(1.0, -w * h));
        let mut phase = C64::new(1.0, 0.0);
        for (k, &t) in times.iter().enumerate() {
            let p = match step {
                Some(s) => {
                    let p = phase;
                    phase *= s;
                    p
                }
                None => C64::from_polar(1.0, -w * t),
            };
            for (acc, o) in out.slice_mut(k).iter_mut().zip(&outer) {
                *acc += o * p;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::discretize_bath;

    fn single_mode(omega: f64, eta: C64) -> BathSpec {
        BathSpec::Discrete {
            omega: vec![omega],
            coupling: CMat::from_element(1, 1, eta),
        }
    }

    #[test]
    fn single_mode_kernel() {
        let eta = C64::new(0.3, -0.4);
        let g = memory_kernel(&single_mode(1.3, eta), 2.0).unwrap()[(0, 0)];
        let want = C64::from_polar(eta.norm_sqr(), -1.3 * 2.0);
        assert!((g - want).norm() < 1e-15);
    }

    #[test]
    fn ohmic_kernel_at_origin() {
        let g = memory_kernel(&BathSpec::Ohmic { lambda: 0.1, cutoff: 10.0 }, 0.0).unwrap();
        assert!((g[(0, 0)] - C64::new(10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn negative_time_is_rejected() {
        let bath = BathSpec::Ohmic { lambda: 0.1, cutoff: 10.0 };
        assert!(matches!(memory_kernel(&bath, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_temperature_noise_vanishes() {
        let bath = single_mode(1.0, C64::new(0.5, 0.0));
        let g = noise_kernel(&bath, f64::INFINITY, Statistics::Bose, 3.0).unwrap();
        assert_eq!(g[(0, 0)], C64::new(0.0, 0.0));
        let ohmic = BathSpec::Ohmic { lambda: 0.1, cutoff: 10.0 };
        let g = noise_kernel(&ohmic, f64::INFINITY, Statistics::Bose, 3.0).unwrap();
        assert_eq!(g[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn unit_occupation_noise_kernel() {
        let beta = 1.0;
        let w = std::f64::consts::LN_2;
        let eta = C64::new(0.2, 0.1);
        let g = noise_kernel(&single_mode(w, eta), beta, Statistics::Bose, 0.7).unwrap();
        let want = C64::from_polar(eta.norm_sqr(), -w * 0.7);
        assert!((g[(0, 0)] - want).norm() < 1e-14);
    }

    #[test]
    fn discrete_kernel_at_origin_is_hermitian() {
        let bath = crate::model::random_discrete_bath(3, 7, (0.5, 1.5), 0.3, 11);
        let g0 = memory_kernel(&bath, 0.0).unwrap();
        assert!(crate::linalg::hermiticity_residual(&g0) < 1e-12);
        let min = crate::linalg::hermitian_eigenvalues(&g0)[0];
        assert!(min > -1e-12);
    }

    #[test]
    fn discrete_kernel_is_self_consistent_after_round_trip() {
        let spec = BathSpec::Ohmic { lambda: 0.05, cutoff: 5.0 };
        let bath = discretize_bath(&spec, 64, 50.0).unwrap();
        let table = memory_kernel_series(&bath, 1, &[0.0, 0.5, 1.0]).unwrap();
        for (k, t) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            let single = memory_kernel(&bath, t).unwrap()[(0, 0)];
            assert!((table.at(k, 0, 0) - single).norm() < 1e-12);
        }
    }

    #[test]
    fn tabulated_spacing_is_enforced() {
        let omega: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let density = vec![1.0; omega.len()];
        let bath = BathSpec::Tabulated { omega, density };
        assert!(memory_kernel(&bath, 1.0).is_ok());
        assert!(matches!(
            memory_kernel(&bath, 100.0),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn flat_table_matches_sinc() {
        // ∫₀^a e^{-iωt} dω = (1 - e^{-iat}) / (it)
        let omega: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.0005).collect();
        let density = vec![1.0; omega.len()];
        let bath = BathSpec::Tabulated { omega, density };
        let t = 3.0;
        let g = memory_kernel(&bath, t).unwrap()[(0, 0)];
        let want = (C64::new(1.0, 0.0) - C64::from_polar(1.0, -2.0 * t)) / C64::new(0.0, t);
        assert!((g - want).norm() < 1e-6);
    }
}
