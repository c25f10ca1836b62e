//! Dispersive probe: a cavity mode coupled to a zero-temperature Ohmic bath
//! and read out by an atom through `δ a†a σ_z`.
//!
//! For a coherent initial field `|α⟩` the atomic coherence is
//!
//! ```text
//! D(t) = ½ exp[|α|² (W_g*(t) W_e(t) + J₃(t) - 1)]
//! J₃(t) = ∫₀ᵗ∫₀ᵗ W_g*(τ) G(τ-τ′) W_e(τ′) dτ dτ′
//! ```
//!
//! where `W_e`, `W_g` are the Green functions for `M = ω₀ + δ` and
//! `M = ω₀ - δ`. Without a bath `D₀ = ½ exp[|α|²(e^{-2iδt} - 1)]`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::kernel::{ohmic_memory_kernel, KernelTable};
use crate::linalg::C64;
use crate::markov::{ww_params, MarkovParams};
use crate::model::{BathSpec, Statistics, TimeGrid, UniverseModel};
use crate::volterra::{solve_w, WSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub omega0: f64,
    pub delta: f64,
    pub alpha_sq: f64,
    pub lambda: f64,
    pub cutoff: f64,
    /// Ramsey pulse angle; only `π/2` has a population readout.
    pub theta: f64,
    pub grid: TimeGrid,
}

impl ProbeConfig {
    pub fn new(omega0: f64, delta: f64, alpha_sq: f64, lambda: f64, cutoff: f64, grid: TimeGrid) -> Result<Self> {
        let c = Self {
            omega0,
            delta,
            alpha_sq,
            lambda,
            cutoff,
            theta: FRAC_PI_2,
            grid,
        };
        c.validate()?;
        Ok(c)
    }

    /// `δ = g²/Δ` from the atom-field coupling and detuning.
    pub fn dispersive_shift(g: f64, detuning: f64) -> Result<f64> {
        if detuning == 0.0 || !detuning.is_finite() {
            return Err(Error::Domain("detuning must be finite and nonzero".into()));
        }
        Ok(g * g / detuning)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Domain(format!("δ must be positive, got {}", self.delta)));
        }
        if !(self.alpha_sq >= 0.0) {
            return Err(Error::Domain(format!("|α|² must be ≥ 0, got {}", self.alpha_sq)));
        }
        if !(self.theta > 0.0 && self.theta <= PI) {
            return Err(Error::Domain(format!("θ must lie in (0, π], got {}", self.theta)));
        }
        if !(self.lambda >= 0.0 && self.cutoff > 0.0) {
            return Err(Error::Domain("Ohmic bath needs λ ≥ 0 and Ω_c > 0".into()));
        }
        if !(self.omega0 - self.delta > 0.0) {
            return Err(Error::Domain("both branch frequencies ω₀ ± δ must be positive".into()));
        }
        Ok(())
    }

    pub fn bath(&self) -> BathSpec {
        BathSpec::Ohmic {
            lambda: self.lambda,
            cutoff: self.cutoff,
        }
    }

    /// Zero-temperature model for the branch with cavity frequency `omega`.
    fn branch(&self, omega: f64) -> Result<UniverseModel> {
        UniverseModel::scalar(omega, Statistics::Bose, self.bath(), f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub times: Vec<f64>,
    pub d: Vec<C64>,
    pub d0: Vec<C64>,
    pub d_markov: Vec<C64>,
    pub pi_g: Vec<f64>,
    pub pi_e: Vec<f64>,
}

/// `D₀(t) = ½ exp[|α|²(e^{-2iδt} - 1)]`.
pub fn closed_decoherence(config: &ProbeConfig) -> Vec<C64> {
    let g = config.grid;
    (0..g.len())
        .map(|k| {
            let z = C64::from_polar(1.0, -2.0 * config.delta * g.t(k)) - 1.0;
            0.5 * (config.alpha_sq * z).exp()
        })
        .collect()
}

/// `½ exp[|α|²(W_g* W_e + J₃ - 1)]` from the two Green functions and their
/// memory convolutions `u = ∫₀ᵗ G(t-τ) W(τ) dτ`. `J₃` is accumulated from
/// `dJ₃/dt = W_g* u_e + u_g* W_e` by the trapezoid rule.
fn assemble(alpha_sq: f64, h: f64, wg: &[C64], ug: &[C64], we: &[C64], ue: &[C64]) -> Vec<C64> {
    let rate = |k: usize| wg[k].conj() * ue[k] + ug[k].conj() * we[k];
    let mut j3 = C64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(wg.len());
    for k in 0..wg.len() {
        if k > 0 {
            j3 += 0.5 * h * (rate(k - 1) + rate(k));
        }
        out.push(0.5 * (alpha_sq * (wg[k].conj() * we[k] + j3 - 1.0)).exp());
    }
    out
}

fn branch_solutions(config: &ProbeConfig) -> Result<(WSolution, WSolution)> {
    let solve = |omega: f64| -> Result<WSolution> {
        let model = config.branch(omega)?;
        let kernels = KernelTable::build(&model, config.grid)?;
        solve_w(&model, &kernels)
    };
    let (g, e) = rayon::join(
        || solve(config.omega0 - config.delta),
        || solve(config.omega0 + config.delta),
    );
    Ok((g?, e?))
}

/// Exact `D(t)` from two Volterra solves.
pub fn exact_decoherence(config: &ProbeConfig) -> Result<Vec<C64>> {
    config.validate()?;
    let (g, e) = branch_solutions(config)?;
    Ok(assemble(
        config.alpha_sq,
        config.grid.h(),
        &g.w.diagonal_entry(0),
        &g.memory.diagonal_entry(0),
        &e.w.diagonal_entry(0),
        &e.memory.diagonal_entry(0),
    ))
}

/// Memory convolution of the exponential `W(t) = e^{-κt}` with the Ohmic
/// kernel, using `W(τ+h) = W(h) W(τ)`:
/// `u_{k+1} = e^{-κh} u_k + (h/2)[G_{k+1} + G_k e^{-κh}]`.
fn exponential_convolution(kappa: C64, g: &[C64], h: f64) -> Vec<C64> {
    let step = (-kappa * h).exp();
    let mut u = Vec::with_capacity(g.len());
    u.push(C64::new(0.0, 0.0));
    for k in 1..g.len() {
        let prev = u[k - 1];
        u.push(step * prev + 0.5 * h * (g[k] + g[k - 1] * step));
    }
    u
}

/// Markov baseline: the same `D` with both Green functions replaced by their
/// Wigner-Weisskopf exponentials.
pub fn markov_decoherence(config: &ProbeConfig) -> Result<Vec<C64>> {
    config.validate()?;
    let grid = config.grid;
    let h = grid.h();
    let g: Vec<C64> = (0..grid.len())
        .map(|k| ohmic_memory_kernel(config.lambda, config.cutoff, grid.t(k)))
        .collect();
    let branch = |omega: f64| -> Result<(Vec<C64>, Vec<C64>)> {
        let p: MarkovParams = ww_params(&config.bath(), omega, f64::INFINITY, Statistics::Bose)?;
        let kappa = C64::new(p.gamma0, p.omega0 + p.delta_omega);
        let w: Vec<C64> = (0..grid.len()).map(|k| (-kappa * grid.t(k)).exp()).collect();
        let u = exponential_convolution(kappa, &g, h);
        Ok((w, u))
    };
    let (wg, ug) = branch(config.omega0 - config.delta)?;
    let (we, ue) = branch(config.omega0 + config.delta)?;
    Ok(assemble(config.alpha_sq, h, &wg, &ug, &we, &ue))
}

/// `Π_g = ½ + Re D`, `Π_e = ½ - Re D` after a `π/2` Ramsey pulse.
pub fn ramsey_populations(d: &[C64], theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if (theta - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "population readout is defined for θ = π/2 only, got {theta}"
        )));
    }
    Ok(d.iter().map(|z| (0.5 + z.re, 0.5 - z.re)).unzip())
}

pub fn run_probe(config: &ProbeConfig) -> Result<ProbeResult> {
    config.validate()?;
    let (d, d_markov) = rayon::join(|| exact_decoherence(config), || markov_decoherence(config));
    let d = d?;
    let (pi_g, pi_e) = ramsey_populations(&d, config.theta)?;
    Ok(ProbeResult {
        times: config.grid.times(),
        d,
        d0: closed_decoherence(config),
        d_markov: d_markov?,
        pi_g,
        pi_e,
    })
}

/// Revival maxima of `|D|`: the first within `[π/2δ, 3π/2δ]`, each later one
/// within half a period of the previous peak plus the last observed period.
pub fn revival_peaks(times: &[f64], values: &[f64], delta: f64, count: usize) -> Vec<(f64, f64)> {
    let argmax = |lo: f64, hi: f64| -> Option<(f64, f64)> {
        times
            .iter()
            .zip(values)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(t, v)| (*t, *v))
    };
    let end = times.last().copied().unwrap_or(0.0);
    let mut period = PI / delta;
    let mut peaks: Vec<(f64, f64)> = Vec::with_capacity(count);
    let mut prev = 0.0;
    while peaks.len() < count {
        let centre = prev + period;
        let (lo, hi) = (centre - 0.5 * period, centre + 0.5 * period);
        if hi > end {
            break;
        }
        let Some(p) = argmax(lo, hi) else { break };
        period = p.0 - prev;
        prev = p.0;
        peaks.push(p);
    }
    peaks
}
