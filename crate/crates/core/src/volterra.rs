//! Matrix Volterra integro-differential solver for the system Green function
//!
//! ```text
//! Ẇ(t) + i M W(t) + ∫₀ᵗ G(t-τ) W(τ) dτ = 0,    W(0) = I
//! ```
//!
//! together with the bath block `T(t)`, the thermal matrix
//! `V(t) = ∫∫ W(τ₁) G̃(τ₂-τ₁) W†(τ₂)` and its time derivative.
//!
//! The solver integrates in a frame rotating at `ω_r = Re tr(M)/n`, i.e. it
//! propagates `Y(t) = e^{iω_r t} W(t)`. A scalar shift commutes with every
//! matrix, so the kernel keeps its Toeplitz structure (`G(s) e^{iω_r s}`) and
//! the dominant system phase is carried exactly instead of by the trapezoid.

use crate::coefficients::{decay_matrices_series, Rates, DEFAULT_COND_THRESHOLD};
use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::linalg::{gemm_acc, hermitize, inverse, CMat, MatSeq, C64, I};
use crate::model::{BathSpec, Statistics, TimeGrid, UniverseModel};

/// `W`, `Ẇ` and the memory integral `∫₀ᵗ G(t-τ)W(τ)dτ` on a grid.
#[derive(Debug, Clone)]
pub struct WSolution {
    pub grid: TimeGrid,
    pub w: MatSeq,
    pub w_dot: MatSeq,
    pub memory: MatSeq,
}

/// Solves for `W(t)` with second-order product integration (trapezoid in time
/// and in the memory integral); each step is implicit in `W[k]`.
pub fn solve_w(model: &UniverseModel, kernels: &KernelTable) -> Result<WSolution> {
    if kernels.n_sys() != model.n_sys() {
        return Err(Error::Domain(format!(
            "kernel dimension {} does not match system dimension {}",
            kernels.n_sys(),
            model.n_sys()
        )));
    }
    solve_with_kernel(&model.system, &kernels.g, kernels.grid)
}

pub(crate) fn solve_with_kernel(system: &CMat, g: &MatSeq, grid: TimeGrid) -> Result<WSolution> {
    let d = system.nrows();
    let n = grid.len();
    if g.len() < n || g.dim() != d {
        return Err(Error::Domain("kernel table does not cover the grid".into()));
    }
    let h = grid.h();
    let omega_ref = system.trace().re / d as f64;
    let shifted = system - CMat::identity(d, d).scale(omega_ref);
    let minus_i_shifted = shifted.map(|z| -I * z);

    // Rotated kernel G(t_k) e^{iω_r t_k}.
    let mut gr = MatSeq::zeros(d, n);
    for k in 0..n {
        let phase = C64::from_polar(1.0, omega_ref * grid.t(k));
        for (dst, src) in gr.slice_mut(k).iter_mut().zip(g.slice(k)) {
            *dst = src * phase;
        }
    }

    let ident = CMat::identity(d, d);
    let lhs = &ident + (shifted.map(|z| I * z) + gr.get(0).scale(0.5 * h)).scale(0.5 * h);
    let lhs_inv = inverse(&lhs).ok_or(Error::NonConvergence { t: grid.t(1.min(n - 1)) })?;
    if lhs_inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence { t: grid.t(1.min(n - 1)) });
    }

    let mut y = MatSeq::zeros(d, n);
    let mut conv = MatSeq::zeros(d, n);
    let mut rate = MatSeq::zeros(d, n);
    y.set(0, &ident);
    rate.set(0, &(&minus_i_shifted * &ident));

    let mut hist = vec![C64::new(0.0, 0.0); d * d];
    for k in 1..n {
        hist.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        gemm_acc(&mut hist, gr.slice(k), y.slice(0), d);
        hist.iter_mut().for_each(|z| *z *= 0.5);
        for j in 1..k {
            gemm_acc(&mut hist, gr.slice(k - j), y.slice(j), d);
        }
        let hist_m = CMat::from_column_slice(d, d, &hist);
        let rhs = y.get(k - 1) + rate.get(k - 1).scale(0.5 * h) - hist_m.scale(0.5 * h * h);
        let yk = &lhs_inv * rhs;
        if yk.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonConvergence { t: grid.t(k) });
        }
        let ck = (hist_m + &gr.get(0) * &yk * C64::new(0.5, 0.0)).scale(h);
        let fk = &minus_i_shifted * &yk - &ck;
        y.set(k, &yk);
        conv.set(k, &ck);
        rate.set(k, &fk);
    }

    let minus_i_m = system.map(|z| -I * z);
    let mut w = MatSeq::zeros(d, n);
    let mut memory = MatSeq::zeros(d, n);
    let mut w_dot = MatSeq::zeros(d, n);
    for k in 0..n {
        let phase = C64::from_polar(1.0, -omega_ref * grid.t(k));
        let wk = y.get(k) * phase;
        let ck = conv.get(k) * phase;
        let wdk = &minus_i_m * &wk - &ck;
        w.set(k, &wk);
        memory.set(k, &ck);
        w_dot.set(k, &wdk);
    }
    Ok(WSolution {
        grid,
        w,
        w_dot,
        memory,
    })
}

/// `T(t_k) = -i ∫₀^{t_k} W(t_k-τ) R e^{-iEτ} dτ` by the trapezoid rule.
pub fn compute_t_at(model: &UniverseModel, sol: &WSolution, k: usize) -> Result<CMat> {
    let BathSpec::Discrete { omega, coupling } = &model.bath else {
        return Err(Error::Unsupported(
            "T(t) is only defined for discrete baths; use compute_v".into(),
        ));
    };
    let d = model.n_sys();
    let nb = omega.len();
    let h = sol.grid.h();
    let mut acc = CMat::zeros(d, nb);
    if k == 0 {
        return Ok(acc);
    }
    for j in 0..=k {
        let weight = if j == 0 || j == k { 0.5 * h } else { h };
        let wr = sol.w.view(k - j) * coupling;
        let tj = sol.grid.t(j);
        for (l, &wl) in omega.iter().enumerate() {
            let phase = C64::from_polar(weight, -wl * tj);
            for i in 0..d {
                acc[(i, l)] += wr[(i, l)] * phase;
            }
        }
    }
    Ok(acc.map(|z| -I * z))
}

/// `T` at every grid sample (discrete baths only).
pub fn compute_t(model: &UniverseModel, sol: &WSolution) -> Result<Vec<CMat>> {
    (0..sol.grid.len()).map(|k| compute_t_at(model, sol, k)).collect()
}

/// `V(t)` and `V̇(t)` on the grid.
#[derive(Debug, Clone)]
pub struct NoiseResponse {
    pub v: MatSeq,
    pub v_dot: MatSeq,
    /// Largest pre-symmetrization `max |V - V†|` over the grid.
    pub hermiticity_residual: f64,
}

/// Evaluates the double trapezoid
/// `V_k = h² Σ_{i,j≤k} w_i w_j W_i G̃(t_j - t_i) W_j†` and the Leibniz-rule
/// derivative `V̇ = W N† + N W†`, `N(t) = ∫₀ᵗ W(τ) G̃(t-τ) dτ`, in O(n²)
/// using the running sum `Z_k = Σ_{j<k} u_j W_j G̃_{k-j}` (`u_0 = ½`).
pub fn noise_response(kernels: &KernelTable, sol: &WSolution) -> NoiseResponse {
    let d = kernels.n_sys();
    let n = sol.grid.len();
    let mut v = MatSeq::zeros(d, n);
    let mut v_dot = MatSeq::zeros(d, n);
    if kernels.is_noise_free() {
        return NoiseResponse {
            v,
            v_dot,
            hermiticity_residual: 0.0,
        };
    }
    let h = sol.grid.h();
    let gt = &kernels.g_tilde;
    let g0 = gt.get(0);
    let mut b = {
        let w0 = sol.w.get(0);
        (&w0 * &g0 * w0.adjoint()).scale(0.25)
    };
    let mut residual: f64 = 0.0;
    let mut z = vec![C64::new(0.0, 0.0); d * d];
    let mut scaled = vec![C64::new(0.0, 0.0); d * d];
    for k in 1..n {
        z.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (s, x) in scaled.iter_mut().zip(sol.w.slice(0)) {
            *s = x * 0.5;
        }
        gemm_acc(&mut z, &scaled, gt.slice(k), d);
        for j in 1..k {
            gemm_acc(&mut z, sol.w.slice(j), gt.slice(k - j), d);
        }
        let zk = CMat::from_column_slice(d, d, &z);
        let wk = sol.w.get(k);
        let r = &wk * zk.adjoint();
        let r_sym = &r + r.adjoint();
        let fkk = &wk * &g0 * wk.adjoint();
        b += &r_sym + &fkk;
        let raw_v = (&b - r_sym.scale(0.5) - fkk.scale(0.75)).scale(h * h);
        let (vk, res_v) = hermitize(&raw_v);
        let (vdk, res_vd) = hermitize(&(r_sym + fkk).scale(h));
        residual = residual.max(res_v).max(res_vd);
        v.set(k, &vk);
        v_dot.set(k, &vdk);
    }
    NoiseResponse {
        v,
        v_dot,
        hermiticity_residual: residual,
    }
}

/// `V(t)` samples, Hermitized.
pub fn compute_v(kernels: &KernelTable, sol: &WSolution) -> MatSeq {
    noise_response(kernels, sol).v
}

/// `V̇(t)` samples, Hermitian by construction.
pub fn compute_v_dot(kernels: &KernelTable, sol: &WSolution) -> MatSeq {
    noise_response(kernels, sol).v_dot
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryOptions {
    /// Also evaluate `T(t)` at every sample (discrete baths only).
    pub with_t: bool,
    pub cond_threshold: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            with_t: false,
            cond_threshold: DEFAULT_COND_THRESHOLD,
        }
    }
}

/// Everything the exact master equation needs, sampled on one grid.
#[derive(Debug, Clone)]
pub struct CoefficientTrajectory {
    pub grid: TimeGrid,
    pub statistics: Statistics,
    pub w: MatSeq,
    pub w_dot: MatSeq,
    pub t: Option<Vec<CMat>>,
    pub v: MatSeq,
    pub v_dot: MatSeq,
    pub rates: Rates,
    pub v_hermiticity_residual: f64,
}

impl CoefficientTrajectory {
    pub fn compute(model: &UniverseModel, grid: TimeGrid, opts: TrajectoryOptions) -> Result<Self> {
        let kernels = KernelTable::build(model, grid)?;
        let sol = solve_w(model, &kernels)?;
        let noise = noise_response(&kernels, &sol);
        let t = if opts.with_t {
            Some(compute_t(model, &sol)?)
        } else {
            None
        };
        let rates = decay_matrices_series(&sol, &noise.v, &noise.v_dot, opts.cond_threshold);
        Ok(Self {
            grid,
            statistics: model.statistics,
            w: sol.w,
            w_dot: sol.w_dot,
            t,
            v: noise.v,
            v_dot: noise.v_dot,
            rates,
            v_hermiticity_residual: noise.hermiticity_residual,
        })
    }

    pub fn n_sys(&self) -> usize {
        self.w.dim()
    }
}
