//! Time-local master equation for one mode.
//!
//! ```text
//! ρ̇ = -i Ω̃ [a†a, ρ] + κ↓ (aρa† - ½{a†a, ρ}) + κ↑ (a†ρa - ½{aa†, ρ})
//! ```
//!
//! with `κ↓ = Γ̃ + 2Γ`, `κ↑ = Γ̃` for bosons (truncated Fock space) and
//! `κ↓ = 2Γ - Γ̃`, `κ↑ = Γ̃` for a fermion (dimension 2). Both use the same
//! truncated lowering operator, so the generator is exactly trace-preserving.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermiticity_residual, CMat, C64, I};
use crate::model::{Statistics, TimeGrid};
use crate::volterra::CoefficientTrajectory;

/// Largest tolerated population in the top Fock level during evolution.
pub const CUTOFF_OVERFLOW: f64 = 1e-4;
/// Largest tolerated top-level population in the initial state.
pub const CUTOFF_INITIAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: CMat,
}

/// Default Fock dimension for a coherent amplitude: `⌈|α|² + 8|α| + 10⌉`.
pub fn default_fock_dim(alpha_sq: f64) -> usize {
    (alpha_sq + 8.0 * alpha_sq.sqrt() + 10.0).ceil() as usize
}

impl DensityMatrix {
    pub fn new(rho: CMat) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() < 2 {
            return Err(Error::Domain("density matrix must be square, dim ≥ 2".into()));
        }
        if hermiticity_residual(&rho) > 1e-10 {
            return Err(Error::Domain("density matrix is not Hermitian".into()));
        }
        if (rho.trace().re - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("trace {} ≠ 1", rho.trace().re)));
        }
        Ok(Self { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Truncated coherent state `|α⟩⟨α|`, renormalized. Fails if the top
    /// level carries more than `CUTOFF_INITIAL`.
    pub fn coherent(alpha: C64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain("Fock dimension must be at least 2".into()));
        }
        let mut c = vec![C64::new(0.0, 0.0); dim];
        c[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 1..dim {
            c[n] = c[n - 1] * alpha / (n as f64).sqrt();
        }
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        let top = c[dim - 1].norm_sqr() / norm;
        if top > CUTOFF_INITIAL {
            return Err(Error::Domain(format!(
                "Fock dimension {dim} too small for |α|² = {}: top population {top:.2e}",
                alpha.norm_sqr()
            )));
        }
        let rho = CMat::from_fn(dim, dim, |m, n| c[m] * c[n].conj() / norm);
        Ok(Self { rho })
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n + 1 >= dim {
            return Err(Error::Domain(format!("level {n} needs dimension > {}", n + 1)));
        }
        let mut rho = CMat::zeros(dim, dim);
        rho[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self { rho })
    }

    /// Single fermionic mode, `n ∈ [0, 1]` occupation, no coherence.
    pub fn fermion(occupation: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&occupation) {
            return Err(Error::Domain(format!("occupation {occupation} outside [0, 1]")));
        }
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = C64::new(1.0 - occupation, 0.0);
        rho[(1, 1)] = C64::new(occupation, 0.0);
        Ok(Self { rho })
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨a†a⟩`.
    pub fn mean_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.rho[(n, n)].re).sum()
    }

    /// `⟨a⟩ = Σ √(n+1) ρ_{n+1,n}`.
    pub fn mean_a(&self) -> C64 {
        (0..self.dim() - 1)
            .map(|n| self.rho[(n + 1, n)] * ((n + 1) as f64).sqrt())
            .sum()
    }

    pub fn top_population(&self) -> f64 {
        let d = self.dim();
        self.rho[(d - 1, d - 1)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.rho)[0]
    }
}

/// Scalar rates `(Γ, Γ̃, Ω̃)` sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct RateSchedule {
    pub grid: TimeGrid,
    pub statistics: Statistics,
    pub gamma: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    pub omega: Vec<f64>,
}

impl RateSchedule {
    /// Takes the scalar rates from a trajectory. An isolated invalid sample
    /// is replaced by the mean of its neighbours; any longer run, or one
    /// touching the end of the grid, is a `RateGap`.
    pub fn from_trajectory(traj: &CoefficientTrajectory) -> Result<Self> {
        if traj.n_sys() != 1 {
            return Err(Error::Unsupported(
                "master-equation evolution is implemented for a single mode".into(),
            ));
        }
        let n = traj.grid.len();
        let r = &traj.rates;
        let mut gamma: Vec<f64> = (0..n).map(|k| r.gamma.at(k, 0, 0).re).collect();
        let mut gamma_tilde: Vec<f64> = (0..n).map(|k| r.gamma_tilde.at(k, 0, 0).re).collect();
        let mut omega: Vec<f64> = (0..n).map(|k| r.omega_tilde.at(k, 0, 0).re).collect();
        let mut k = 0;
        while k < n {
            if r.valid[k] {
                k += 1;
                continue;
            }
            let start = k;
            while k < n && !r.valid[k] {
                k += 1;
            }
            let len = k - start;
            if len > 1 || start == 0 || k == n {
                return Err(Error::RateGap {
                    t: traj.grid.t(start),
                    len,
                });
            }
            for v in [&mut gamma, &mut gamma_tilde, &mut omega] {
                v[start] = 0.5 * (v[start - 1] + v[start + 1]);
            }
        }
        Ok(Self {
            grid: traj.grid,
            statistics: traj.statistics,
            gamma,
            gamma_tilde,
            omega,
        })
    }

    pub fn constant(grid: TimeGrid, statistics: Statistics, gamma: f64, gamma_tilde: f64, omega: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            statistics,
            gamma: vec![gamma; n],
            gamma_tilde: vec![gamma_tilde; n],
            omega: vec![omega; n],
        }
    }

    /// `(κ↓, κ↑, Ω̃)` at sample `k`.
    fn channels(&self, k: usize) -> (f64, f64, f64) {
        let (g, gt) = (self.gamma[k], self.gamma_tilde[k]);
        match self.statistics {
            Statistics::Bose => (gt + 2.0 * g, gt, self.omega[k]),
            Statistics::Fermi => (2.0 * g - gt, gt, self.omega[k]),
        }
    }
}

/// Observables recorded at every grid sample.
#[derive(Debug, Clone, Default)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub trace: Vec<f64>,
    pub purity: Vec<f64>,
    pub mean_number: Vec<f64>,
    pub mean_a: Vec<C64>,
    pub min_eigenvalue: Vec<f64>,
    pub hermiticity: Vec<f64>,
    pub final_state: Option<DensityMatrix>,
}

impl Evolution {
    fn record(&mut self, t: f64, state: &DensityMatrix) {
        self.times.push(t);
        self.trace.push(state.trace());
        self.purity.push(state.purity());
        self.mean_number.push(state.mean_number());
        self.mean_a.push(state.mean_a());
        self.min_eigenvalue.push(state.min_eigenvalue());
        self.hermiticity.push(hermiticity_residual(&state.rho));
    }
}

fn generator(rho: &CMat, kd: f64, ku: f64, omega: f64, out: &mut CMat) {
    let d = rho.nrows();
    // Diagonals of a†a and (truncated) aa†.
    let num = |m: usize| m as f64;
    let anum = |m: usize| if m + 1 < d { (m + 1) as f64 } else { 0.0 };
    for n in 0..d {
        for m in 0..d {
            let r = rho[(m, n)];
            let mut v = -I * omega * (num(m) - num(n)) * r;
            v -= 0.5 * (kd * (num(m) + num(n)) + ku * (anum(m) + anum(n))) * r;
            if m + 1 < d && n + 1 < d {
                v += kd * (((m + 1) * (n + 1)) as f64).sqrt() * rho[(m + 1, n + 1)];
            }
            if m > 0 && n > 0 {
                v += ku * ((m * n) as f64).sqrt() * rho[(m - 1, n - 1)];
            }
            out[(m, n)] = v;
        }
    }
}

fn evolve(
    schedule: &RateSchedule,
    rho0: &DensityMatrix,
    mut observe: impl FnMut(usize, &DensityMatrix),
) -> Result<Evolution> {
    let grid = schedule.grid;
    let h = grid.h();
    let d = rho0.dim();
    let mut out = Evolution::default();
    let mut state = rho0.clone();
    out.record(0.0, &state);
    observe(0, &state);
    let mut k1 = CMat::zeros(d, d);
    let mut k2 = CMat::zeros(d, d);
    let mut k3 = CMat::zeros(d, d);
    let mut k4 = CMat::zeros(d, d);
    for k in 1..grid.len() {
        let (a0, b0, w0) = schedule.channels(k - 1);
        let (a1, b1, w1) = schedule.channels(k);
        let (am, bm, wm) = (0.5 * (a0 + a1), 0.5 * (b0 + b1), 0.5 * (w0 + w1));
        let rho = &state.rho;
        generator(rho, a0, b0, w0, &mut k1);
        generator(&(rho + &k1 * C64::new(0.5 * h, 0.0)), am, bm, wm, &mut k2);
        generator(&(rho + &k2 * C64::new(0.5 * h, 0.0)), am, bm, wm, &mut k3);
        generator(&(rho + &k3 * C64::new(h, 0.0)), a1, b1, w1, &mut k4);
        let incr = (&k1 + &k2 * C64::new(2.0, 0.0) + &k3 * C64::new(2.0, 0.0) + &k4) * C64::new(h / 6.0, 0.0);
        let next = rho + incr;
        // Remove round-off anti-Hermitian drift.
        state.rho = (&next + next.adjoint()) * C64::new(0.5, 0.0);
        let top = state.top_population();
        if d > 2 && top > CUTOFF_OVERFLOW {
            return Err(Error::CutoffOverflow {
                t: grid.t(k),
                population: top,
            });
        }
        out.record(grid.t(k), &state);
        observe(k, &state);
    }
    out.final_state = Some(state);
    Ok(out)
}

fn check_initial(rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() > 2 && rho0.top_population() > CUTOFF_INITIAL {
        return Err(Error::Domain(format!(
            "initial top Fock population {:.2e} exceeds {CUTOFF_INITIAL:e}",
            rho0.top_population()
        )));
    }
    Ok(())
}

/// Bose evolution in the Fock space of `rho0`.
pub fn evolve_boson(schedule: &RateSchedule, rho0: &DensityMatrix) -> Result<Evolution> {
    evolve_boson_with(schedule, rho0, |_, _| {})
}

/// As `evolve_boson`, handing every sample's state to `observe`.
pub fn evolve_boson_with(
    schedule: &RateSchedule,
    rho0: &DensityMatrix,
    observe: impl FnMut(usize, &DensityMatrix),
) -> Result<Evolution> {
    if schedule.statistics != Statistics::Bose {
        return Err(Error::Domain("rates were computed for a Fermi bath".into()));
    }
    check_initial(rho0)?;
    evolve(schedule, rho0, observe)
}

/// Single fermionic mode; `rho0` must be 2×2.
pub fn evolve_fermion(schedule: &RateSchedule, rho0: &DensityMatrix) -> Result<Evolution> {
    if schedule.statistics != Statistics::Fermi {
        return Err(Error::Domain("rates were computed for a Bose bath".into()));
    }
    if rho0.dim() != 2 {
        return Err(Error::Domain("a fermionic mode has dimension 2".into()));
    }
    evolve(schedule, rho0, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn coherent_state_moments() {
        let alpha = C64::new(1.2, -0.5);
        let dim = default_fock_dim(alpha.norm_sqr());
        let s = DensityMatrix::coherent(alpha, dim).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-14);
        assert!((s.purity() - 1.0).abs() < 1e-12);
        assert!((s.mean_a() - alpha).norm() < 1e-9);
        assert!((s.mean_number() - alpha.norm_sqr()).abs() < 1e-8);
        assert!(DensityMatrix::coherent(C64::new(3.0, 0.0), 8).is_err());
    }

    #[test]
    fn free_rotation_keeps_coherent_state() {
        let grid = TimeGrid::new(5.0, 500).unwrap();
        let sched = RateSchedule::constant(grid, Statistics::Bose, 0.0, 0.0, 1.3);
        let alpha = C64::new(1.0, 0.0);
        let rho0 = DensityMatrix::coherent(alpha, default_fock_dim(1.0)).unwrap();
        let ev = evolve_boson(&sched, &rho0).unwrap();
        for (k, &t) in ev.times.iter().enumerate() {
            assert!((ev.mean_a[k] - alpha * C64::from_polar(1.0, -1.3 * t)).norm() < 1e-8);
            assert!((ev.trace[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_damping_matches_rate_equation() {
        let grid = TimeGrid::new(10.0, 1000).unwrap();
        let (g, gt) = (0.05, 0.02);
        let sched = RateSchedule::constant(grid, Statistics::Bose, g, gt, 1.0);
        let rho0 = DensityMatrix::fock(2, 16).unwrap();
        let ev = evolve_boson(&sched, &rho0).unwrap();
        let steady = gt / (2.0 * g);
        for (k, &t) in ev.times.iter().enumerate() {
            let want = steady + (2.0 - steady) * (-2.0 * g * t).exp();
            assert!((ev.mean_number[k] - want).abs() < 1e-8);
            assert!(ev.min_eigenvalue[k] > -1e-7);
        }
    }

    #[test]
    fn fermion_relaxes_to_detailed_balance() {
        let grid = TimeGrid::new(40.0, 4000).unwrap();
        let sched = RateSchedule::constant(grid, Statistics::Fermi, 0.1, 0.06, 0.0);
        let ev = evolve_fermion(&sched, &DensityMatrix::fermion(1.0).unwrap()).unwrap();
        let n_inf = 0.06 / 0.2;
        for (k, &t) in ev.times.iter().enumerate() {
            let want = n_inf + (1.0 - n_inf) * (-0.2 * t).exp();
            assert!((ev.mean_number[k] - want).abs() < 1e-9);
        }
        assert!(evolve_boson(&sched, &DensityMatrix::fock(0, 4).unwrap()).is_err());
    }

    #[test]
    fn overflow_is_detected() {
        let grid = TimeGrid::new(10.0, 1000).unwrap();
        let sched = RateSchedule::constant(grid, Statistics::Bose, 0.0, 1.0, 1.0);
        let err = evolve_boson(&sched, &DensityMatrix::fock(0, 4).unwrap()).unwrap_err();
        assert!(matches!(err, Error::CutoffOverflow { .. }));
    }

    #[test]
    fn generator_is_traceless() {
        let rho = CMat::from_fn(5, 5, |m, n| C64::new((m + n) as f64, m as f64 - n as f64));
        let mut out = CMat::zeros(5, 5);
        generator(&rho, 0.7, 0.3, 2.0, &mut out);
        assert!(out.trace().norm() < 1e-13);
        let a = CMat::from_fn(5, 5, |m, n| {
            if n == m + 1 {
                C64::new((n as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let ad = a.adjoint();
        let num = &ad * &a;
        let anum = &a * &ad;
        let half = C64::new(0.5, 0.0);
        let want = (&num * &rho - &rho * &num) * (-I * 2.0)
            + (&a * &rho * &ad - (&num * &rho + &rho * &num) * half) * C64::new(0.7, 0.0)
            + (&ad * &rho * &a - (&anum * &rho + &rho * &anum) * half) * C64::new(0.3, 0.0);
        assert!(max_abs(&(want - out)) < 1e-12);
    }
}
