//! Time-dependent master-equation coefficients from `W`, `Ẇ`, `V`, `V̇`.
//!
//! With `X = Ẇ W⁻¹`:
//! `Γ = -½(X + X†)`, `Ω̃ = (i/2)(X - X†)`, `Γ̃ = V̇ - X V - V X†`.

use crate::error::{Error, Result};
use crate::linalg::{condition_number, hermitize, inverse, CMat, MatSeq, I};
use crate::volterra::WSolution;

pub const DEFAULT_COND_THRESHOLD: f64 = 1e8;

/// Hermitian `(Γ, Γ̃, Ω̃)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayMatrices {
    pub gamma: CMat,
    pub gamma_tilde: CMat,
    pub omega_tilde: CMat,
    /// Largest pre-symmetrization residual of the three.
    pub hermiticity_residual: f64,
}

pub fn decay_matrices(
    w: &CMat,
    w_dot: &CMat,
    v: &CMat,
    v_dot: &CMat,
    t: f64,
    cond_threshold: f64,
) -> Result<DecayMatrices> {
    let condition = condition_number(w);
    let inv = if condition < cond_threshold {
        inverse(w)
    } else {
        None
    };
    let Some(inv) = inv else {
        return Err(Error::SingularW { t, condition });
    };
    let x = w_dot * inv;
    let xd = x.adjoint();
    let (gamma, r1) = hermitize(&(&x + &xd).scale(-0.5));
    let (omega_tilde, r2) = hermitize(&(&x - &xd).map(|z| 0.5 * I * z));
    let (gamma_tilde, r3) = hermitize(&(v_dot - &x * v - v * &xd));
    Ok(DecayMatrices {
        gamma,
        gamma_tilde,
        omega_tilde,
        hermiticity_residual: r1.max(r2).max(r3),
    })
}

/// `H̃_s = a† Ω̃ a`: diagonal entries are the renormalized mode frequencies,
/// off-diagonals the bath-induced couplings.
pub fn effective_hamiltonian(omega_tilde: &CMat) -> CMat {
    omega_tilde.clone()
}

/// Coefficients over a grid. Samples where `W` is too ill-conditioned to
/// invert are left at zero and flagged in `valid`.
#[derive(Debug, Clone)]
pub struct Rates {
    pub gamma: MatSeq,
    pub gamma_tilde: MatSeq,
    pub omega_tilde: MatSeq,
    pub valid: Vec<bool>,
    pub condition: Vec<f64>,
    pub hermiticity_residual: f64,
}

impl Rates {
    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    /// First invalid sample, as the error the caller would see.
    pub fn first_singular(&self, times: &[f64]) -> Option<Error> {
        self.valid.iter().position(|&v| !v).map(|k| Error::SingularW {
            t: times[k],
            condition: self.condition[k],
        })
    }
}

pub(crate) fn decay_matrices_series(
    sol: &WSolution,
    v: &MatSeq,
    v_dot: &MatSeq,
    cond_threshold: f64,
) -> Rates {
    let d = sol.w.dim();
    let n = sol.grid.len();
    let mut out = Rates {
        gamma: MatSeq::zeros(d, n),
        gamma_tilde: MatSeq::zeros(d, n),
        omega_tilde: MatSeq::zeros(d, n),
        valid: vec![false; n],
        condition: vec![f64::INFINITY; n],
        hermiticity_residual: 0.0,
    };
    for k in 0..n {
        let w = sol.w.get(k);
        out.condition[k] = condition_number(&w);
        match decay_matrices(
            &w,
            &sol.w_dot.get(k),
            &v.get(k),
            &v_dot.get(k),
            sol.grid.t(k),
            cond_threshold,
        ) {
            Ok(dm) => {
                out.gamma.set(k, &dm.gamma);
                out.gamma_tilde.set(k, &dm.gamma_tilde);
                out.omega_tilde.set(k, &dm.omega_tilde);
                out.valid[k] = true;
                out.hermiticity_residual = out.hermiticity_residual.max(dm.hermiticity_residual);
            }
            Err(_) => out.valid[k] = false,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, C64};
    use crate::model::{BathSpec, Statistics, TimeGrid, UniverseModel};
    use crate::volterra::{CoefficientTrajectory, TrajectoryOptions};

    fn ohmic(lambda: f64, beta: f64) -> UniverseModel {
        UniverseModel::scalar(
            1.0,
            Statistics::Bose,
            BathSpec::Ohmic {
                lambda,
                cutoff: 10.0,
            },
            beta,
        )
        .unwrap()
    }

    #[test]
    fn free_mode_has_no_dissipation() {
        let grid = TimeGrid::new(10.0, 200).unwrap();
        let traj = CoefficientTrajectory::compute(&ohmic(0.0, 2.0), grid, TrajectoryOptions::default()).unwrap();
        for k in 0..grid.len() {
            assert!(traj.rates.gamma.at(k, 0, 0).norm() < 1e-12);
            assert!(traj.rates.gamma_tilde.at(k, 0, 0).norm() < 1e-12);
            assert!((traj.rates.omega_tilde.at(k, 0, 0) - 1.0).norm() < 1e-12);
        }
        assert_eq!(effective_hamiltonian(&traj.rates.omega_tilde.get(5)), CMat::identity(1, 1));
    }

    #[test]
    fn scalar_identity_and_zero_temperature() {
        let grid = TimeGrid::new(10.0, 2000).unwrap();
        let traj = CoefficientTrajectory::compute(&ohmic(0.01, f64::INFINITY), grid, TrajectoryOptions::default()).unwrap();
        assert!(traj.rates.all_valid());
        for k in 0..grid.len() {
            let ratio = traj.w_dot.at(k, 0, 0) / traj.w.at(k, 0, 0);
            assert!((traj.rates.gamma.at(k, 0, 0).re + ratio.re).abs() < 1e-8);
            assert!((traj.rates.omega_tilde.at(k, 0, 0).re + ratio.im).abs() < 1e-8);
            assert_eq!(traj.rates.gamma_tilde.at(k, 0, 0), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn thermal_population_obeys_rate_equation() {
        let grid = TimeGrid::new(10.0, 2000).unwrap();
        let traj = CoefficientTrajectory::compute(&ohmic(0.05, 1.0), grid, TrajectoryOptions::default()).unwrap();
        for k in 0..grid.len() {
            let v = traj.v.at(k, 0, 0).re;
            let vd = traj.v_dot.at(k, 0, 0).re;
            let g = traj.rates.gamma.at(k, 0, 0).re;
            let gt = traj.rates.gamma_tilde.at(k, 0, 0).re;
            assert!((vd - (-2.0 * g * v + gt)).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_w_is_reported() {
        let w = CMat::zeros(1, 1);
        let err = decay_matrices(&w, &w, &w, &w, 3.0, DEFAULT_COND_THRESHOLD).unwrap_err();
        assert!(matches!(err, Error::SingularW { t, .. } if t == 3.0));
        let mut w2 = CMat::identity(2, 2);
        w2[(1, 1)] = C64::new(1e-10, 0.0);
        let z = CMat::zeros(2, 2);
        assert!(decay_matrices(&w2, &z, &z, &z, 0.0, DEFAULT_COND_THRESHOLD).is_err());
    }

    #[test]
    fn outputs_are_hermitian() {
        let w = CMat::from_row_slice(2, 2, &[
            C64::new(0.8, 0.1), C64::new(0.05, -0.02),
            C64::new(0.0, 0.03), C64::new(0.7, -0.2),
        ]);
        let wd = CMat::from_row_slice(2, 2, &[
            C64::new(-0.1, 0.3), C64::new(0.2, 0.0),
            C64::new(0.0, -0.1), C64::new(0.05, 0.4),
        ]);
        let v = CMat::from_row_slice(2, 2, &[
            C64::new(0.3, 0.0), C64::new(0.1, 0.05),
            C64::new(0.1, -0.05), C64::new(0.2, 0.0),
        ]);
        let dm = decay_matrices(&w, &wd, &v, &v.scale(0.1), 1.0, DEFAULT_COND_THRESHOLD).unwrap();
        for m in [&dm.gamma, &dm.gamma_tilde, &dm.omega_tilde] {
            assert!(max_abs(&(m - m.adjoint())) < 1e-15);
        }
    }
}
