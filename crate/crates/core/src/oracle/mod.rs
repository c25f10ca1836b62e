//! Brute-force reference for discrete baths: diagonalize the full
//! single-particle matrix `ℋ = [[M, R], [R†, E]]` once and read the blocks of
//! `𝒰(t) = e^{-iℋt} = [[W, T], [P, Q]]` at any time.

mod arrowhead;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, inverse, max_abs, CMat, C64};
use crate::model::{BathSpec, Statistics, UniverseModel};
use crate::propagator::PropagatorParams;
use crate::volterra::CoefficientTrajectory;

use arrowhead::Arrowhead;

/// Largest bath the oracle accepts.
pub const MAX_ORACLE_MODES: usize = 5000;
/// Above this total dimension a scalar system uses the secular-equation path.
const DENSE_LIMIT: usize = 400;

fn discrete_parts(model: &UniverseModel) -> Result<(&[f64], &CMat)> {
    match &model.bath {
        BathSpec::Discrete { omega, coupling } => Ok((omega, coupling)),
        _ => Err(Error::Unsupported(
            "the oracle needs a discrete bath; discretize the continuum first".into(),
        )),
    }
}

pub fn build_full_hamiltonian(model: &UniverseModel) -> Result<CMat> {
    let (omega, r) = discrete_parts(model)?;
    let ns = model.n_sys();
    let nb = omega.len();
    let mut h = CMat::zeros(ns + nb, ns + nb);
    h.view_mut((0, 0), (ns, ns)).copy_from(&model.system);
    h.view_mut((0, ns), (ns, nb)).copy_from(r);
    h.view_mut((ns, 0), (nb, ns)).copy_from(&r.adjoint());
    for (l, &w) in omega.iter().enumerate() {
        h[(ns + l, ns + l)] = C64::new(w, 0.0);
    }
    Ok(h)
}

/// `W`, `T`, `P`, `Q` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPropagatorBlocks {
    pub w: CMat,
    pub t: CMat,
    pub p: CMat,
    pub q: CMat,
}

#[derive(Debug, Clone)]
enum Decomposition {
    Dense { eigenvalues: Vec<f64>, vectors: CMat },
    Secular { arrow: Arrowhead, n_bath: usize },
}

/// Eigendecomposition of `ℋ`, reusable for any number of times.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    n_sys: usize,
    n_bath: usize,
    decomposition: Decomposition,
}

impl ExactPropagator {
    pub fn new(model: &UniverseModel) -> Result<Self> {
        let (omega, r) = discrete_parts(model)?;
        let ns = model.n_sys();
        let nb = omega.len();
        if nb > MAX_ORACLE_MODES {
            return Err(Error::Domain(format!(
                "oracle bath limited to {MAX_ORACLE_MODES} modes, got {nb}"
            )));
        }
        if ns == 1 && ns + nb > DENSE_LIMIT {
            let eta: Vec<C64> = r.row(0).iter().copied().collect();
            if let Some(arrow) = Arrowhead::new(model.system[(0, 0)].re, omega, &eta) {
                return Ok(Self {
                    n_sys: 1,
                    n_bath: nb,
                    decomposition: Decomposition::Secular { arrow, n_bath: nb },
                });
            }
        }
        Self::dense(model)
    }

    /// Always uses the dense Hermitian eigensolver.
    pub fn dense(model: &UniverseModel) -> Result<Self> {
        let h = build_full_hamiltonian(model)?;
        let n_bath = h.nrows() - model.n_sys();
        let eig = h.symmetric_eigen();
        Ok(Self {
            n_sys: model.n_sys(),
            n_bath,
            decomposition: Decomposition::Dense {
                eigenvalues: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
            },
        })
    }

    pub fn n_sys(&self) -> usize {
        self.n_sys
    }

    pub fn n_bath(&self) -> usize {
        self.n_bath
    }

    fn phases(eigenvalues: &[f64], t: f64) -> DVector<C64> {
        DVector::from_iterator(eigenvalues.len(), eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)))
    }

    /// `X_rows D X_cols†`, with `D = e^{-iλt}`.
    fn product(vectors: &CMat, phases: &DVector<C64>, rows: (usize, usize), cols: (usize, usize)) -> CMat {
        let n = vectors.ncols();
        let xr = vectors.view((rows.0, 0), (rows.1, n));
        let xc = vectors.view((cols.0, 0), (cols.1, n));
        let mut scaled = xr.into_owned();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[k];
        }
        scaled * xc.adjoint()
    }

    pub fn w(&self, t: f64) -> CMat {
        match &self.decomposition {
            Decomposition::Dense { eigenvalues, vectors } => {
                let ph = Self::phases(eigenvalues, t);
                Self::product(vectors, &ph, (0, self.n_sys), (0, self.n_sys))
            }
            Decomposition::Secular { arrow, .. } => CMat::from_element(1, 1, arrow.w(t)),
        }
    }

    /// `N_b × n_sys` block.
    pub fn p(&self, t: f64) -> CMat {
        match &self.decomposition {
            Decomposition::Dense { eigenvalues, vectors } => {
                let ph = Self::phases(eigenvalues, t);
                Self::product(vectors, &ph, (self.n_sys, self.n_bath), (0, self.n_sys))
            }
            Decomposition::Secular { arrow, n_bath } => {
                let mut p = CMat::zeros(*n_bath, 1);
                let sums = arrow.bath_sums(t);
                for ((s, &l), eta) in sums.iter().zip(&arrow.mode_index).zip(&arrow.eta) {
                    p[(l, 0)] = eta.conj() * s;
                }
                p
            }
        }
    }

    /// `n_sys × N_b` block.
    pub fn t_block(&self, t: f64) -> CMat {
        match &self.decomposition {
            Decomposition::Dense { eigenvalues, vectors } => {
                let ph = Self::phases(eigenvalues, t);
                Self::product(vectors, &ph, (0, self.n_sys), (self.n_sys, self.n_bath))
            }
            Decomposition::Secular { arrow, n_bath } => {
                let sums = arrow.bath_sums(t);
                let mut out = CMat::zeros(1, *n_bath);
                for ((s, &l), eta) in sums.iter().zip(&arrow.mode_index).zip(&arrow.eta) {
                    out[(0, l)] = eta * s;
                }
                out
            }
        }
    }

    /// All four blocks; dense decompositions only.
    pub fn blocks(&self, t: f64) -> Result<FullPropagatorBlocks> {
        match &self.decomposition {
            Decomposition::Dense { eigenvalues, vectors } => {
                let ph = Self::phases(eigenvalues, t);
                let (s, b) = ((0, self.n_sys), (self.n_sys, self.n_bath));
                Ok(FullPropagatorBlocks {
                    w: Self::product(vectors, &ph, s, s),
                    t: Self::product(vectors, &ph, s, b),
                    p: Self::product(vectors, &ph, b, s),
                    q: Self::product(vectors, &ph, b, b),
                })
            }
            Decomposition::Secular { .. } => Err(Error::Unsupported(
                "full blocks need the dense decomposition".into(),
            )),
        }
    }

    /// `W` at many times, in parallel.
    pub fn w_series(&self, times: &[f64]) -> Vec<CMat> {
        times.par_iter().map(|&t| self.w(t)).collect()
    }
}

/// Max-norm residuals of the unitarity constraints on the blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitarityReport {
    /// `WW† + TT† - I`
    pub system_rows: f64,
    /// `PP† + QQ† - I`
    pub bath_rows: f64,
    /// `WP† + TQ†`
    pub cross: f64,
    /// `P + QT†(W†)⁻¹`, when `W` is well conditioned.
    pub p_relation: Option<f64>,
}

impl UnitarityReport {
    pub fn max(&self) -> f64 {
        self.system_rows
            .max(self.bath_rows)
            .max(self.cross)
            .max(self.p_relation.unwrap_or(0.0))
    }
}

pub fn unitarity_check(blocks: &FullPropagatorBlocks) -> UnitarityReport {
    let ns = blocks.w.nrows();
    let nb = blocks.q.nrows();
    let system_rows = max_abs(&(&blocks.w * blocks.w.adjoint() + &blocks.t * blocks.t.adjoint() - CMat::identity(ns, ns)));
    let bath_rows = max_abs(&(&blocks.p * blocks.p.adjoint() + &blocks.q * blocks.q.adjoint() - CMat::identity(nb, nb)));
    let cross = max_abs(&(&blocks.w * blocks.p.adjoint() + &blocks.t * blocks.q.adjoint()));
    let p_relation = if condition_number(&blocks.w) < 1e8 {
        inverse(&blocks.w.adjoint()).map(|wi| max_abs(&(&blocks.p + &blocks.q * blocks.t.adjoint() * wi)))
    } else {
        None
    };
    UnitarityReport {
        system_rows,
        bath_rows,
        cross,
        p_relation,
    }
}

/// Largest deviations of a Volterra trajectory from the oracle over the
/// given sample indices. `t` and `v` are `None` when the trajectory does not
/// carry `T` or the model is at zero temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryErrors {
    pub w: f64,
    pub t: Option<f64>,
    pub v: f64,
}

pub fn compare_trajectory(
    traj: &CoefficientTrajectory,
    model: &UniverseModel,
    oracle: &ExactPropagator,
    indices: &[usize],
) -> Result<TrajectoryErrors> {
    let f = model.bath_occupations()?;
    let fdiag = CMat::from_diagonal(&DVector::from_iterator(f.len(), f.iter().map(|&x| C64::new(x, 0.0))));
    let per_sample: Vec<(f64, Option<f64>, f64)> = indices
        .par_iter()
        .map(|&k| {
            let t = traj.grid.t(k);
            let w_err = max_abs(&(traj.w.get(k) - oracle.w(t)));
            let tb = oracle.t_block(t);
            let t_err = traj.t.as_ref().map(|ts| max_abs(&(&ts[k] - &tb)));
            let v_err = max_abs(&(traj.v.get(k) - &tb * &fdiag * tb.adjoint()));
            (w_err, t_err, v_err)
        })
        .collect();
    let mut out = TrajectoryErrors {
        w: 0.0,
        t: traj.t.as_ref().map(|_| 0.0),
        v: 0.0,
    };
    for (w, t, v) in per_sample {
        out.w = out.w.max(w);
        out.t = match (out.t, t) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, _) => a,
        };
        out.v = out.v.max(v);
    }
    Ok(out)
}

/// Bose propagator parameters assembled directly from the blocks and the
/// bath occupations `f`, without going through `V`:
///
/// ```text
/// K  = I - Q f(1+f)⁻¹ Q†
/// A  = Π_l 1/(1+f_l) · det K⁻¹
/// J₁ = W + T f(1+f)⁻¹ Q† K⁻¹ P
/// J₂ = T f(1+f)⁻¹ T† + T f(1+f)⁻¹ Q† K⁻¹ Q f(1+f)⁻¹ T†
/// J₃ = P† K⁻¹ P
/// ```
pub fn block_form_params(blocks: &FullPropagatorBlocks, f: &[f64]) -> Result<PropagatorParams> {
    let nb = blocks.q.nrows();
    if f.len() != nb {
        return Err(Error::Domain("occupation count does not match the bath".into()));
    }
    let g = CMat::from_diagonal(&DVector::from_iterator(nb, f.iter().map(|&x| C64::new(x / (1.0 + x), 0.0))));
    let k = CMat::identity(nb, nb) - &blocks.q * &g * blocks.q.adjoint();
    let det = k.clone().lu().determinant();
    let kinv = inverse(&k).ok_or_else(|| Error::SingularParams("bath block is singular".into()))?;
    let prefactor: f64 = f.iter().map(|&x| 1.0 / (1.0 + x)).product();
    let tg = &blocks.t * &g;
    let j1 = &blocks.w + &tg * blocks.q.adjoint() * &kinv * &blocks.p;
    let j2 = &tg * blocks.t.adjoint() + &tg * blocks.q.adjoint() * &kinv * &blocks.q * tg.adjoint();
    let j3 = blocks.p.adjoint() * &kinv * &blocks.p;
    Ok(PropagatorParams {
        a: C64::new(prefactor, 0.0) / det,
        j1,
        j2,
        j3,
        statistics: Statistics::Bose,
    })
}
