//! Gaussian propagating-function parameters `A, J₁, J₂, J₃`.
//!
//! Bose: `K = A exp[ᾱJ₁ξ + ξ̄′J₁†α′ + ᾱJ₂α′ + ξ̄′J₃ξ]`. The Fermi kernel has
//! the same shape over Grassmann variables and is exposed only through its
//! parameters.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitize, inverse, CMat, C64};
use crate::model::Statistics;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorParams {
    pub a: C64,
    pub j1: CMat,
    pub j2: CMat,
    pub j3: CMat,
    pub statistics: Statistics,
}

fn check_shapes(w: &CMat, v: &CMat) -> Result<usize> {
    let n = w.nrows();
    if w.ncols() != n || v.nrows() != n || v.ncols() != n {
        return Err(Error::Domain("W and V must be square and of equal size".into()));
    }
    Ok(n)
}

/// `A = det(I+V)⁻¹`, `J₁ = (I+V)⁻¹W`, `J₂ = V(I+V)⁻¹`, `J₃ = I - W†(I+V)⁻¹W`.
pub fn boson_params(w: &CMat, v: &CMat) -> Result<PropagatorParams> {
    let n = check_shapes(w, v)?;
    let id = CMat::identity(n, n);
    let ipv = &id + v;
    let det = ipv.clone().lu().determinant();
    let inv = inverse(&ipv)
        .ok_or_else(|| Error::SingularParams("I + V is singular".into()))?;
    let j1 = &inv * w;
    let (j2, _) = hermitize(&(v * &inv));
    let (j3, _) = hermitize(&(&id - w.adjoint() * &j1));
    Ok(PropagatorParams {
        a: det.inv(),
        j1,
        j2,
        j3,
        statistics: Statistics::Bose,
    })
}

/// `A = det(I-V)⁻¹`, `J₁ = (I-V)⁻¹W`, `J₂ = (I-V)⁻¹ - I`, `J₃ = W†(I-V)⁻¹W - I`.
pub fn fermion_params(w: &CMat, v: &CMat) -> Result<PropagatorParams> {
    let n = check_shapes(w, v)?;
    let top = hermitian_eigenvalues(v).last().copied().unwrap_or(0.0);
    if (1.0 - top).abs() <= 1e-12 || top > 1.0 {
        return Err(Error::SingularParams(format!(
            "V has eigenvalue {top} at or above 1"
        )));
    }
    let id = CMat::identity(n, n);
    let imv = &id - v;
    let det = imv.clone().lu().determinant();
    let inv = inverse(&imv)
        .ok_or_else(|| Error::SingularParams("I - V is singular".into()))?;
    let j1 = &inv * w;
    let (j2, _) = hermitize(&(&inv - &id));
    let (j3, _) = hermitize(&(w.adjoint() * &j1 - &id));
    Ok(PropagatorParams {
        a: det.inv(),
        j1,
        j2,
        j3,
        statistics: Statistics::Fermi,
    })
}

/// Bose kernel `K(ᾱ, α′, ξ, ξ̄′)`. Conjugated arguments are passed already
/// conjugated, as row-vector components.
pub fn evaluate_k(
    params: &PropagatorParams,
    alpha_bar: &[C64],
    alpha_prime: &[C64],
    xi: &[C64],
    xi_bar_prime: &[C64],
) -> Result<C64> {
    if params.statistics != Statistics::Bose {
        return Err(Error::Unsupported(
            "the Fermi kernel takes Grassmann arguments".into(),
        ));
    }
    let n = params.j1.nrows();
    if [alpha_bar, alpha_prime, xi, xi_bar_prime].iter().any(|v| v.len() != n) {
        return Err(Error::Domain(format!("vectors must have length {n}")));
    }
    let ab = DVector::from_column_slice(alpha_bar);
    let ap = DVector::from_column_slice(alpha_prime);
    let x = DVector::from_column_slice(xi);
    let xbp = DVector::from_column_slice(xi_bar_prime);
    let bilinear = |l: &DVector<C64>, m: &CMat, r: &DVector<C64>| (l.transpose() * m * r)[(0, 0)];
    let exponent = bilinear(&ab, &params.j1, &x)
        + bilinear(&xbp, &params.j1.adjoint(), &ap)
        + bilinear(&ab, &params.j2, &ap)
        + bilinear(&xbp, &params.j3, &x);
    Ok(params.a * exponent.exp())
}

/// `max |J₃ + J₁†(I+V)J₁ - I|` (Bose normalization identity).
pub fn normalization_residual(params: &PropagatorParams, v: &CMat) -> f64 {
    let n = v.nrows();
    let id = CMat::identity(n, n);
    let r = &params.j3 + params.j1.adjoint() * (&id + v) * &params.j1 - id;
    crate::linalg::max_abs(&r)
}
