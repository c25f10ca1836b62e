//! Eigen-decomposition of the Hermitian arrowhead matrix
//! `[[ω₀, η], [η†, diag(ω)]]` (one system mode, many bath modes) through its
//! secular equation `λ - ω₀ - Σ |η_l|²/(λ - ω_l) = 0`.
//!
//! Each root is located relative to its nearest pole, so `λ - ω_l` is known
//! to full relative accuracy and the eigenvectors
//! `x₀ = (1 + Σ|η_l|²/(λ-ω_l)²)^{-1/2}`, `x_l = η_l* x₀/(λ - ω_l)` stay
//! orthogonal even for closely spaced bath frequencies.

use rayon::prelude::*;

use crate::linalg::C64;

#[derive(Debug, Clone)]
pub(crate) struct Arrowhead {
    /// Sorted coupled bath frequencies and couplings (zero couplings removed).
    pub poles: Vec<f64>,
    pub eta: Vec<C64>,
    /// Index into the caller's mode list for each pole.
    pub mode_index: Vec<usize>,
    /// For root `k`: nearest pole index and offset `λ_k - poles[origin]`.
    pub origin: Vec<usize>,
    pub offset: Vec<f64>,
    /// `x₀` for each root (real, positive).
    pub x0: Vec<f64>,
}

impl Arrowhead {
    /// `None` if two coupled bath modes share a frequency (the secular form
    /// then misses eigenvectors; use a dense decomposition instead).
    pub fn new(omega0: f64, omega: &[f64], eta: &[C64]) -> Option<Self> {
        let mut idx: Vec<usize> = (0..omega.len()).filter(|&l| eta[l].norm() > 0.0).collect();
        idx.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]));
        let poles: Vec<f64> = idx.iter().map(|&l| omega[l]).collect();
        if poles.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        let eta: Vec<C64> = idx.iter().map(|&l| eta[l]).collect();
        let weights: Vec<f64> = eta.iter().map(|z| z.norm_sqr()).collect();
        let n = poles.len();
        if n == 0 {
            return Some(Self {
                poles,
                eta,
                mode_index: idx,
                origin: vec![],
                offset: vec![omega0],
                x0: vec![1.0],
            });
        }

        let sum_abs: f64 = eta.iter().map(|z| z.norm()).sum();
        let lower = (omega0 - sum_abs).min(poles[0] - eta.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let upper = (omega0 + sum_abs).max(poles[n - 1] + eta.iter().map(|z| z.norm()).fold(0.0, f64::max));
        let span = (upper - lower).abs().max(1.0);

        let solved: Vec<(usize, f64)> = (0..=n)
            .into_par_iter()
            .map(|k| {
                let secular = |o: usize, d: f64| secular(omega0, &poles, &weights, o, d);
                if k == 0 {
                    let lo = lower - poles[0] - 1e-9 * span;
                    (0, solve(secular, 0, lo, 0.0))
                } else if k == n {
                    let hi = upper - poles[n - 1] + 1e-9 * span;
                    (n - 1, solve(secular, n - 1, 0.0, hi))
                } else {
                    let (a, b) = (k - 1, k);
                    let gap = poles[b] - poles[a];
                    let mid = 0.5 * gap;
                    if secular(a, mid).0 >= 0.0 {
                        (a, solve(secular, a, 0.0, mid))
                    } else {
                        (b, solve(secular, b, mid - gap, 0.0))
                    }
                }
            })
            .collect();

        let mut origin = Vec::with_capacity(n + 1);
        let mut offset = Vec::with_capacity(n + 1);
        let mut x0 = Vec::with_capacity(n + 1);
        for (o, d) in solved {
            let s: f64 = (0..n)
                .map(|l| {
                    let gap = d + (poles[o] - poles[l]);
                    weights[l] / (gap * gap)
                })
                .sum();
            origin.push(o);
            offset.push(d);
            x0.push((1.0 + s).sqrt().recip());
        }
        Some(Self {
            poles,
            eta,
            mode_index: idx,
            origin,
            offset,
            x0,
        })
    }

    pub fn n_roots(&self) -> usize {
        self.x0.len()
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        if self.poles.is_empty() {
            self.offset[0]
        } else {
            self.poles[self.origin[k]] + self.offset[k]
        }
    }

    /// `λ_k - ω_l`, accurate near the origin pole.
    #[inline]
    pub fn gap(&self, k: usize, l: usize) -> f64 {
        self.offset[k] + (self.poles[self.origin[k]] - self.poles[l])
    }

    /// `W(t) = Σ_k x₀k² e^{-iλ_k t}`.
    pub fn w(&self, t: f64) -> C64 {
        (0..self.n_roots())
            .map(|k| C64::from_polar(self.x0[k] * self.x0[k], -self.eigenvalue(k) * t))
            .sum()
    }

    /// `s_l(t) = Σ_k x₀k² e^{-iλ_k t}/(λ_k - ω_l)` in sorted-pole order, so
    /// that `P_l = η_l* s_l` and `T_l = η_l s_l`.
    pub fn bath_sums(&self, t: f64) -> Vec<C64> {
        let phases: Vec<C64> = (0..self.n_roots())
            .map(|k| C64::from_polar(self.x0[k] * self.x0[k], -self.eigenvalue(k) * t))
            .collect();
        (0..self.poles.len())
            .into_par_iter()
            .map(|l| phases.iter().enumerate().map(|(k, ph)| ph / self.gap(k, l)).sum())
            .collect()
    }
}

/// Secular function and its derivative at `λ = poles[o] + d`.
fn secular(omega0: f64, poles: &[f64], weights: &[f64], o: usize, d: f64) -> (f64, f64) {
    let mut f = d + (poles[o] - omega0);
    let mut df = 1.0;
    for (l, &w) in weights.iter().enumerate() {
        let gap = d + (poles[o] - poles[l]);
        f -= w / gap;
        df += w / (gap * gap);
    }
    (f, df)
}

/// Safeguarded Newton on the increasing function `secular(o, ·)` with a root
/// in `(lo, hi)`.
fn solve(secular: impl Fn(usize, f64) -> (f64, f64), o: usize, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = secular(o, x);
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / df;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 0.0 {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;

    fn dense(omega0: f64, omega: &[f64], eta: &[C64]) -> Vec<f64> {
        let n = omega.len() + 1;
        let mut h = CMat::zeros(n, n);
        h[(0, 0)] = C64::new(omega0, 0.0);
        for l in 0..omega.len() {
            h[(0, l + 1)] = eta[l];
            h[(l + 1, 0)] = eta[l].conj();
            h[(l + 1, l + 1)] = C64::new(omega[l], 0.0);
        }
        crate::linalg::hermitian_eigenvalues(&h)
    }

    #[test]
    fn matches_dense_spectrum() {
        let omega = [0.3, 0.7, 0.71, 1.2, 2.0];
        let eta = [
            C64::new(0.1, 0.0),
            C64::new(0.0, 0.2),
            C64::new(0.05, 0.05),
            C64::new(0.3, -0.1),
            C64::new(0.01, 0.0),
        ];
        let a = Arrowhead::new(1.0, &omega, &eta).unwrap();
        let mut ev: Vec<f64> = (0..a.n_roots()).map(|k| a.eigenvalue(k)).collect();
        ev.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip(dense(1.0, &omega, &eta)) {
            assert!((x - y).abs() < 1e-13);
        }
        let total: f64 = a.x0.iter().map(|x| x * x).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!((a.w(0.0) - 1.0).norm() < 1e-13);
    }

    #[test]
    fn deflation_and_duplicates() {
        let a = Arrowhead::new(1.0, &[0.5, 1.5], &[C64::new(0.0, 0.0), C64::new(0.2, 0.0)]).unwrap();
        assert_eq!(a.n_roots(), 2);
        assert!(Arrowhead::new(1.0, &[0.5, 0.5], &[C64::new(0.1, 0.0); 2]).is_none());
        let empty = Arrowhead::new(1.3, &[0.5], &[C64::new(0.0, 0.0)]).unwrap();
        assert!((empty.w(2.0) - C64::from_polar(1.0, -2.6)).norm() < 1e-15);
    }
}
