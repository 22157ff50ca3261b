//! Second-order analysis at the Gaussian stationary point.
//!
//! Perturbations are written in the Hermite basis, `U = Σ A_α D^αγ_K / γ_K`
//! and likewise `B_α` for the partner, so the second variation is diagonal in
//! the order `α`. The per-order contributions are collected in a
//! [`HessianReport`].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, PsdMatrix};

/// Width of the band around the threshold classified as critical.
pub const CRITICAL_BAND: f64 = 1e-9;

/// Tolerance on the stationarity relation `K = (L+u)/(L-1)`.
pub const STATIONARITY_TOL: f64 = 1e-9;

/// Largest stable Gaussian variance, `u / ((1+u)^{1/3} - 1)`.
pub fn stability_threshold(u: f64) -> f64 {
    u / ((1.0 + u).cbrt() - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Critical,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Critical => "critical",
        })
    }
}

pub fn stability_classify(k: f64, u: f64) -> Stability {
    let t = stability_threshold(u);
    if (k - t).abs() < CRITICAL_BAND {
        Stability::Critical
    } else if k < t {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Finitely supported Hermite coefficients relative to `γ_{base_variance}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HermiteCoeffVector {
    pub coeffs: BTreeMap<u32, f64>,
    pub base_variance: f64,
}

impl HermiteCoeffVector {
    pub fn new(base_variance: f64) -> Self {
        Self { coeffs: BTreeMap::new(), base_variance }
    }

    pub fn with(mut self, alpha: u32, value: f64) -> Self {
        self.coeffs.insert(alpha, value);
        self
    }

    pub fn get(&self, alpha: u32) -> f64 {
        self.coeffs.get(&alpha).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub per_alpha_terms: BTreeMap<u32, f64>,
    pub total: f64,
    pub classification: Stability,
}

/// Checks `K = (L+u)/(L-1)`.
pub fn check_stationary(k: f64, l: f64, u: f64) -> Result<()> {
    let expected = if l > 1.0 { (l + u) / (l - 1.0) } else { f64::INFINITY };
    if !(k > 0.0 && u > 0.0) || !((k - expected).abs() <= STATIONARITY_TOL * k.max(1.0)) {
        return Err(Error::NotStationary { k, l, u, expected });
    }
    Ok(())
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Per-order term `I_α` of the second variation.
pub fn hessian_term(alpha: u32, k: f64, l: f64, u: f64, a: f64, b: f64) -> f64 {
    if alpha == 0 {
        return 0.0;
    }
    let p = alpha as i32 + 1;
    let s = (k + u + l).powi(p);
    let inner = -u * a * a / s - a * a / k.powi(p) + (1.0 + u) * a * a / (k + u).powi(p)
        - u * b * b / s
        - 2.0 * u * a * b / s;
    factorial(alpha + 1) * inner
}

pub fn hessian_quadratic_form(
    k: f64,
    l: f64,
    u: f64,
    a: &HermiteCoeffVector,
    b: &HermiteCoeffVector,
) -> Result<HessianReport> {
    check_stationary(k, l, u)?;
    if b.get(1) != 0.0 {
        return Err(Error::InvalidParameter("partner coefficient of order 1 must vanish".into()));
    }
    let mut per_alpha_terms = BTreeMap::new();
    for &alpha in a.coeffs.keys().chain(b.coeffs.keys()) {
        if alpha == 0 {
            continue;
        }
        per_alpha_terms.insert(alpha, hessian_term(alpha, k, l, u, a.get(alpha), b.get(alpha)));
    }
    let total = per_alpha_terms.values().sum();
    Ok(HessianReport { per_alpha_terms, total, classification: stability_classify(k, u) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub u: f64,
    pub l: f64,
    pub k: f64,
    pub threshold: f64,
    pub classification: Stability,
}

/// Classification of the stationary point on a `(u, L)` grid, row-major in `u`.
pub fn phase_diagram(u_grid: &[f64], l_grid: &[f64]) -> Result<Vec<PhaseCell>> {
    if u_grid.is_empty() || l_grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if let Some(&u) = u_grid.iter().find(|&&u| !(u > 0.0)) {
        return Err(Error::InvalidParameter(format!("u = {u} must be positive")));
    }
    if let Some(&l) = l_grid.iter().find(|&&l| !(l > 1.0)) {
        return Err(Error::NoGaussianMax { l });
    }
    let cells: Vec<(f64, f64)> =
        u_grid.iter().flat_map(|&u| l_grid.iter().map(move |&l| (u, l))).collect();
    Ok(cells
        .into_par_iter()
        .map(|(u, l)| {
            let k = (l + u) / (l - 1.0);
            PhaseCell { u, l, k, threshold: stability_threshold(u), classification: stability_classify(k, u) }
        })
        .collect())
}

/// Ingredients of the local-optimality radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Certificate {
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Minimum generalized Rayleigh quotient of the order-two problem.
    pub rayleigh_min: f64,
    /// Worst order-three ratio `(1+u)(k_max/(k_max+u))³`.
    pub rho: f64,
    pub k_eigenvalues: Vec<f64>,
    pub l_eigenvalues: Vec<f64>,
}

/// Local-optimality radius around the matrix Gaussian maximizer.
///
/// Both matrices are rotated into the eigenbasis of `L`, where the maximizer
/// is diagonal. The order-three condition is tightest when all mass sits on
/// the largest eigenvalue of `K`; the order-two condition is a generalized
/// eigenproblem over symmetric coefficient matrices `Λ`.
pub fn theorem5_certificate(k: &PsdMatrix, l: &PsdMatrix, u: f64) -> Result<Theorem5Certificate> {
    k.same_dim(l)?;
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!("u = {u} must be positive")));
    }
    let le = l.eigen();
    let lmin = *le.values.last().expect("nonempty");
    if !(lmin > 1.0) {
        return Err(Error::NoGaussianMax { l: lmin });
    }
    let kd: Vec<f64> = le.values.iter().map(|&li| (li + u) / (li - 1.0)).collect();
    let expected = PsdMatrix::from_eigen(&kd, &le.vectors);
    let scale = k.matrix().norm().max(1.0);
    let kmax_given = k.eigenvalues()[0];
    if (k.matrix() - expected.matrix()).norm() > STATIONARITY_TOL * scale {
        return Err(Error::NotStationary {
            k: kmax_given,
            l: lmin,
            u,
            expected: kd.iter().cloned().fold(f64::MIN, f64::max),
        });
    }
    let threshold = stability_threshold(u);
    let kmax = kd.iter().cloned().fold(f64::MIN, f64::max);
    if kmax >= threshold - CRITICAL_BAND {
        return Err(Error::HypothesisFailed { eigenvalue: kmax, threshold });
    }

    let rho = (1.0 + u) * (kmax / (kmax + u)).powi(3);
    let eps2 = (1.0 - rho) / (1.0 + rho);

    let d = kd.len();
    let m: Vec<f64> = kd.iter().zip(&le.values).map(|(&ki, &li)| ki + u + li).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    // Quadratic forms in λ_{e_i+e_j}; Λ_ii = 2λ_{2e_i}, Λ_ij = λ_{e_i+e_j}.
    let numerator = |lam: &[f64]| -> f64 {
        let mut s = 0.0;
        let mut tr = 0.0;
        for (&(i, j), &x) in pairs.iter().zip(lam) {
            if i == j {
                s += x * x * 2.0 / (kd[i] * kd[i]);
                tr += 4.0 * x * x / (m[i] * m[i]);
            } else {
                s += x * x / (kd[i] * kd[j]);
                tr += 2.0 * x * x / (m[i] * m[j]);
            }
        }
        s + 0.5 * u * tr
    };
    let denominator = |lam: &[f64]| -> f64 {
        let mut s = 0.0;
        for (&(i, j), &x) in pairs.iter().zip(lam) {
            if i == j {
                s += x * x * 2.0 / ((kd[i] + u) * (kd[i] + u));
            } else {
                s += x * x / ((kd[i] + u) * (kd[j] + u));
            }
        }
        (1.0 + u) * s
    };
    let n = pairs.len();
    let gram = |q: &dyn Fn(&[f64]) -> f64| -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |a, b| {
            let mut e = vec![0.0; n];
            e[a] += 1.0;
            e[b] += 1.0;
            let both = q(&e);
            if a == b {
                return both / 4.0;
            }
            let mut ea = vec![0.0; n];
            ea[a] = 1.0;
            let mut eb = vec![0.0; n];
            eb[b] = 1.0;
            0.5 * (both - q(&ea) - q(&eb))
        })
    };
    let nm = gram(&numerator);
    let dm = gram(&denominator);
    let de = jacobi_eigen(&dm);
    let inv_sqrt = &de.vectors
        * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, de.values.iter().map(|x| 1.0 / x.sqrt())))
        * de.vectors.transpose();
    let reduced = &inv_sqrt * nm * &inv_sqrt;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let rayleigh_min = *jacobi_eigen(&reduced).values.last().expect("nonempty");
    let r = rayleigh_min;
    let eps1 = (-(2.0 + r) + (r * r + 8.0 * r).sqrt()) / 2.0;
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::HypothesisFailed { eigenvalue: kmax, threshold });
    }
    Ok(Theorem5Certificate {
        eps: eps1.min(eps2),
        eps1,
        eps2,
        rayleigh_min,
        rho,
        k_eigenvalues: kd,
        l_eigenvalues: le.values,
    })
}

/// Radius from [`theorem5_certificate`], `None` when any precondition fails.
pub fn theorem5_epsilon(k: &PsdMatrix, l: &PsdMatrix, u: f64) -> Option<f64> {
    theorem5_certificate(k, l, u).ok().map(|c| c.eps)
}

/// Maximizer `(L - I)^{-1}(L + uI)` for `L ≻ I`.
pub fn matrix_maximizer(l: &PsdMatrix, u: f64) -> Result<PsdMatrix> {
    let e = l.eigen();
    let lmin = *e.values.last().expect("nonempty");
    if !(lmin > 1.0) {
        return Err(Error::NoGaussianMax { l: lmin });
    }
    let kd: Vec<f64> = e.values.iter().map(|&li| (li + u) / (li - 1.0)).collect();
    Ok(PsdMatrix::from_eigen(&kd, &e.vectors))
}
