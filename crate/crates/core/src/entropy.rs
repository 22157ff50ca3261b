//! Differential entropy, Fisher information and small-noise entropy
//! expansions for one-dimensional densities.
//!
//! Densities are tabulated on uniform grids and integrated with the
//! trapezoid rule. For smooth, rapidly decaying integrands the trapezoid rule
//! converges spectrally, so a grid spacing of a fraction of the narrowest
//! component's standard deviation already gives close to machine precision.
//! Mass beyond the grid window is accounted for with an analytic Gaussian tail.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{E, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::gaussian::ShiftedMixture;
use crate::quadrature;

/// Tolerance on total mass accepted by the entropy routines.
pub const MASS_TOLERANCE: f64 = 1e-7;
/// Values in `[-NEGATIVE_TOLERANCE, 0]` are clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;
/// Smallest density value that enters a logarithm.
pub const LOG_FLOOR: f64 = 1e-300;
/// Default half-width of a tabulation window, in standard deviations.
pub const WINDOW_SDS: f64 = 12.0;
/// Smallest grid accepted for an entropy evaluation.
pub const MIN_GRID: usize = 1024;

/// `h(N(0, v)) = ½ ln(2πe v)`.
pub fn gaussian_entropy(variance: f64) -> f64 {
    0.5 * (2.0 * PI * E * variance).ln()
}

/// Gaussian piece `weight · N(mean, variance)` describing the mass of a
/// density beyond one end of its grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

impl TailModel {
    /// Mass and `-∫ f ln f` of `f = w·N(μ, v)` over `[b, ∞)` in the
    /// standardized coordinate `z = (b - μ)/σ` (pass a reflected `z` for the
    /// left tail).
    fn mass_and_entropy(&self, z: f64) -> (f64, f64) {
        if self.weight <= 0.0 {
            return (0.0, 0.0);
        }
        let upper = 0.5 * erfc(z / SQRT_2);
        let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let mass = self.weight * upper;
        // -ln f = -ln w + ½ln(2πv) + z²/2, and E[z²; z > b] = Q(b) + b φ(b)
        let ent = self.weight
            * ((-self.weight.ln() + 0.5 * (2.0 * PI * self.variance).ln()) * upper
                + 0.5 * (upper + z * phi));
        (mass, ent)
    }
}

/// Nonnegative density tabulated at `n` equally spaced points of `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    /// Left and right tail models.
    pub tails: Option<(TailModel, TailModel)>,
}

impl GridDensity {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>, tails: Option<(TailModel, TailModel)>) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("bad grid window [{lo}, {hi}]")));
        }
        if values.len() < 5 {
            return Err(Error::InvalidParameter("grid needs at least 5 points".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite density value".into()));
        }
        Ok(Self { lo, hi, values, tails })
    }

    /// Tabulates `f` on the grid described by `spec`.
    pub fn tabulate<F: Fn(f64) -> f64 + Sync>(spec: GridSpec, f: F) -> Result<Self> {
        let values = (0..spec.n).into_par_iter().map(|i| f(spec.x(i))).collect();
        Self::new(spec.lo, spec.hi, values, None)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { lo: self.lo, hi: self.hi, n: self.n() }
    }

    fn tail_terms(&self) -> (f64, f64) {
        match &self.tails {
            None => (0.0, 0.0),
            Some((left, right)) => {
                let zl = (left.mean - self.lo) / left.variance.sqrt();
                let zr = (self.hi - right.mean) / right.variance.sqrt();
                let (ml, el) = left.mass_and_entropy(zl);
                let (mr, er) = right.mass_and_entropy(zr);
                (ml + mr, el + er)
            }
        }
    }

    /// Trapezoid mass of the tabulated part plus the tail mass.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.step()) + self.tail_terms().0
    }

    /// `∫ x^k p` over the grid (tails ignored).
    pub fn moment(&self, k: i32) -> f64 {
        let h = self.step();
        let w: Vec<f64> = (0..self.n()).map(|i| self.x(i).powi(k) * self.values[i]).collect();
        trapezoid(&w, h)
    }

    /// Law of `X + a`.
    pub fn shifted(&self, a: f64) -> Self {
        let tails = self.tails.map(|(l, r)| {
            (TailModel { mean: l.mean + a, ..l }, TailModel { mean: r.mean + a, ..r })
        });
        Self { lo: self.lo + a, hi: self.hi + a, values: self.values.clone(), tails }
    }

    /// Law of `s·X` for `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let tails = self.tails.map(|(l, r)| {
            let f = |t: TailModel| TailModel { mean: t.mean * s, variance: t.variance * s * s, weight: t.weight };
            (f(l), f(r))
        });
        Self {
            lo: self.lo * s,
            hi: self.hi * s,
            values: self.values.iter().map(|v| v / s).collect(),
            tails,
        }
    }

    fn check_mass(&self) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NonNormalized { mass, tolerance: MASS_TOLERANCE });
        }
        Ok(())
    }

    fn check_sign(&self) -> Result<()> {
        if let Some((i, &v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -NEGATIVE_TOLERANCE)
        {
            return Err(Error::NegativeDensity { x: self.x(i), value: v });
        }
        Ok(())
    }
}

/// Uniform grid `lo + i (hi - lo)/(n - 1)`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * (self.hi - self.lo) / (self.n - 1) as f64
    }

    /// Grid covering `WINDOW_SDS` standard deviations around every mixture in
    /// `ms`, with a power-of-two size of at least 4096 and at least eight
    /// points per standard deviation of the narrowest term.
    pub fn covering(ms: &[&ShiftedMixture]) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut min_sd = f64::INFINITY;
        for m in ms {
            let (a, b) = m.window(WINDOW_SDS);
            lo = lo.min(a);
            hi = hi.max(b);
            for (_, c) in m.components() {
                for t in c.terms() {
                    min_sd = min_sd.min(t.variance.sqrt());
                }
            }
        }
        let wanted = ((hi - lo) / (min_sd / 8.0)).ceil() as usize;
        let n = wanted.max(4096).next_power_of_two().min(1 << 20) + 1;
        Self { lo, hi, n }
    }
}

/// Neumaier-compensated trapezoid rule.
pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let v = if i == 0 || i + 1 == n { 0.5 * v } else { v };
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) * h
}

/// `-∫ p ln p` by the trapezoid rule plus the analytic tail contribution.
pub fn differential_entropy(p: &GridDensity) -> Result<f64> {
    p.check_sign()?;
    p.check_mass()?;
    let integrand: Vec<f64> = p
        .values
        .iter()
        .map(|&v| if v < LOG_FLOOR { 0.0 } else { -v * v.ln() })
        .collect();
    Ok(trapezoid(&integrand, p.step()) + p.tail_terms().1)
}

/// Tabulates a mixture on `[lo, hi]` with tail models taken from its
/// widest order-0 components.
pub fn mixture_to_grid(m: &ShiftedMixture, lo: f64, hi: f64, n: usize) -> Result<GridDensity> {
    let spec = GridSpec { lo, hi, n };
    let mut g = GridDensity::tabulate(spec, |x| m.density(x))?;
    g.check_sign()?;
    for v in &mut g.values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let tail = |right: bool| {
        m.dominant_gaussian(right).map(|(mu, t)| TailModel { mean: mu, variance: t.variance, weight: t.coeff })
    };
    if let (Some(l), Some(r)) = (tail(false), tail(true)) {
        g.tails = Some((l, r));
    }
    Ok(g)
}

/// Entropy of a mixture on an explicit grid.
pub fn mixture_entropy_on(m: &ShiftedMixture, spec: GridSpec) -> Result<f64> {
    differential_entropy(&mixture_to_grid(m, spec.lo, spec.hi, spec.n)?)
}

/// Entropy of a mixture on its default grid.
pub fn mixture_entropy(m: &ShiftedMixture) -> Result<f64> {
    mixture_entropy_on(m, GridSpec::covering(&[m]))
}

/// `∫ (p')² / p` from five-point central differences.
pub fn fisher_information(p: &GridDensity) -> Result<f64> {
    p.check_sign()?;
    p.check_mass()?;
    let h = p.step();
    let v = &p.values;
    let n = v.len();
    let mut integrand = vec![0.0; n];
    for i in 2..n - 2 {
        if v[i] < LOG_FLOOR {
            continue;
        }
        let d = (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h);
        integrand[i] = d * d / v[i];
    }
    Ok(trapezoid(&integrand, h))
}

/// `∫ (p')² / p` for a mixture using its exact derivative.
pub fn mixture_fisher_information(m: &ShiftedMixture, spec: GridSpec) -> Result<f64> {
    let g = mixture_to_grid(m, spec.lo, spec.hi, spec.n)?;
    g.check_mass()?;
    let dm = m.derivative(1);
    let integrand: Vec<f64> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let p = g.values[i];
            if p < LOG_FLOOR {
                0.0
            } else {
                let d = dm.density(spec.x(i));
                d * d / p
            }
        })
        .collect();
    Ok(trapezoid(&integrand, g.step()))
}

/// `∫ p^{(k)} ln p` by adaptive quadrature over the mixture window.
pub fn log_weighted_derivative(p: &ShiftedMixture, k: u32) -> f64 {
    let dk = p.derivative(k);
    let (lo, hi) = p.window(WINDOW_SDS);
    quadrature::integrate(
        |x| {
            let v = p.density(x);
            if v < LOG_FLOOR {
                0.0
            } else {
                dk.density(x) * v.ln()
            }
        },
        lo,
        hi,
        256,
        1e-15,
        1e-12,
    )
    .value
}

/// Convolution of a tabulated density with `N(0, variance)` by direct
/// trapezoid quadrature at every output point; the output grid keeps the
/// input spacing and grows by `WINDOW_SDS` standard deviations on each side.
pub fn convolve_grid_gaussian(p: &GridDensity, variance: f64) -> Result<GridDensity> {
    if variance == 0.0 {
        return Ok(p.clone());
    }
    if !(variance > 0.0) {
        return Err(Error::InvalidParameter(format!("variance must be nonnegative, got {variance}")));
    }
    let h = p.step();
    let pad = (WINDOW_SDS * variance.sqrt() / h).ceil() as usize;
    let n = p.n() + 2 * pad;
    let lo = p.lo - pad as f64 * h;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let x = lo + k as f64 * h;
            let w: Vec<f64> = (0..p.n())
                .map(|i| p.values[i] * crate::gaussian::gaussian_density(variance, x - p.x(i)))
                .collect();
            trapezoid(&w, h)
        })
        .collect();
    let tails = p.tails.map(|(l, r)| {
        (
            TailModel { variance: l.variance + variance, ..l },
            TailModel { variance: r.variance + variance, ..r },
        )
    });
    GridDensity::new(lo, lo + (n - 1) as f64 * h, values, tails)
}

/// Convolution of two tabulated densities sharing a grid spacing.
pub fn convolve_grids(a: &GridDensity, b: &GridDensity) -> Result<GridDensity> {
    let h = a.step();
    if ((b.step() - h) / h).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "grid spacings differ: {} vs {}",
            h,
            b.step()
        )));
    }
    let n = a.n() + b.n() - 1;
    let lo = a.lo + b.lo;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let i0 = k.saturating_sub(b.n() - 1);
            let i1 = k.min(a.n() - 1);
            let w: Vec<f64> = (i0..=i1).map(|i| a.values[i] * b.values[k - i]).collect();
            w.iter().sum::<f64>() * h
        })
        .collect();
    let tails = match (a.tails, b.tails) {
        (Some((al, ar)), Some((bl, br))) => Some((
            TailModel { mean: al.mean + bl.mean, variance: al.variance + bl.variance, weight: al.weight * bl.weight },
            TailModel { mean: ar.mean + br.mean, variance: ar.variance + br.variance, weight: ar.weight * br.weight },
        )),
        _ => None,
    };
    GridDensity::new(lo, lo + (n - 1) as f64 * h, values, tails)
}

/// Fitted small-noise expansion `h(p_t) - h(p) ≈ c1 t + c15 t^{3/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyExpansion {
    pub c1: f64,
    pub c15: f64,
    pub residual_slope: f64,
    /// `m2(q) · (-½ ∫ p'' ln p)` by quadrature.
    pub c1_quadrature: f64,
    /// `m3(q) · (-⅙ ∫ p''' ln p)` by quadrature.
    pub c15_quadrature: f64,
    /// `(t, h(p_t) - h(p))` samples used in the fit.
    pub samples: Vec<(f64, f64)>,
}

/// Least squares fit of `y` on the given columns; columns are rescaled to
/// unit norm before the SVD solve.
pub(crate) fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let rows = y.len();
    let cols = columns.len();
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let a = DMatrix::from_fn(rows, cols, |i, j| columns[j][i] / norms[j]);
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("SVD computed with U and V");
    (0..cols).map(|j| sol[j] / norms[j]).collect()
}

/// Slope of the least-squares line through `(ln x, ln |y|)`, skipping zeros.
pub(crate) fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y != 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Small-`t` expansion of `h(p_t)` where `p_t(y) = ∫ p(y + √t u) q(u) du`,
/// i.e. `p_t` is the law of `X - √t U` for `X ~ p`, `U ~ q`.
///
/// The increments are fitted on `{t, t^{3/2}, t², t^{5/2}, t³}`; the three
/// higher-order columns absorb the next terms of the expansion so that the
/// leading coefficients are not biased by them. The residual slope is that of
/// `h(p_t) - h(p) - c1 t - c15 t^{3/2}` on a log-log scale.
pub fn lemma1_expansion(p: &ShiftedMixture, q: &ShiftedMixture, t_grid: &[f64]) -> Result<EntropyExpansion> {
    if t_grid.len() < 6 {
        return Err(Error::InvalidParameter("need at least 6 values of t".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 0.1)) {
        return Err(Error::InvalidParameter("t values must lie in (0, 0.1]".into()));
    }
    if (q.mass() - 1.0).abs() > 1e-9 {
        return Err(Error::NonNormalized { mass: q.mass(), tolerance: 1e-9 });
    }
    let qm = q.moments(3);
    if qm[0].abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("q must have zero mean, got {}", qm[0])));
    }
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let smoothed = |t: f64| p.convolve(&q.reflect().scale(t.sqrt()));
    let widest = smoothed(t_max);
    let spec = GridSpec::covering(&[p, &widest]);
    let h0 = mixture_entropy_on(p, spec)?;
    let diffs = t_grid
        .par_iter()
        .map(|&t| Ok(mixture_entropy_on(&smoothed(t), spec)? - h0))
        .collect::<Result<Vec<f64>>>()?;

    let cols: Vec<Vec<f64>> = [1.0, 1.5, 2.0, 2.5, 3.0]
        .iter()
        .map(|&e| t_grid.iter().map(|t| t.powf(e)).collect())
        .collect();
    let coef = least_squares(&cols, &diffs);
    let (c1, c15) = (coef[0], coef[1]);
    let resid: Vec<f64> = t_grid
        .iter()
        .zip(&diffs)
        .map(|(t, d)| d - c1 * t - c15 * t.powf(1.5))
        .collect();
    let residual_slope = log_log_slope(t_grid, &resid);

    let c1_quadrature = qm[1] * (-0.5 * log_weighted_derivative(p, 2));
    let c15_quadrature = qm[2] * (-log_weighted_derivative(p, 3) / 6.0);
    if (residual_slope - 2.0).abs() > 0.25 {
        return Err(Error::FitRejected { slope: residual_slope });
    }
    Ok(EntropyExpansion {
        c1,
        c15,
        residual_slope,
        c1_quadrature,
        c15_quadrature,
        samples: t_grid.iter().cloned().zip(diffs).collect(),
    })
}

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}
