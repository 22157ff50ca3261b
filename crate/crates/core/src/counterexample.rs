//! Non-Gaussian inputs that beat the best Gaussian inputs of the
//! Z-interference objective
//!
//! `u h(X1 + X2 + Z1 + Z2) + h(X1 + Z1) - (1 + u) h(X1 + Z1 + Z2) - Σ1 E[X1²]`.
//!
//! Three constructions are provided: a small-noise location-mixture recipe,
//! a vertical (density-level) perturbation by third Gaussian derivatives,
//! and the same perturbation applied to the limiting functional
//! `h(X + Y) - h(X) - ½ J(X)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{
    self, differential_entropy, gaussian_entropy, least_squares, mixture_entropy_on, mixture_fisher_information,
    GridDensity, GridSpec,
};
use crate::error::{Error, Result};
use crate::gaussian::{GaussDerivMixture, ShiftedMixture, Term};
use crate::hessian::stability_threshold;
use crate::quadrature;

/// Channel parameters of the objective. Only `d = 1` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjectureParams {
    pub u: f64,
    pub n1: f64,
    pub n2: f64,
    pub sigma1: f64,
    pub a2: f64,
    pub d: usize,
}

impl ConjectureParams {
    pub fn new(u: f64, n1: f64, n2: f64, sigma1: f64, a2: f64) -> Result<Self> {
        for (name, v) in [("u", u), ("N1", n1), ("N2", n2), ("Sigma1", sigma1), ("A2", a2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(Self { u, n1, n2, sigma1, a2, d: 1 })
    }
}

/// A one-dimensional input law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Law {
    Mixture(ShiftedMixture),
    Grid(GridDensity),
}

impl From<ShiftedMixture> for Law {
    fn from(m: ShiftedMixture) -> Self {
        Law::Mixture(m)
    }
}

impl From<GaussDerivMixture> for Law {
    fn from(m: GaussDerivMixture) -> Self {
        Law::Mixture(m.into())
    }
}

impl From<GridDensity> for Law {
    fn from(g: GridDensity) -> Self {
        Law::Grid(g)
    }
}

impl Law {
    pub fn second_moment(&self) -> f64 {
        match self {
            Law::Mixture(m) => m.moments(2)[1],
            Law::Grid(g) => g.moment(2),
        }
    }

    /// Law of `X + Z` with `Z ~ N(0, variance)` independent.
    pub fn smooth(&self, variance: f64) -> Result<Law> {
        Ok(match self {
            Law::Mixture(m) => Law::Mixture(m.smooth(variance)),
            Law::Grid(g) => Law::Grid(entropy::convolve_grid_gaussian(g, variance)?),
        })
    }

    /// Law of the independent sum.
    pub fn add(&self, other: &Law) -> Result<Law> {
        Ok(match (self, other) {
            (Law::Mixture(a), Law::Mixture(b)) => Law::Mixture(a.convolve(b)),
            (Law::Grid(a), Law::Grid(b)) => Law::Grid(entropy::convolve_grids(a, b)?),
            (Law::Grid(g), Law::Mixture(m)) | (Law::Mixture(m), Law::Grid(g)) => {
                let tab = tabulate_like(m, g)?;
                Law::Grid(entropy::convolve_grids(g, &tab)?)
            }
        })
    }

    pub fn entropy(&self) -> Result<f64> {
        match self {
            Law::Mixture(m) => mixture_entropy_on(m, GridSpec::covering(&[m])),
            Law::Grid(g) => differential_entropy(g),
        }
    }

    pub fn fisher_information(&self) -> Result<f64> {
        match self {
            Law::Mixture(m) => mixture_fisher_information(m, GridSpec::covering(&[m])),
            Law::Grid(g) => entropy::fisher_information(g),
        }
    }
}

/// Tabulates `m` over its own window with the spacing of `g`.
fn tabulate_like(m: &ShiftedMixture, g: &GridDensity) -> Result<GridDensity> {
    let h = g.step();
    let (lo, hi) = m.window(entropy::WINDOW_SDS);
    let n = ((hi - lo) / h).ceil() as usize + 1;
    entropy::mixture_to_grid(m, lo, lo + (n - 1) as f64 * h, n)
}

/// Evaluates the objective; `N1 = 0` or `N2 = 0` skips that convolution.
pub fn conjecture_objective(params: &ConjectureParams, x1: &Law, x2: &Law) -> Result<f64> {
    let m2 = x2.second_moment();
    if m2 > params.a2 + 1e-9 {
        return Err(Error::PowerViolation { second_moment: m2, budget: params.a2 });
    }
    let a = x1.smooth(params.n1)?;
    let b = a.smooth(params.n2)?;
    let c = b.add(x2)?;
    Ok(params.u * c.entropy()? + a.entropy()? - (1.0 + params.u) * b.entropy()?
        - params.sigma1 * x1.second_moment())
}

/// Objective at Gaussian inputs of variances `k` and `l`.
pub fn gaussian_conjecture_objective(params: &ConjectureParams, k: f64, l: f64) -> f64 {
    let ConjectureParams { u, n1, n2, sigma1, .. } = *params;
    0.5 * (u * (k + n1 + n2 + l).ln() + (k + n1).ln() - (1.0 + u) * (k + n1 + n2).ln()) - sigma1 * k
}

/// Location-mixture pair `(p, q)` for the small-noise construction: `√t X1 ~ p`,
/// `X2 ~ q`, `N2 = m2(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub p: ShiftedMixture,
    pub q: ShiftedMixture,
}

impl Default for Recipe {
    /// Both laws have mean zero; `q` has negative skew and `p` is skewed so that
    /// `∫ p''' ln p > 0`.
    fn default() -> Self {
        let p = ShiftedMixture::gaussian_locations(&[(0.7, -0.7, 1.8), (0.3, 49.0 / 30.0, 0.4)])
            .expect("valid default p");
        let q = ShiftedMixture::gaussian_locations(&[(0.95, 0.1, 0.05), (0.05, -1.9, 0.05)])
            .expect("valid default q");
        Self { p, q }
    }
}

/// Quantities checked before a recipe is run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecipeCheck {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// `⅙ ∫ p''' ln p`.
    pub third_log: f64,
    /// `m3 · (-⅙ ∫ p''' ln p)`, the predicted `t^{3/2}` coefficient.
    pub predicted: f64,
}

impl Recipe {
    pub fn check(&self) -> RecipeCheck {
        let m = self.q.moments(3);
        let third_log = entropy::log_weighted_derivative(&self.p, 3) / 6.0;
        RecipeCheck { m1: m[0], m2: m[1], m3: m[2], third_log, predicted: -m[2] * third_log }
    }

    pub fn validate(&self) -> Result<RecipeCheck> {
        let c = self.check();
        if (self.p.mass() - 1.0).abs() > 1e-9 || (self.q.mass() - 1.0).abs() > 1e-9 {
            return Err(Error::RecipeRejected("p and q must be probability densities".into()));
        }
        if c.m1.abs() > 1e-9 {
            return Err(Error::RecipeRejected(format!("q must have zero mean, got {}", c.m1)));
        }
        if !(c.m2 > 0.0) {
            return Err(Error::RecipeRejected("q must have positive variance".into()));
        }
        if !(c.m3 < 0.0) {
            return Err(Error::RecipeRejected(format!("q must have negative third moment, got {}", c.m3)));
        }
        if !(c.third_log > 0.0) {
            return Err(Error::RecipeRejected(format!(
                "p must have positive (1/6)∫p'''ln p, got {}",
                c.third_log
            )));
        }
        Ok(c)
    }
}

/// `h(X1 + Z2 + X2) + h(X1) - 2 h(X1 + Z2)` with `√t X1 ~ p`, `X2 ~ q`
/// reflected, `Z2 ~ N(0, m2(q))`, evaluated after scaling everything by `√t`
/// (the combination is scale invariant). No sign checks.
pub fn gap_curve(p: &ShiftedMixture, q: &ShiftedMixture, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m2 = q.moments(2)[1];
    t_grid
        .par_iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
            }
            let a = p.smooth(t * m2);
            let b = a.convolve(&q.reflect().scale(t.sqrt()));
            let spec = GridSpec::covering(&[p, &a, &b]);
            let gap = mixture_entropy_on(&b, spec)? + mixture_entropy_on(p, spec)?
                - 2.0 * mixture_entropy_on(&a, spec)?;
            Ok((t, gap))
        })
        .collect()
}

/// Gap curve of a validated recipe.
pub fn lemma2_gap(t_grid: &[f64], recipe: &Recipe) -> Result<Vec<(f64, f64)>> {
    recipe.validate()?;
    gap_curve(&recipe.p, &recipe.q, t_grid)
}

/// Same curve with `X2` replaced by a Gaussian of the same variance.
pub fn lemma2_control(t_grid: &[f64], recipe: &Recipe) -> Result<Vec<(f64, f64)>> {
    let m2 = recipe.q.moments(2)[1];
    let g: ShiftedMixture = GaussDerivMixture::gaussian(m2)?.into();
    gap_curve(&recipe.p, &g, t_grid)
}

/// `t^{3/2}` coefficient of a gap curve fitted on `{t^{3/2}, t², t^{5/2}, t³}`.
pub fn fit_half_order(curve: &[(f64, f64)]) -> f64 {
    let ts: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let ys: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let cols: Vec<Vec<f64>> = [1.5, 2.0, 2.5, 3.0]
        .iter()
        .take(ts.len().saturating_sub(1).max(1))
        .map(|&e| ts.iter().map(|t| t.powf(e)).collect())
        .collect();
    least_squares(&cols, &ys)[0]
}

/// `c D^k γ_v / γ_K` at `x`, stable far into the tails.
fn ratio_to_gaussian(order: u32, v: f64, base: f64, x: f64) -> f64 {
    let sd = v.sqrt();
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    sign * crate::gaussian::hermite_he(order, x / sd) / sd.powi(order as i32)
        * (base / v).sqrt()
        * (-0.5 * x * x * (1.0 / v - 1.0 / base)).exp()
}

/// `∫ (D³γ_v)² / γ_K` by adaptive quadrature.
fn third_derivative_norm(v: f64, k: f64) -> f64 {
    let s = (v * k / (2.0 * k - v)).max(v).sqrt();
    quadrature::integrate_real(
        |x| {
            let r = ratio_to_gaussian(3, v, k, x);
            r * r * crate::gaussian::gaussian_density(k, x)
        },
        0.0,
        s,
        1e-13,
    )
}

/// `-∫(D³γ_{K-δ})²/γ_K + (1+u)∫(D³γ_{K+u-δ})²/γ_{K+u}` by quadrature.
pub fn condition54(k: f64, u: f64, delta: f64) -> Result<f64> {
    if !(k - delta > 0.0) || !(u > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need K - delta > 0 and u > 0, got K={k}, u={u}, delta={delta}"
        )));
    }
    Ok(-third_derivative_norm(k - delta, k) + (1.0 + u) * third_derivative_norm(k + u - delta, k + u))
}

/// Root of `condition54(·, u, delta)` in `(delta, 100)` by bisection to `tol`.
pub fn condition54_root(u: f64, delta: f64, tol: f64) -> Result<f64> {
    let f = |k: f64| condition54(k, u, delta);
    let mut lo = delta + 1e-3 * (1.0 + delta);
    let mut hi = 100.0;
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidParameter(format!(
            "no sign change of the condition on ({lo}, {hi}) for u={u}, delta={delta}"
        )));
    }
    let rising = fhi > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid)? > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `argmax_K { u h(γ_{K+u+L}) + h(γ_K) - (1+u) h(γ_{K+u}) } = (L+u)/(L-1)`.
pub fn stationary_k(l: f64, u: f64) -> Result<f64> {
    if !(l > 1.0) {
        return Err(Error::NoGaussianMax { l });
    }
    Ok((l + u) / (l - 1.0))
}

/// `u h(γ_{K+u+L}) + h(γ_K) - (1+u) h(γ_{K+u})`.
pub fn gaussian_vertical_objective(k: f64, l: f64, u: f64) -> f64 {
    u * gaussian_entropy(k + u + l) + gaussian_entropy(k) - (1.0 + u) * gaussian_entropy(k + u)
}

/// Perturbed pair `γ_K - ε D³γ_{K-δ}` and `Σ_{j≤J} ε^j D^{3j} γ_{L-jδ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalPerturbation {
    pub k: f64,
    pub l: f64,
    pub u: f64,
    pub delta: f64,
    pub eps: f64,
    pub j: u32,
}

impl VerticalPerturbation {
    pub fn new(k: f64, l: f64, u: f64, delta: f64, eps: f64, j: u32) -> Result<Self> {
        let vp = Self::unchecked(k, l, u, delta, eps, j)?;
        vp.check_positive(eps)?;
        Ok(vp)
    }

    fn unchecked(k: f64, l: f64, u: f64, delta: f64, eps: f64, j: u32) -> Result<Self> {
        if !(k > 0.0 && l > 0.0 && u > 0.0 && delta > 0.0) || j == 0 {
            return Err(Error::InvalidParameter("K, L, u, delta and J must be positive".into()));
        }
        if !(k - delta > 0.0) || !(l - j as f64 * delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need K - delta > 0 and L - J delta > 0 (K={k}, L={l}, delta={delta}, J={j})"
            )));
        }
        if 3 * (j + 1) > crate::gaussian::MAX_ORDER {
            return Err(Error::InvalidParameter(format!("J={j} is too large")));
        }
        Ok(Self { k, l, u, delta, eps, j })
    }

    /// Default `J = 2`, `δ = min(K, L/J)/10` and the automatic `ε`.
    pub fn with_defaults(k: f64, l: f64, u: f64) -> Result<Self> {
        let j = 2;
        Self::with_delta(k, l, u, k.min(l / j as f64) / 10.0, j)
    }

    /// Automatic `ε`: the largest `2^{-m}` for which both densities are
    /// positive, halved once.
    pub fn with_delta(k: f64, l: f64, u: f64, delta: f64, j: u32) -> Result<Self> {
        let mut vp = Self::unchecked(k, l, u, delta, 0.0, j)?;
        for m in 0..60 {
            let eps = 0.5f64.powi(m);
            if vp.check_positive(eps).is_ok() {
                vp.eps = eps / 2.0;
                return Ok(vp);
            }
        }
        Err(Error::InvalidParameter("no positive epsilon found".into()))
    }

    pub fn x1(&self, eps: f64) -> GaussDerivMixture {
        GaussDerivMixture::new([Term::new(1.0, 0, self.k), Term::new(-eps, 3, self.k - self.delta)])
            .expect("validated parameters")
    }

    pub fn x2(&self, eps: f64) -> GaussDerivMixture {
        perturbed_partner(self.l, self.delta, self.j, eps)
    }

    fn check_positive(&self, eps: f64) -> Result<()> {
        for (m, at) in [(self.x1(eps), self.k), (self.x2(eps), self.l)] {
            let r = m.min_ratio_to_base();
            if !(r > 0.0) {
                return Err(Error::NegativeDensity { x: at, value: r });
            }
        }
        Ok(())
    }
}

/// `Σ_{j=0}^{J} ε^j D^{3j} γ_{L-jδ}`.
pub fn perturbed_partner(l: f64, delta: f64, j: u32, eps: f64) -> GaussDerivMixture {
    GaussDerivMixture::new((0..=j).map(|i| Term::new(eps.powi(i as i32), 3 * i, l - i as f64 * delta)))
        .expect("validated parameters")
}

/// Result of a vertical perturbation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalGap {
    /// Best Gaussian value for the given `L` (at `K = (L+u)/(L-1)`).
    pub gaussian_value: f64,
    /// Objective at the perturbed pair with the stored `ε`.
    pub perturbed_value: f64,
    /// Extrapolated `ε²` coefficient of the gain over the Gaussian pair `(K, L)`.
    pub quadratic_coeff: f64,
    /// `½ condition54(K, u, δ)`, the coefficient predicted by the entropy expansion.
    pub predicted_coeff: f64,
}

/// Gains `(V(ε) - V(0)) / ε²` extrapolated over `ε, ε/2, ε/4` (two
/// Richardson steps for an even expansion in `ε`).
fn richardson_quadratic<F: Fn(f64) -> Result<f64> + Sync>(eps0: f64, gain: F) -> Result<f64> {
    let eps = [eps0, eps0 / 2.0, eps0 / 4.0];
    let q = eps
        .par_iter()
        .map(|&e| Ok(gain(e)? / (e * e)))
        .collect::<Result<Vec<f64>>>()?;
    let r1 = (4.0 * q[1] - q[0]) / 3.0;
    let r2 = (4.0 * q[2] - q[1]) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

pub fn vertical_gap(vp: &VerticalPerturbation) -> Result<VerticalGap> {
    let gaussian_value = gaussian_vertical_objective(stationary_k(vp.l, vp.u)?, vp.l, vp.u);
    let VerticalPerturbation { u, eps, .. } = *vp;
    let noise = GaussDerivMixture::gaussian(u)?;
    let laws = |e: f64| {
        let x1: ShiftedMixture = vp.x1(e).into();
        let x1u = x1.convolve_centered(&noise);
        let total = x1u.convolve_centered(&vp.x2(e));
        (x1, x1u, total)
    };
    // fixed grids taken from the most perturbed laws so that every ε shares them
    let (a, b, c) = laws(eps);
    let specs = [GridSpec::covering(&[&a]), GridSpec::covering(&[&b]), GridSpec::covering(&[&c])];
    let value = |e: f64| -> Result<f64> {
        let (x1, x1u, total) = laws(e);
        Ok(u * mixture_entropy_on(&total, specs[2])? + mixture_entropy_on(&x1, specs[0])?
            - (1.0 + u) * mixture_entropy_on(&x1u, specs[1])?)
    };
    let base = value(0.0)?;
    let perturbed_value = value(eps)?;
    let quadratic_coeff = richardson_quadratic(eps, |e| Ok(value(e)? - base))?;
    Ok(VerticalGap {
        gaussian_value,
        perturbed_value,
        quadratic_coeff,
        predicted_coeff: 0.5 * condition54(vp.k, vp.u, vp.delta)?,
    })
}

/// Measured `|h(P1 * γ_u * P2) - h(γ_{K+u+L})|` for the given `ε` values.
pub fn outer_entropy_defect(vp: &VerticalPerturbation, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    let noise = GaussDerivMixture::gaussian(vp.u)?;
    let exact = gaussian_entropy(vp.k + vp.u + vp.l);
    eps.par_iter()
        .map(|&e| {
            let total: ShiftedMixture = vp.x1(e).convolve(&noise).convolve(&vp.x2(e)).into();
            let h = mixture_entropy_on(&total, GridSpec::covering(&[&total]))?;
            Ok((e, (h - exact).abs()))
        })
        .collect()
}

/// `h(X + Y) - h(X) - ½ J(X)`.
pub fn limit_functional(x: &Law, y: &Law) -> Result<f64> {
    Ok(x.add(y)?.entropy()? - x.entropy()? - 0.5 * x.fisher_information()?)
}

/// Closed form of the functional at `X = γ_K`, `Y = γ_L`.
pub fn gaussian_limit_functional(k: f64, l: f64) -> f64 {
    0.5 * ((k + l) / k).ln() - 0.5 / k
}

/// Second-order gain of the functional along the third-derivative direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitGain {
    pub l: f64,
    /// Gaussian stationary variance `L/(L-1)`.
    pub k: f64,
    pub delta: f64,
    pub eps: f64,
    /// Whether `Y` carries the matching correction series.
    pub co_perturbed: bool,
    /// Extrapolated `ε²` coefficient of the gain.
    pub coefficient: f64,
    /// Coefficient in the `δ → 0` limit.
    pub predicted: f64,
}

/// Gain of `X = γ_K - ε D³γ_{K-δ}` at `K = L/(L-1)` over the Gaussian
/// stationary value. With `co_perturbed` the partner is
/// `Y = Σ_{j≤J} ε^j D^{3j} γ_{L-jδ}` (same variance `L`), which keeps
/// `X + Y` Gaussian to order `ε^{J+1}`; otherwise `Y = γ_L`.
pub fn limit_functional_gain(l: f64, delta: f64, j: u32, co_perturbed: bool) -> Result<LimitGain> {
    if !(l > 1.0) {
        return Err(Error::NoGaussianMax { l });
    }
    let k = l / (l - 1.0);
    let vp = VerticalPerturbation::with_delta(k, l, 1.0, delta, j)?;
    let y = |e: f64| -> ShiftedMixture {
        if co_perturbed {
            vp.x2(e).into()
        } else {
            GaussDerivMixture::gaussian(l).expect("l > 1").into()
        }
    };
    let x = |e: f64| -> ShiftedMixture { vp.x1(e).into() };
    let (x0, s0) = (x(vp.eps), x(vp.eps).convolve(&y(vp.eps)));
    let spec_x = GridSpec::covering(&[&x0]);
    let spec_s = GridSpec::covering(&[&s0]);
    let value = |e: f64| -> Result<f64> {
        let xe = x(e);
        let s = xe.convolve(&y(e));
        Ok(mixture_entropy_on(&s, spec_s)? - mixture_entropy_on(&xe, spec_x)?
            - 0.5 * mixture_fisher_information(&xe, spec_x)?)
    };
    let base = value(0.0)?;
    let coefficient = richardson_quadratic(vp.eps, |e| Ok(value(e)? - base))?;
    let mut predicted = 3.0 / k.powi(3) - 9.0 / k.powi(4);
    if !co_perturbed {
        predicted -= 3.0 / (k + l).powi(3);
    }
    Ok(LimitGain { l, k, delta, eps: vp.eps, co_perturbed, coefficient, predicted })
}

/// `(K, L)` with `K = (L+u)/(L-1)` placed at `factor` times the stability threshold.
pub fn stationary_pair_at(u: f64, factor: f64) -> (f64, f64) {
    let k = factor * stability_threshold(u);
    (k, (k + u) / (k - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::geomspace;

    /// Closed form `∫ (D³γ_v)²/γ_K` via the Gaussian integral with
    /// `s = vK/(2K - v)`: `√(K s)/v⁷ (15 s³ - 18 v s² + 9 v² s)`.
    fn third_norm_closed(v: f64, k: f64) -> f64 {
        let s = v * k / (2.0 * k - v);
        (k * s).sqrt() / v.powi(7) * (15.0 * s.powi(3) - 18.0 * v * s * s + 9.0 * v * v * s)
    }

    fn condition54_closed(k: f64, u: f64, d: f64) -> f64 {
        -third_norm_closed(k - d, k) + (1.0 + u) * third_norm_closed(k + u - d, k + u)
    }

    #[test]
    fn condition54_values() {
        let c = condition54(4.0, 1.0, 0.0).unwrap();
        assert!((c - 0.00225).abs() < 1e-13, "{c}");
        let t = stability_threshold(1.0);
        assert!(condition54(t, 1.0, 0.0).unwrap().abs() < 1e-10);
        let d = condition54(4.0, 1.0, 0.01).unwrap();
        assert!(((d - c) / c).abs() < 0.01);
        assert!((d - condition54_closed(4.0, 1.0, 0.01)).abs() < 1e-12);
        for k in [1.5, 3.0, 7.0] {
            for delta in [0.0, 0.1, 0.5] {
                let q = condition54(k, 0.5, delta).unwrap();
                assert!((q - condition54_closed(k, 0.5, delta)).abs() < 1e-11);
            }
        }
        assert!(condition54(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn condition54_root_matches_threshold() {
        for u in [0.5, 1.0, 2.0] {
            let r = condition54_root(u, 0.0, 1e-12).unwrap();
            assert!((r - stability_threshold(u)).abs() < 1e-8, "{u}: {r}");
        }
    }

    #[test]
    fn stationary_point_rejects_small_l() {
        assert!(matches!(stationary_k(1.0, 1.0), Err(Error::NoGaussianMax { .. })));
        assert!((stationary_k(1.4, 1.0).unwrap() - 6.0).abs() < 1e-12);
        // the stationary point maximizes the Gaussian objective
        let (l, u) = (1.4, 1.0);
        let k = stationary_k(l, u).unwrap();
        let best = gaussian_vertical_objective(k, l, u);
        for dk in [-0.5, -0.01, 0.01, 0.5] {
            assert!(gaussian_vertical_objective(k + dk, l, u) < best);
        }
    }

    #[test]
    fn objective_with_gaussians_matches_closed_form() {
        let params = ConjectureParams::new(1.0, 0.3, 1.0, 0.05, 10.0).unwrap();
        for k in [0.5, 2.0, 6.0] {
            for l in [0.5, 3.0] {
                let x1: Law = GaussDerivMixture::gaussian(k).unwrap().into();
                let x2: Law = GaussDerivMixture::gaussian(l).unwrap().into();
                let v = conjecture_objective(&params, &x1, &x2).unwrap();
                assert!((v - gaussian_conjecture_objective(&params, k, l)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn objective_tends_to_zero_from_below() {
        let params = ConjectureParams::new(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let x2: Law = GaussDerivMixture::gaussian(1.0).unwrap().into();
        let mut prev = f64::NEG_INFINITY;
        for k in [10.0, 100.0, 1000.0] {
            let x1: Law = GaussDerivMixture::gaussian(k).unwrap().into();
            let v = conjecture_objective(&params, &x1, &x2).unwrap();
            assert!(v < 0.0 && v > prev, "{k}: {v}");
            prev = v;
        }
        assert!(prev > -1e-6);
    }

    #[test]
    fn objective_power_violation() {
        let params = ConjectureParams::new(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let x: Law = GaussDerivMixture::gaussian(2.0).unwrap().into();
        assert!(matches!(
            conjecture_objective(&params, &x, &x),
            Err(Error::PowerViolation { .. })
        ));
    }

    #[test]
    fn objective_on_grids_matches_mixtures() {
        let params = ConjectureParams::new(1.0, 0.2, 1.0, 0.0, 2.0).unwrap();
        let m1 = ShiftedMixture::gaussian_locations(&[(0.5, -1.0, 0.8), (0.5, 1.0, 0.8)]).unwrap();
        let m2: ShiftedMixture = GaussDerivMixture::gaussian(1.5).unwrap().into();
        let exact = conjecture_objective(&params, &m1.clone().into(), &m2.clone().into()).unwrap();
        let g1 = entropy::mixture_to_grid(&m1, -15.0, 15.0, 3001).unwrap();
        let grid = conjecture_objective(&params, &g1.into(), &m2.into()).unwrap();
        assert!((grid - exact).abs() < 1e-7, "{grid} vs {exact}");
    }

    #[test]
    fn default_recipe_passes_checks() {
        let c = Recipe::default().validate().unwrap();
        assert!(c.m3 < 0.0 && c.third_log > 0.0 && c.predicted > 0.0);
    }

    #[test]
    fn symmetric_recipe_is_rejected_and_has_no_half_order_gap() {
        let p = Recipe::default().p;
        let q = ShiftedMixture::gaussian_locations(&[(0.5, -0.5, 0.1), (0.5, 0.5, 0.1)]).unwrap();
        let r = Recipe { p: p.clone(), q: q.clone() };
        assert!(matches!(r.validate(), Err(Error::RecipeRejected(_))));
        let curve = gap_curve(&p, &q, &geomspace(2e-3, 3e-2, 8)).unwrap();
        assert!(fit_half_order(&curve).abs() < 1e-3, "{}", fit_half_order(&curve));
    }

    #[test]
    fn vertical_defaults_are_valid() {
        let vp = VerticalPerturbation::with_defaults(6.0, 1.4, 1.0).unwrap();
        assert_eq!(vp.j, 2);
        assert!((vp.delta - 0.07).abs() < 1e-15);
        assert!(vp.x1(vp.eps).min_ratio_to_base() > 0.0);
        assert!(vp.x2(vp.eps).min_ratio_to_base() > 0.0);
        assert!(vp.x1(4.0 * vp.eps).min_ratio_to_base() <= 0.0 || vp.x2(4.0 * vp.eps).min_ratio_to_base() <= 0.0);
        assert!(VerticalPerturbation::new(6.0, 1.4, 1.0, 0.07, 0.5, 2).is_err());
        assert!(VerticalPerturbation::new(6.0, 1.4, 1.0, 0.8, 1e-3, 2).is_err());
    }

    #[test]
    fn vertical_gap_signs() {
        let vp = VerticalPerturbation::with_defaults(6.0, 1.4, 1.0).unwrap();
        let g = vertical_gap(&vp).unwrap();
        assert!(g.quadratic_coeff > 0.0);
        assert!(g.perturbed_value > g.gaussian_value);
        assert!(((g.quadratic_coeff - g.predicted_coeff) / g.predicted_coeff).abs() < 1e-3, "{g:?}");

        let vp = VerticalPerturbation::with_defaults(2.0, 3.0, 1.0).unwrap();
        let g = vertical_gap(&vp).unwrap();
        assert!(g.quadratic_coeff < 0.0);
        assert!(((g.quadratic_coeff - g.predicted_coeff) / g.predicted_coeff).abs() < 1e-3, "{g:?}");

        let bad = VerticalPerturbation::with_defaults(2.0, 0.9, 1.0).unwrap();
        assert!(matches!(vertical_gap(&bad), Err(Error::NoGaussianMax { .. })));
    }

    #[test]
    fn outer_entropy_defect_order() {
        for j in [1u32, 2] {
            let vp = VerticalPerturbation::unchecked(4.0, 2.0, 1.0, 0.5, 0.0, j).unwrap();
            let eps = geomspace(0.05, 0.2, 5);
            let d = outer_entropy_defect(&vp, &eps).unwrap();
            let xs: Vec<f64> = d.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = d.iter().map(|p| p.1).collect();
            let slope = entropy::log_log_slope(&xs, &ys);
            assert!(slope >= 2.0 * (j as f64 + 1.0) - 0.2, "J={j}: slope {slope}, {d:?}");
        }
    }

    #[test]
    fn limit_functional_gaussian_closed_form() {
        let (k, l) = (2.0, 2.0);
        let x: Law = GaussDerivMixture::gaussian(k).unwrap().into();
        let y: Law = GaussDerivMixture::gaussian(l).unwrap().into();
        let v = limit_functional(&x, &y).unwrap();
        assert!((v - gaussian_limit_functional(k, l)).abs() < 1e-10);
        // stationary in K at L/(L-1)
        let g = |k: f64| gaussian_limit_functional(k, l);
        assert!(g(2.0) > g(1.99) && g(2.0) > g(2.01));
    }
}
