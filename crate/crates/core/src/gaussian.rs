//! Exact algebra of signed Gaussian-derivative mixtures.
//!
//! A [`GaussDerivMixture`] is a finite combination `Σ c_j D^{m_j} γ_{v_j}` of
//! derivatives of centered one-dimensional Gaussian densities. The family is
//! closed under convolution because `D^m γ_a * D^n γ_b = D^{m+n} γ_{a+b}`, so
//! every construction that only adds independent Gaussian-derivative pieces is
//! carried out symbolically and evaluated only at the very end.
//!
//! [`ShiftedMixture`] adds locations, which is what two-component Gaussian
//! location mixtures need; it stays closed under convolution with either type.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order accepted in a mixture term.
pub const MAX_ORDER: u32 = 64;

/// Density of the centered Gaussian with variance `variance`.
pub fn gaussian_density(variance: f64, x: f64) -> f64 {
    (-0.5 * x * x / variance).exp() / (2.0 * PI * variance).sqrt()
}

/// Probabilists' Hermite polynomial `He_k(y)` by the three-term recurrence.
pub fn hermite_he(k: u32, y: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, y);
    match k {
        0 => prev,
        _ => {
            for n in 1..k {
                let next = y * cur - n as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `D^k γ_v(x)`, the k-th derivative of the centered Gaussian density.
pub fn gauss_derivative(order: u32, variance: f64, x: f64) -> f64 {
    let g = gaussian_density(variance, x);
    if order == 0 || g == 0.0 {
        return g;
    }
    let sd = variance.sqrt();
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    sign * hermite_he(order, x / sd) / sd.powi(order as i32) * g
}

/// `∫ (D^k γ_K)² / γ_K = k! / K^k`.
pub fn hermite_weighted_norm(k: u32, variance: f64) -> f64 {
    assert!(variance > 0.0, "variance must be positive");
    (1..=k).fold(1.0, |acc, j| acc * j as f64 / variance)
}

/// The polynomial `P` with `D^k γ_v = P · γ_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitePolynomial {
    pub degree: u32,
    pub variance: f64,
}

impl HermitePolynomial {
    pub fn new(degree: u32, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance must be positive, got {variance}"
            )));
        }
        if degree > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "degree {degree} exceeds {MAX_ORDER}"
            )));
        }
        Ok(Self { degree, variance })
    }

    /// Monomial coefficients, lowest power first, from the Rodrigues
    /// recursion `P_{k+1} = P_k' - (x / v) P_k`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut p = vec![1.0];
        for _ in 0..self.degree {
            let mut next = vec![0.0; p.len() + 1];
            for (i, &c) in p.iter().enumerate() {
                if i > 0 {
                    next[i - 1] += i as f64 * c;
                }
                next[i + 1] -= c / self.variance;
            }
            p = next;
        }
        p
    }

    pub fn eval(&self, x: f64) -> f64 {
        let sd = self.variance.sqrt();
        let sign = if self.degree % 2 == 0 { 1.0 } else { -1.0 };
        sign * hermite_he(self.degree, x / sd) / sd.powi(self.degree as i32)
    }
}

/// One term `coeff · D^order γ_variance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub order: u32,
    pub variance: f64,
}

impl Term {
    pub fn new(coeff: f64, order: u32, variance: f64) -> Self {
        Self {
            coeff,
            order,
            variance,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeff * gauss_derivative(self.order, self.variance, x)
    }

    /// `∫ x^n D^k γ_v dx = (-1)^k n!/(n-k)! E[X^{n-k}]`, zero when `n < k`.
    fn raw_moment(&self, n: u32) -> f64 {
        if n < self.order {
            return 0.0;
        }
        let rest = n - self.order;
        let falling = (rest + 1..=n).fold(1.0, |acc, j| acc * j as f64);
        let sign = if self.order % 2 == 0 { 1.0 } else { -1.0 };
        self.coeff * sign * falling * central_gaussian_moment(rest, self.variance)
    }
}

/// `E[X^n]` for `X ~ N(0, v)`.
pub fn central_gaussian_moment(n: u32, variance: f64) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut m = 1.0;
    let mut j = n as i64 - 1;
    while j > 0 {
        m *= j as f64;
        j -= 2;
    }
    m * variance.powi(n as i32 / 2)
}

/// Signed combination of centered Gaussian derivatives.
///
/// Terms are kept merged (identical `(order, variance)` pairs summed) and
/// sorted by `(order, variance)`, so two mixtures describing the same measure
/// built the same way have identical term lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussDerivMixture {
    terms: Vec<Term>,
}

impl GaussDerivMixture {
    pub fn new(terms: impl IntoIterator<Item = Term>) -> Result<Self> {
        let terms: Vec<Term> = terms.into_iter().collect();
        for t in &terms {
            if !(t.variance > 0.0 && t.variance.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "term variance must be positive, got {}",
                    t.variance
                )));
            }
            if t.order > MAX_ORDER {
                return Err(Error::InvalidParameter(format!(
                    "term order {} exceeds {MAX_ORDER}",
                    t.order
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidParameter("non-finite coefficient".into()));
            }
        }
        Ok(Self::merged(terms))
    }

    /// The Gaussian density `γ_v`.
    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new([Term::new(1.0, 0, variance)])
    }

    fn merged(terms: Vec<Term>) -> Self {
        let mut acc: BTreeMap<(u32, u64), f64> = BTreeMap::new();
        for t in terms {
            *acc.entry((t.order, t.variance.to_bits())).or_insert(0.0) += t.coeff;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((order, bits), coeff)| Term::new(coeff, order, f64::from_bits(bits)))
            .collect();
        Self { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exact convolution. Never fails; an order overflow past
    /// [`MAX_ORDER`] is a programming error and panics.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                let order = a.order + b.order;
                assert!(order <= MAX_ORDER, "convolution order {order} exceeds {MAX_ORDER}");
                out.push(Term::new(a.coeff * b.coeff, order, a.variance + b.variance));
            }
        }
        Self::merged(out)
    }

    /// Convolution with the centered Gaussian `γ_variance`; identity for a
    /// zero variance.
    pub fn smooth(&self, variance: f64) -> Self {
        if variance == 0.0 {
            return self.clone();
        }
        Self::merged(
            self.terms
                .iter()
                .map(|t| Term::new(t.coeff, t.order, t.variance + variance))
                .collect(),
        )
    }

    /// Law of `s·X` for `X` with this density: `c D^k γ_v ↦ c s^k D^k γ_{s² v}`.
    pub fn scale(&self, s: f64) -> Self {
        assert!(s > 0.0, "scale must be positive");
        Self::merged(
            self.terms
                .iter()
                .map(|t| Term::new(t.coeff * s.powi(t.order as i32), t.order, t.variance * s * s))
                .collect(),
        )
    }

    /// Law of `-X`: odd orders flip sign.
    pub fn reflect(&self) -> Self {
        Self::merged(
            self.terms
                .iter()
                .map(|t| {
                    let c = if t.order % 2 == 1 { -t.coeff } else { t.coeff };
                    Term::new(c, t.order, t.variance)
                })
                .collect(),
        )
    }

    /// `D^k` applied to the whole mixture.
    pub fn derivative(&self, k: u32) -> Self {
        Self::merged(
            self.terms
                .iter()
                .map(|t| Term::new(t.coeff, t.order + k, t.variance))
                .collect(),
        )
    }

    pub fn density(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Total mass `Σ coeff · [order = 0]`.
    pub fn mass(&self) -> f64 {
        self.terms.iter().filter(|t| t.order == 0).map(|t| t.coeff).sum()
    }

    /// Raw moments `m_1, ..., m_up_to` (index 0 holds `m_1`).
    pub fn moments(&self, up_to: u32) -> Vec<f64> {
        (1..=up_to)
            .map(|n| self.terms.iter().map(|t| t.raw_moment(n)).sum())
            .collect()
    }

    pub fn max_variance(&self) -> f64 {
        self.terms.iter().map(|t| t.variance).fold(0.0, f64::max)
    }

    /// Infimum over the real line of `density(x) / γ_K(x)` where `γ_K` is the
    /// largest-variance order-0 term, estimated on a dense symmetric scan that
    /// reaches past the peak of every `x^k exp(-a x²)` envelope. A positive
    /// value certifies a nonnegative density; `-inf` when no order-0 term exists.
    pub fn min_ratio_to_base(&self) -> f64 {
        let Some(base) = self.dominant_gaussian() else {
            return f64::NEG_INFINITY;
        };
        let k = base.variance;
        let mut reach = 12.0 * k.sqrt();
        for t in &self.terms {
            if t.variance < k {
                let a = 0.5 * (1.0 / t.variance - 1.0 / k);
                reach = reach.max(((t.order as f64 + 120.0) / (2.0 * a)).sqrt());
            } else {
                reach = reach.max(12.0 * t.variance.sqrt());
            }
        }
        let n = 40_000;
        let mut min = f64::INFINITY;
        for i in 0..=2 * n {
            let x = reach * (i as f64 - n as f64) / n as f64;
            let r: f64 = self
                .terms
                .iter()
                .map(|t| {
                    let sd = t.variance.sqrt();
                    let sign = if t.order % 2 == 0 { 1.0 } else { -1.0 };
                    let e = -0.5 * x * x * (1.0 / t.variance - 1.0 / k);
                    t.coeff * sign * hermite_he(t.order, x / sd) / sd.powi(t.order as i32)
                        * (k / t.variance).sqrt()
                        * e.exp()
                })
                .sum();
            min = min.min(r);
        }
        min
    }

    /// Order-0 term with the largest variance, used for tail modelling.
    pub fn dominant_gaussian(&self) -> Option<Term> {
        self.terms
            .iter()
            .filter(|t| t.order == 0)
            .max_by(|a, b| a.variance.total_cmp(&b.variance))
            .copied()
    }
}

/// Finite sum of located pieces `Σ_i (τ_{μ_i} m_i)` where each `m_i` is a
/// centered [`GaussDerivMixture`] and `τ_μ` shifts by `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedMixture {
    components: Vec<(f64, GaussDerivMixture)>,
}

impl ShiftedMixture {
    pub fn new(components: Vec<(f64, GaussDerivMixture)>) -> Result<Self> {
        if components.iter().any(|(mu, _)| !mu.is_finite()) {
            return Err(Error::InvalidParameter("non-finite location".into()));
        }
        Ok(Self::merged(components))
    }

    /// `Σ w_i N(μ_i, v_i)` from `(weight, location, variance)` triples.
    pub fn gaussian_locations(parts: &[(f64, f64, f64)]) -> Result<Self> {
        let comps = parts
            .iter()
            .map(|&(w, mu, v)| Ok((mu, GaussDerivMixture::new([Term::new(w, 0, v)])?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    fn merged(components: Vec<(f64, GaussDerivMixture)>) -> Self {
        let mut acc: BTreeMap<u64, Vec<Term>> = BTreeMap::new();
        for (mu, m) in components {
            // normalise -0.0 so equal locations share a key
            let mu = if mu == 0.0 { 0.0 } else { mu };
            acc.entry(mu.to_bits()).or_default().extend_from_slice(m.terms());
        }
        let mut components: Vec<(f64, GaussDerivMixture)> = acc
            .into_iter()
            .map(|(bits, terms)| (f64::from_bits(bits), GaussDerivMixture::merged(terms)))
            .filter(|(_, m)| !m.is_empty())
            .collect();
        components.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { components }
    }

    pub fn components(&self) -> &[(f64, GaussDerivMixture)] {
        &self.components
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components.iter().map(|(mu, m)| m.density(x - mu)).sum()
    }

    /// `D^k` of the density.
    pub fn derivative(&self, k: u32) -> Self {
        Self::merged(
            self.components
                .iter()
                .map(|(mu, m)| (*mu, m.derivative(k)))
                .collect(),
        )
    }

    pub fn convolve_centered(&self, other: &GaussDerivMixture) -> Self {
        Self::merged(
            self.components
                .iter()
                .map(|(mu, m)| (*mu, m.convolve(other)))
                .collect(),
        )
    }

    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.components.len() * other.components.len());
        for (a_mu, a) in &self.components {
            for (b_mu, b) in &other.components {
                out.push((a_mu + b_mu, a.convolve(b)));
            }
        }
        Self::merged(out)
    }

    pub fn smooth(&self, variance: f64) -> Self {
        Self::merged(
            self.components
                .iter()
                .map(|(mu, m)| (*mu, m.smooth(variance)))
                .collect(),
        )
    }

    /// Law of `s·X`.
    pub fn scale(&self, s: f64) -> Self {
        Self::merged(
            self.components
                .iter()
                .map(|(mu, m)| (mu * s, m.scale(s)))
                .collect(),
        )
    }

    /// Law of `-X`.
    pub fn reflect(&self) -> Self {
        Self::merged(
            self.components
                .iter()
                .map(|(mu, m)| (-mu, m.reflect()))
                .collect(),
        )
    }

    /// Law of `X + a`.
    pub fn shift(&self, a: f64) -> Self {
        Self::merged(
            self.components
                .iter()
                .map(|(mu, m)| (mu + a, m.clone()))
                .collect(),
        )
    }

    pub fn mass(&self) -> f64 {
        self.components.iter().map(|(_, m)| m.mass()).sum()
    }

    /// Raw moments `m_1..m_up_to` via the binomial expansion of `(x + μ)^n`.
    pub fn moments(&self, up_to: u32) -> Vec<f64> {
        let mut out = vec![0.0; up_to as usize];
        for (mu, m) in &self.components {
            let mut centered = vec![m.mass()];
            centered.extend(m.moments(up_to));
            for n in 1..=up_to as usize {
                let mut binom = 1.0;
                let mut s = 0.0;
                for j in 0..=n {
                    s += binom * centered[j] * mu.powi((n - j) as i32);
                    binom = binom * (n - j) as f64 / (j + 1) as f64;
                }
                out[n - 1] += s;
            }
        }
        out
    }

    pub fn max_variance(&self) -> f64 {
        self.components
            .iter()
            .map(|(_, m)| m.max_variance())
            .fold(0.0, f64::max)
    }

    /// Interval `[min μ − w·σ, max μ + w·σ]` with `σ` the largest standard deviation.
    pub fn window(&self, sds: f64) -> (f64, f64) {
        let sd = self.max_variance().sqrt();
        let lo = self.components.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let hi = self.components.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        (lo - sds * sd, hi + sds * sd)
    }

    /// Located order-0 term with the largest variance, ties broken toward the
    /// extreme location on the requested side.
    pub(crate) fn dominant_gaussian(&self, right: bool) -> Option<(f64, Term)> {
        let mut best: Option<(f64, Term)> = None;
        for (mu, m) in &self.components {
            if let Some(t) = m.dominant_gaussian() {
                let better = match &best {
                    None => true,
                    Some((bmu, bt)) => {
                        t.variance > bt.variance
                            || (t.variance == bt.variance && ((right && mu > bmu) || (!right && mu < bmu)))
                    }
                };
                if better {
                    best = Some((*mu, t));
                }
            }
        }
        best
    }
}

impl From<GaussDerivMixture> for ShiftedMixture {
    fn from(m: GaussDerivMixture) -> Self {
        Self::merged(vec![(0.0, m)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_convolution_identity() {
        let k = GaussDerivMixture::gaussian(2.0).unwrap();
        let u = GaussDerivMixture::gaussian(0.5).unwrap();
        assert_eq!(k.convolve(&u), GaussDerivMixture::gaussian(2.5).unwrap());
    }

    #[test]
    fn perturbed_convolution_with_gaussian() {
        let (k, u, d, eps) = (4.0, 1.0, 0.5, 0.01);
        let p1 = GaussDerivMixture::new([Term::new(1.0, 0, k), Term::new(-eps, 3, k - d)]).unwrap();
        let got = p1.convolve(&GaussDerivMixture::gaussian(u).unwrap());
        let want =
            GaussDerivMixture::new([Term::new(1.0, 0, k + u), Term::new(-eps, 3, k + u - d)]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn telescoping_with_one_correction() {
        // dyadic values keep every variance sum exact
        let (k, l, d, eps) = (2.0, 3.0, 0.25, 0.125);
        let p1 = GaussDerivMixture::new([Term::new(1.0, 0, k), Term::new(-eps, 3, k - d)]).unwrap();
        let p2 = GaussDerivMixture::new([Term::new(1.0, 0, l), Term::new(eps, 3, l - d)]).unwrap();
        let got = p1.convolve(&p2);
        let want = GaussDerivMixture::new([
            Term::new(1.0, 0, k + l),
            Term::new(-eps * eps, 6, k + l - 2.0 * d),
        ])
        .unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn density_values() {
        let g = GaussDerivMixture::gaussian(1.0).unwrap();
        assert!(close(g.density(0.0), 1.0 / (2.0 * PI).sqrt(), 1e-16));
        let dg = g.derivative(1);
        assert_eq!(dg.density(0.0), 0.0);
    }

    #[test]
    fn third_derivative_matches_finite_differences() {
        let v = 0.9;
        let m = GaussDerivMixture::new([Term::new(1.0, 0, 1.0), Term::new(-0.01, 3, v)]).unwrap();
        let x = 1.3;
        let h = 1e-3;
        let f = |y: f64| gaussian_density(v, y);
        let d3 = (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h);
        let fd = gaussian_density(1.0, x) - 0.01 * d3;
        assert!(close(m.density(x), fd, 1e-6), "{} vs {}", m.density(x), fd);
    }

    #[test]
    fn hermite_norm_values() {
        assert_eq!(hermite_weighted_norm(0, 2.0), 1.0);
        assert_eq!(hermite_weighted_norm(3, 1.0), 6.0);
        assert_eq!(hermite_weighted_norm(3, 2.0), 0.75);
    }

    #[test]
    fn hermite_polynomial_leading_coefficient() {
        for k in 0..10 {
            let p = HermitePolynomial::new(k, 1.7).unwrap();
            let c = p.coefficients();
            assert_eq!(c.len(), k as usize + 1);
            let lead = (-1.0 / 1.7f64).powi(k as i32);
            assert!(close(*c.last().unwrap(), lead, 1e-12 * lead.abs()));
            let x: f64 = 0.37;
            let horner = c.iter().rev().fold(0.0, |acc, &a| acc * x + a);
            assert!(close(horner, p.eval(x), 1e-10));
        }
    }

    #[test]
    fn moments_of_gaussian_and_perturbation() {
        let k = 3.0;
        let g = GaussDerivMixture::gaussian(k).unwrap();
        let m = g.moments(2);
        assert_eq!(m, vec![0.0, k]);

        let eps = 0.02;
        let p = GaussDerivMixture::new([Term::new(1.0, 0, k), Term::new(-eps, 3, k - 0.5)]).unwrap();
        let m = p.moments(3);
        assert!(close(m[0], 0.0, 1e-15));
        assert!(close(m[1], k, 1e-15));
        // -ε ∫ x³ D³γ = -ε · (-6): the third moment is +6ε
        assert!(close(m[2], 6.0 * eps, 1e-15));

        let c = 0.3;
        let d1 = GaussDerivMixture::new([Term::new(1.0, 0, 1.0), Term::new(c, 1, 1.0)]).unwrap();
        assert!(close(d1.moments(1)[0], -c, 1e-15));
    }

    #[test]
    fn rejects_degenerate_terms() {
        assert!(GaussDerivMixture::new([Term::new(1.0, 0, 0.0)]).is_err());
        assert!(GaussDerivMixture::new([Term::new(1.0, 0, -1.0)]).is_err());
        assert!(GaussDerivMixture::new([Term::new(1.0, MAX_ORDER + 1, 1.0)]).is_err());
        assert!(HermitePolynomial::new(2, 0.0).is_err());
    }

    #[test]
    fn scaling_preserves_mass_and_scales_moments() {
        let m = GaussDerivMixture::new([Term::new(1.0, 0, 1.0), Term::new(0.05, 3, 0.5)]).unwrap();
        let s = m.scale(1.7);
        assert!(close(s.mass(), 1.0, 1e-15));
        let (a, b) = (m.moments(3), s.moments(3));
        for n in 0..3 {
            assert!(close(b[n], a[n] * 1.7f64.powi(n as i32 + 1), 1e-12));
        }
        let r = m.reflect();
        assert!(close(r.moments(3)[2], -a[2], 1e-15));
    }

    #[test]
    fn shifted_mixture_moments() {
        let p = ShiftedMixture::gaussian_locations(&[(0.7, -0.6, 1.8), (0.3, 1.4, 0.4)]).unwrap();
        let m = p.moments(3);
        let mean = 0.7 * -0.6 + 0.3 * 1.4;
        assert!(close(m[0], mean, 1e-15));
        let m2 = 0.7 * (0.36 + 1.8) + 0.3 * (1.96 + 0.4);
        assert!(close(m[1], m2, 1e-14));
        let m3 = 0.7 * (-0.216 + 3.0 * -0.6 * 1.8) + 0.3 * (2.744 + 3.0 * 1.4 * 0.4);
        assert!(close(m[2], m3, 1e-14));
    }
}
