//! Gaussian Han-Kobayashi quantities: `ψ`, `φ`, the fixed-power value `f_d`,
//! its power-control envelope `g_d`, and the audits built on them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterexample::{gap_curve, Recipe};
use crate::entropy::{gaussian_entropy, mixture_entropy};
use crate::envelope::{concave_envelope_at, Envelope};
use crate::error::{Error, Result};
use crate::gaussian::GaussDerivMixture;
use crate::linalg::{jacobi_eigen, PsdMatrix};

/// Tolerance for declaring `f_1 = g_1`.
pub const EQUALITY_TOL: f64 = 1e-5;
/// Resolution of the envelope tabulation in each coordinate.
pub const ENVELOPE_GRID: usize = 256;
/// Extents of the envelope tabulation as multiples of the query point, tried
/// in order until no support point touches the outer edge.
pub const ENVELOPE_MARGINS: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
/// Band around `J + N1 = (u+L)/(L-1)` reported as the boundary case.
pub const CASE_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HKParams {
    pub u: f64,
    pub n1: f64,
    pub n2: f64,
    pub q1: f64,
    pub q2: f64,
}

impl HKParams {
    pub fn new(u: f64, n1: f64, n2: f64, q1: f64, q2: f64) -> Result<Self> {
        if !(u > 0.0 && n1 >= 0.0 && n2 > 0.0 && q1 > 0.0 && q2 > 0.0)
            || ![u, n1, n2, q1, q2].iter().all(|x| x.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "need u, N2, q1, q2 > 0 and N1 ≥ 0; got u={u}, N1={n1}, N2={n2}, q1={q1}, q2={q2}"
            )));
        }
        Ok(Self { u, n1, n2, q1, q2 })
    }

    /// Bound `1 + √(1+u)` on `K + N1` at envelope-tight points.
    pub fn bound(&self) -> f64 {
        1.0 + (1.0 + self.u).sqrt()
    }
}

pub fn psi(k: &PsdMatrix, l: &PsdMatrix, u: f64, n1: f64) -> Result<f64> {
    k.same_dim(l)?;
    let a = k.shift(n1);
    Ok(u * a.add(l)?.shift(u).lndet() + a.lndet() - (u + 1.0) * a.shift(u).lndet())
}

pub fn psi_scalar(k: f64, l: f64, u: f64, n1: f64) -> f64 {
    let a = k + n1;
    let ln_a = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
    u * (a + u + l).ln() + ln_a - (u + 1.0) * (a + u).ln()
}

/// Unconstrained maximizer of `ψ(·, L)` in `K + N1`; infinite for `L ≤ 1`.
pub fn unconstrained_argmax(l: f64, u: f64) -> f64 {
    if l > 1.0 {
        (u + l) / (l - 1.0)
    } else {
        f64::INFINITY
    }
}

/// `(φ(J, L), argmax K)` for scalars.
pub fn phi_scalar(j: f64, l: f64, u: f64, n1: f64) -> (f64, f64) {
    let k = (unconstrained_argmax(l, u) - n1).clamp(0.0, j);
    (psi_scalar(k, l, u, n1), k)
}

/// `φ(J, L) = sup_{0 ⪯ K ⪯ J} ψ(K, L)` and a maximizer. Commuting inputs are
/// solved exactly coordinatewise in a common eigenbasis; otherwise projected
/// gradient ascent runs over `K = J^{1/2} C J^{1/2}`, `0 ⪯ C ⪯ I`.
pub fn phi(j: &PsdMatrix, l: &PsdMatrix, u: f64, n1: f64) -> Result<(f64, PsdMatrix)> {
    j.same_dim(l)?;
    if let Some(q) = common_eigenbasis(j, l) {
        let jd = j.conjugate(&q);
        let ld = l.conjugate(&q);
        let d = j.dim();
        let ks: Vec<f64> =
            (0..d).map(|i| phi_scalar(jd.matrix()[(i, i)], ld.matrix()[(i, i)], u, n1).1).collect();
        let k = PsdMatrix::from_eigen(&ks, &q);
        return Ok((psi(&k, l, u, n1)?, k));
    }
    projected_ascent(j, l, u, n1)
}

fn common_eigenbasis(j: &PsdMatrix, l: &PsdMatrix) -> Option<DMatrix<f64>> {
    if j.commutator_norm(l).ok()? > 1e-8 * (1.0 + j.matrix().norm() * l.matrix().norm()) {
        return None;
    }
    for (a, b) in [(l, j), (j, l)] {
        let q = a.eigen().vectors;
        let bd = b.conjugate(&q);
        let m = bd.matrix();
        let off: f64 = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .map(|(r, c)| m[(r, c)] * m[(r, c)])
            .sum();
        if off.sqrt() <= 1e-9 * (1.0 + m.norm()) {
            return Some(q);
        }
    }
    None
}

fn sym_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let e = jacobi_eigen(m);
    if e.values.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let inv: Vec<f64> = e.values.iter().map(|x| 1.0 / x).collect();
    Some(PsdMatrix::from_eigen(&inv, &e.vectors).matrix().clone())
}

fn projected_ascent(j: &PsdMatrix, l: &PsdMatrix, u: f64, n1: f64) -> Result<(f64, PsdMatrix)> {
    let d = j.dim();
    let je = j.eigen();
    let root = PsdMatrix::from_eigen(&je.values.iter().map(|x| x.max(0.0).sqrt()).collect::<Vec<_>>(), &je.vectors);
    let r = root.matrix().clone();
    let k_of = |c: &DMatrix<f64>| -> PsdMatrix {
        let k = &r * c * &r;
        PsdMatrix::new((&k + k.transpose()) * 0.5).unwrap_or_else(|_| PsdMatrix::from_diagonal(&vec![0.0; d]).unwrap())
    };
    let project = |c: &DMatrix<f64>| -> DMatrix<f64> {
        let e = jacobi_eigen(&((c + c.transpose()) * 0.5));
        PsdMatrix::from_eigen(&e.values.iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>(), &e.vectors)
            .matrix()
            .clone()
    };
    let mut c = DMatrix::<f64>::identity(d, d) * 0.5;
    let mut k = k_of(&c);
    let mut value = psi(&k, l, u, n1)?;
    let mut step = 1.0;
    for _ in 0..5000 {
        let a = k.shift(n1);
        let grad = match (
            sym_inverse(a.add(l)?.shift(u).matrix()),
            sym_inverse(a.matrix()),
            sym_inverse(a.shift(u).matrix()),
        ) {
            (Some(g1), Some(g2), Some(g3)) => g1 * u + g2 - g3 * (u + 1.0),
            _ => break,
        };
        let gc = &r * grad * &r;
        let mut improved = false;
        while step > 1e-14 {
            let cand = project(&(&c + &gc * step));
            let kc = k_of(&cand);
            let v = psi(&kc, l, u, n1)?;
            if v > value {
                let gain = v - value;
                c = cand;
                k = kc;
                value = v;
                step *= 2.0;
                improved = gain > 1e-15;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((value, k))
}

/// `ln(J + N1 + u + L) + φ(J, L)` for scalars.
pub fn f1_objective(j: f64, l: f64, u: f64, n1: f64) -> f64 {
    (j + n1 + u + l).ln() + phi_scalar(j, l, u, n1).0
}

/// Golden-section maximization of `g` on `[lo, hi]` from `starts` equal
/// subintervals; ties go to the smaller argument.
fn golden_multistart<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, starts: usize, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let w = (hi - lo) / starts as f64;
    let mut best = (lo, g(lo));
    let consider = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v > best.1 || (v == best.1 && x < best.0) {
            *best = (x, v);
        }
    };
    for s in 0..starts {
        let (mut a, mut b) = (lo + s as f64 * w, lo + (s + 1) as f64 * w);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (g(c), g(d));
        while b - a > tol * (1.0 + a.abs()) {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = g(d);
            }
        }
        let x = 0.5 * (a + b);
        consider(x, g(x), &mut best);
        consider(b, g(b), &mut best);
    }
    consider(hi, g(hi), &mut best);
    best
}

/// Maximizer `(J, L)` and value of the scalar fixed-power problem by nested
/// multi-start golden-section search.
pub fn f1_search(q1: f64, q2: f64, u: f64, n1: f64) -> (f64, f64, f64) {
    let inner = |j: f64| golden_multistart(|l| f1_objective(j, l, u, n1), 0.0, q2, 9, 1e-7);
    let (j, v) = golden_multistart(|j| inner(j).1, 0.0, q1, 9, 1e-7);
    (j, inner(j).0, v)
}

/// `f_1(q1, q2)`. The objective increases in both `J` and `L`, so the corner
/// `(q1, q2)` is always a candidate next to the search result.
pub fn f1(q1: f64, q2: f64, params: &HKParams) -> f64 {
    let corner = f1_objective(q1, q2, params.u, params.n1);
    let (_, _, searched) = f1_search(q1, q2, params.u, params.n1);
    corner.max(searched)
}

/// `f_1` on the tabulation grid. Uses the corner value directly.
fn f1_fast(q1: f64, q2: f64, params: &HKParams) -> f64 {
    f1_objective(q1, q2, params.u, params.n1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G1Result {
    pub f1: f64,
    pub g1: f64,
    pub envelope: Envelope,
}

/// `g_1(q1, q2)`, the concave envelope of `f_1` from an
/// `ENVELOPE_GRID²` tabulation of `[0, m q1] × [0, m q2]` with the first
/// margin `m` in [`ENVELOPE_MARGINS`] that contains the support. A zero power
/// reduces to a one-dimensional envelope in the other.
pub fn g1(q1: f64, q2: f64, params: &HKParams) -> Result<G1Result> {
    if !(q1 >= 0.0 && q2 >= 0.0 && q1.is_finite() && q2.is_finite()) {
        return Err(Error::InvalidParameter(format!("need q1, q2 ≥ 0; got {q1}, {q2}")));
    }
    for &m in &ENVELOPE_MARGINS {
        match g1_with_margin(q1, q2, m, params) {
            Err(Error::GridTooSmall { .. }) => continue,
            r => return r,
        }
    }
    Err(Error::GridTooSmall { q1, q2 })
}

/// [`g1`] on a single tabulation `[0, margin q1] × [0, margin q2]`.
pub fn g1_with_margin(q1: f64, q2: f64, margin: f64, params: &HKParams) -> Result<G1Result> {
    let n = ENVELOPE_GRID;
    let (x_hi, y_hi) = (margin * q1, margin * q2);
    let fq = f1_fast(q1, q2, params);
    let at = |i: usize, hi: f64| hi * i as f64 / (n - 1) as f64;
    let envelope = match (q1 > 0.0, q2 > 0.0) {
        (false, false) => Envelope {
            value: fq,
            support: vec![crate::envelope::Support { point: vec![0.0, 0.0], weight: 1.0, value: fq }],
            pivots: 0,
        },
        (true, false) => {
            let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![at(i, x_hi)]).collect();
            let vals: Vec<f64> = pts.iter().map(|p| f1_fast(p[0], 0.0, params)).collect();
            let mut e = concave_envelope_at(&pts, &vals, &[q1], fq)?;
            e.support.iter_mut().for_each(|s| s.point.push(0.0));
            e
        }
        (false, true) => {
            let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![at(i, y_hi)]).collect();
            let vals: Vec<f64> = pts.iter().map(|p| f1_fast(0.0, p[0], params)).collect();
            let mut e = concave_envelope_at(&pts, &vals, &[q2], fq)?;
            e.support.iter_mut().for_each(|s| s.point.insert(0, 0.0));
            e
        }
        (true, true) => {
            let pts: Vec<Vec<f64>> = (0..n)
                .flat_map(|i| (0..n).map(move |k| (i, k)))
                .map(|(i, k)| vec![at(i, x_hi), at(k, y_hi)])
                .collect();
            let vals: Vec<f64> = pts.par_iter().map(|p| f1_fast(p[0], p[1], params)).collect();
            concave_envelope_at(&pts, &vals, &[q1, q2], fq)?
        }
    };
    let on_edge = envelope.support.iter().any(|s| {
        (q1 > 0.0 && s.point[0] >= x_hi * (1.0 - 1e-12)) || (q2 > 0.0 && s.point[1] >= y_hi * (1.0 - 1e-12))
    });
    if on_edge {
        return Err(Error::GridTooSmall { q1, q2 });
    }
    let f = if q1 > 0.0 && q2 > 0.0 { f1(q1, q2, params) } else { fq };
    Ok(G1Result { f1: f, g1: envelope.value, envelope })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma5Case {
    /// `L > 1` and the power cap exceeds the unconstrained maximizer.
    Interior,
    /// `L ≤ 1`, or the cap binds strictly.
    Capped,
    /// The cap equals the unconstrained maximizer.
    Boundary,
}

impl Lemma5Case {
    pub fn number(self) -> u8 {
        match self {
            Lemma5Case::Interior => 1,
            Lemma5Case::Capped => 2,
            Lemma5Case::Boundary => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub j: f64,
    pub l: f64,
    pub u: f64,
    pub n1: f64,
    pub k: f64,
    pub bound: f64,
    /// `K = 0` or `K + N1 ≤ 1 + √(1+u) + 1e-6`.
    pub bound_holds: bool,
    pub case: Lemma5Case,
    pub f1: f64,
    pub g1: f64,
}

pub fn lemma5_case(j: f64, l: f64, u: f64, n1: f64) -> Lemma5Case {
    let star = unconstrained_argmax(l, u);
    if l > 1.0 && (j + n1 - star).abs() <= CASE_BAND * star.max(1.0) {
        Lemma5Case::Boundary
    } else if l > 1.0 && j + n1 > star {
        Lemma5Case::Interior
    } else {
        Lemma5Case::Capped
    }
}

/// Checks `K + N1 ≤ 1 + √(1+u)` at `(J, L)` when `f_1 = g_1` there.
pub fn lemma5_check(j: f64, l: f64, params: &HKParams) -> Result<Lemma5Report> {
    let g = g1(j, l, params)?;
    if g.g1 - g.f1 > EQUALITY_TOL {
        return Err(Error::NotApplicable { f1: g.f1, g1: g.g1 });
    }
    let (u, n1) = (params.u, params.n1);
    let k = phi_scalar(j, l, u, n1).1;
    let bound = params.bound();
    Ok(Lemma5Report {
        j,
        l,
        u,
        n1,
        k,
        bound,
        bound_holds: k == 0.0 || k + n1 <= bound + 1e-6,
        case: lemma5_case(j, l, u, n1),
        f1: g.f1,
        g1: g.g1,
    })
}

/// Table of `f_2` over the grid `{0, h, …, (n-1)h}²` (with `h = step`) as the
/// best split of both powers between two aligned scalar channels.
pub fn f2_table(n: usize, h1: f64, h2: f64, params: &HKParams) -> Vec<Vec<f64>> {
    let t: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| f1_fast(a as f64 * h1, b as f64 * h2, params)).collect())
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|k| {
                    let mut best = f64::NEG_INFINITY;
                    for a in 0..=i {
                        for b in 0..=k {
                            best = best.max(t[a][b] + t[i - a][k - b]);
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

/// `g_2(q1, q2)` from the `f_2` table on `[0, m q1] × [0, m q2]` with `n`
/// points per side; `n - 1` must be divisible by every margin `m` tried so the
/// query lies on the grid.
pub fn g2(q1: f64, q2: f64, n: usize, params: &HKParams) -> Result<f64> {
    if !(q1 > 0.0 && q2 > 0.0) {
        return Err(Error::InvalidParameter(format!("need q1, q2 > 0; got {q1}, {q2}")));
    }
    for &m in &ENVELOPE_MARGINS {
        let steps = (n - 1) as f64 / m;
        if steps.fract() != 0.0 || steps < 2.0 {
            break;
        }
        let (h1, h2) = (m * q1 / (n - 1) as f64, m * q2 / (n - 1) as f64);
        let table = f2_table(n, h1, h2, params);
        let mut pts = Vec::with_capacity(n * n);
        let mut vals = Vec::with_capacity(n * n);
        for (i, row) in table.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                pts.push(vec![i as f64 * h1, k as f64 * h2]);
                vals.push(v);
            }
        }
        let qi = steps as usize;
        let e = concave_envelope_at(&pts, &vals, &[q1, q2], table[qi][qi])?;
        let (x_hi, y_hi) = (m * q1, m * q2);
        if !e.support.iter().any(|s| s.point[0] >= x_hi * (1.0 - 1e-12) || s.point[1] >= y_hi * (1.0 - 1e-12)) {
            return Ok(e.value);
        }
    }
    Err(Error::GridTooSmall { q1, q2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub q1: f64,
    pub q2: f64,
    /// Per-coordinate `(J, L)` of the best aligned split.
    pub split: Vec<(f64, f64)>,
    pub applicable: bool,
    pub k_max: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub d: usize,
    pub seed: u64,
    pub bound: f64,
    pub applicable: usize,
    pub max_eigenvalue: f64,
    pub all_pass: bool,
    pub rows: Vec<AuditRow>,
}

/// Random audit of the top-eigenvalue bound. Powers `(q1, q2)` are drawn
/// uniformly from `(0, params.q1] × (0, params.q2]`. For `d = 2` the fixed
/// power problem is reduced to aligned diagonal `(J, L)` and the best split is
/// found on a grid; each coordinate is then checked with the scalar envelope.
pub fn theorem4_audit(d: usize, params: &HKParams, samples: usize, seed: u64) -> Result<AuditReport> {
    if !(1..=2).contains(&d) {
        return Err(Error::InvalidParameter(format!("audit supports d = 1, 2; got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(f64, f64)> = (0..samples)
        .map(|_| (params.q1 * (1.0 - rng.gen::<f64>()), params.q2 * (1.0 - rng.gen::<f64>())))
        .collect();
    let rows = draws
        .par_iter()
        .map(|&(q1, q2)| audit_row(d, q1, q2, params))
        .collect::<Result<Vec<_>>>()?;
    let applicable = rows.iter().filter(|r| r.applicable).count();
    let max_eigenvalue = rows.iter().filter(|r| r.applicable).map(|r| r.k_max).fold(0.0, f64::max);
    Ok(AuditReport {
        d,
        seed,
        bound: params.bound() - params.n1,
        applicable,
        max_eigenvalue,
        all_pass: rows.iter().all(|r| !r.applicable || r.bound_holds),
        rows,
    })
}

fn audit_row(d: usize, q1: f64, q2: f64, params: &HKParams) -> Result<AuditRow> {
    let split = if d == 1 {
        vec![(q1, q2)]
    } else {
        let n = 201;
        let mut best = (f64::NEG_INFINITY, (0.0, 0.0), (0.0, 0.0));
        for a in 0..n {
            for b in 0..n {
                let frac = |i: usize| i as f64 / (n - 1) as f64;
                let (j1, l1) = (q1 * frac(a), q2 * frac(b));
                let (j2, l2) = (q1 * frac(n - 1 - a), q2 * frac(n - 1 - b));
                let v = f1_fast(j1, l1, params) + f1_fast(j2, l2, params);
                if v > best.0 {
                    best = (v, (j1, l1), (j2, l2));
                }
            }
        }
        let mut s = vec![best.1, best.2];
        s.sort_by(|x, y| y.0.total_cmp(&x.0));
        s
    };
    let mut applicable = true;
    let mut k_max: f64 = 0.0;
    let mut holds = true;
    for &(j, l) in &split {
        if j <= 0.0 {
            continue;
        }
        match lemma5_check(j, l.max(0.0), params) {
            Ok(r) => {
                k_max = k_max.max(r.k);
                holds &= r.bound_holds;
            }
            Err(Error::NotApplicable { .. }) | Err(Error::GridTooSmall { .. }) => applicable = false,
            Err(e) => return Err(e),
        }
    }
    Ok(AuditRow { q1, q2, split, applicable, k_max, bound_holds: holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjecture2Row {
    pub u: f64,
    pub q1: f64,
    pub q2: f64,
    pub f1: f64,
    pub g1: f64,
    pub f1_eq_g1: bool,
    pub stationary_k: f64,
}

/// Compares `f_1` and `g_1` over `u_grid × q_grid × q_grid`.
pub fn conjecture2_map(u_grid: &[f64], q_grid: &[f64], params: &HKParams) -> Result<Vec<Conjecture2Row>> {
    let cells: Vec<(f64, f64, f64)> = u_grid
        .iter()
        .flat_map(|&u| q_grid.iter().flat_map(move |&a| q_grid.iter().map(move |&b| (u, a, b))))
        .collect();
    cells
        .par_iter()
        .map(|&(u, q1, q2)| {
            let p = HKParams { u, ..*params };
            let g = g1(q1, q2, &p)?;
            Ok(Conjecture2Row {
                u,
                q1,
                q2,
                f1: g.f1,
                g1: g.g1,
                f1_eq_g1: g.g1 - g.f1 <= EQUALITY_TOL,
                stationary_k: phi_scalar(q1, q2, u, p.n1).1,
            })
        })
        .collect()
}

/// Gaussian part `½[u ln(a+N2+L) + ln a - (u+1) ln(a+N2)]`, `a = K + N1`.
pub fn gaussian_psi_v(k: f64, l: f64, u: f64, n1: f64, n2: f64) -> f64 {
    let a = k + n1;
    0.5 * (u * (a + n2 + l).ln() + a.ln() - (u + 1.0) * (a + n2).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantPowerGap {
    pub gaussian_value: f64,
    pub lower_witness: f64,
    pub gap: f64,
    /// Positive value of the two-letter functional carried by the witness.
    pub c: f64,
    pub a: f64,
    pub q1: f64,
    pub q2: f64,
    /// `½ ln((q1+q2+N1+N2)/N1) - [h(X1+X2+Z1+Z2) - h(Z1)]`.
    pub slack: f64,
    pub t: f64,
}

/// Smallest-noise `t` at which the default recipe supplies the witness.
pub const WITNESS_T: f64 = 0.02;

/// Gaussian and non-Gaussian values of the constant-power weighted sum rate.
/// The witness is the small-noise recipe at `t` rescaled so that the second
/// user's noise variance is `N2`, with `X1 = X1' + U`, `U ~ N(0, A)`. Without
/// `a`, `A` is doubled from `N2` until the entropy slack drops below `c/4`.
pub fn constant_power_gap(params: &HKParams, a: Option<f64>) -> Result<ConstantPowerGap> {
    constant_power_gap_with(params, &Recipe::default(), WITNESS_T, a)
}

pub fn constant_power_gap_with(params: &HKParams, recipe: &Recipe, t: f64, a: Option<f64>) -> Result<ConstantPowerGap> {
    if params.u != 1.0 {
        return Err(Error::WitnessUnavailable(format!("witness requires u = 1, got {}", params.u)));
    }
    if !(params.n1 > 0.0) {
        return Err(Error::WitnessUnavailable("witness requires N1 > 0".into()));
    }
    let check = recipe.validate().map_err(|e| Error::WitnessUnavailable(e.to_string()))?;
    let c = gap_curve(&recipe.p, &recipe.q, &[t])?[0].1;
    if !(c > 0.0) {
        return Err(Error::WitnessUnavailable(format!("no positive gap at t = {t}: {c}")));
    }
    let (n1, n2) = (params.n1, params.n2);
    let s = (n2 / (t * check.m2)).sqrt();
    let x1 = recipe.p.scale(s);
    for (_, m) in x1.components() {
        let v = m.max_variance();
        if !(v > n1) {
            return Err(Error::WitnessUnavailable(format!(
                "component variance {v} does not exceed N1 = {n1}"
            )));
        }
    }
    let x2 = recipe.q.reflect().scale(s * t.sqrt());
    let var_x1p = x1.moments(2)[1] - x1.moments(1)[0].powi(2) - n1;
    let noise = GaussDerivMixture::gaussian(n2)?;
    let base = x1.convolve(&x2).convolve_centered(&noise);
    let h_z1 = gaussian_entropy(n1);
    let eval = |a: f64| -> Result<(f64, f64, f64)> {
        let total = base.smooth(a);
        let q1 = var_x1p + a;
        let upper = 0.5 * ((q1 + n2 + n1 + n2) / n1).ln();
        let h = mixture_entropy(&total)? - h_z1;
        Ok((q1, upper, h))
    };
    let (a, (q1, upper, h)) = match a {
        Some(a) if a > 0.0 => (a, eval(a)?),
        Some(a) => return Err(Error::InvalidParameter(format!("A must be positive, got {a}"))),
        None => {
            let mut a = n2;
            loop {
                let r = eval(a)?;
                if r.1 - r.2 < c / 4.0 || a > 1e12 {
                    break (a, r);
                }
                a *= 2.0;
            }
        }
    };
    let q2 = n2;
    let gaussian_value = upper + sup_gaussian_psi_v(q1, q2, n1, n2);
    let lower_witness = h + c;
    Ok(ConstantPowerGap {
        gaussian_value,
        lower_witness,
        gap: lower_witness - gaussian_value,
        c,
        a,
        q1,
        q2,
        slack: upper - h,
        t,
    })
}

/// `sup_{0 ≤ K ≤ q1} ½[ln(a+N2+L) + ln a - 2 ln(a+N2)]` for `u = 1`.
fn sup_gaussian_psi_v(q1: f64, l: f64, n1: f64, n2: f64) -> f64 {
    let k = if n2 < l { (n2 * (n2 + l) / (l - n2) - n1).clamp(0.0, q1) } else { q1 };
    gaussian_psi_v(k, l, 1.0, n1, n2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(u: f64, n1: f64) -> HKParams {
        HKParams::new(u, n1, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn psi_examples() {
        let k = PsdMatrix::scalar(2.0).unwrap();
        let l = PsdMatrix::scalar(3.0).unwrap();
        let v = psi(&k, &l, 1.0, 0.0).unwrap();
        assert!((v - (16.0f64 / 12.0).ln()).abs() < 1e-12);
        let z = PsdMatrix::scalar(0.0).unwrap();
        assert!((psi(&z, &z, 1.0, 1.0).unwrap() + 2f64.ln()).abs() < 1e-14);
        let k2 = PsdMatrix::from_diagonal(&[2.0, 0.7]).unwrap();
        let l2 = PsdMatrix::from_diagonal(&[3.0, 0.2]).unwrap();
        let sum = psi_scalar(2.0, 3.0, 1.5, 0.3) + psi_scalar(0.7, 0.2, 1.5, 0.3);
        assert!((psi(&k2, &l2, 1.5, 0.3).unwrap() - sum).abs() < 1e-12);
        assert!(psi(&k2, &l, 1.0, 0.0).is_err());
    }

    #[test]
    fn phi_argmax_cases() {
        assert_eq!(phi_scalar(10.0, 3.0, 1.0, 0.0).1, 2.0);
        assert_eq!(phi_scalar(10.0, 0.5, 1.0, 0.0).1, 10.0);
        assert_eq!(phi_scalar(1.0, 3.0, 1.0, 0.0).1, 1.0);
        let j = PsdMatrix::from_diagonal(&[10.0, 1.0]).unwrap();
        let l = PsdMatrix::from_diagonal(&[3.0, 3.0]).unwrap();
        let (_, k) = phi(&j, &l, 1.0, 0.0).unwrap();
        assert!((k.matrix() - PsdMatrix::from_diagonal(&[2.0, 1.0]).unwrap().matrix()).norm() < 1e-12);
    }

    #[test]
    fn phi_non_commuting_beats_feasible_points() {
        let j = PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0])).unwrap();
        let l = PsdMatrix::from_diagonal(&[2.5, 0.5]).unwrap();
        let (v, k) = phi(&j, &l, 1.0, 0.2).unwrap();
        assert!(k.loewner_le(&j, 1e-9).unwrap());
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let cand = PsdMatrix::new(j.matrix() * s).unwrap();
            assert!(v >= psi(&cand, &l, 1.0, 0.2).unwrap() - 1e-12);
        }
    }

    #[test]
    fn stationary_value_formula() {
        for (l, u) in [(1.5f64, 0.5f64), (3.0, 1.0), (7.0, 4.0)] {
            let k = (u + l) / (l - 1.0);
            let closed = (u + 1.0) * (u + l).ln() - l.ln() - (u + 1.0) * (u + 1.0).ln();
            assert!((psi_scalar(k, l, u, 0.0) - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_search_matches_corner_and_brute_force() {
        let p = params(1.0, 0.3);
        for (q1, q2) in [(2.0, 3.0), (5.0, 0.5), (0.5, 4.0)] {
            let corner = f1_objective(q1, q2, p.u, p.n1);
            let v = f1(q1, q2, &p);
            assert!((v - corner).abs() < 1e-8, "{v} vs {corner}");
            let n = 400;
            let mut brute = f64::NEG_INFINITY;
            for a in 0..n {
                for b in 0..n {
                    let j = q1 * a as f64 / (n - 1) as f64;
                    let l = q2 * b as f64 / (n - 1) as f64;
                    brute = brute.max(f1_objective(j, l, p.u, p.n1));
                }
            }
            assert!((v - brute).abs() < 1e-4);
        }
    }

    #[test]
    fn f1_monotone_on_grid() {
        let p = params(2.0, 0.1);
        let grid: Vec<f64> = (1..8).map(|i| i as f64 * 0.7).collect();
        for &a in &grid {
            for w in grid.windows(2) {
                assert!(f1(w[1], a, &p) >= f1(w[0], a, &p));
                assert!(f1(a, w[1], &p) >= f1(a, w[0], &p));
            }
        }
    }

    #[test]
    fn degenerate_interferer() {
        let p = params(1.0, 0.5);
        let v = f1(2.0, 1e-12, &p);
        let direct = (2.0 + 0.5 + 1.0f64).ln() + psi_scalar(2.0, 0.0, 1.0, 0.5);
        assert!((v - direct).abs() < 1e-9);
    }

    #[test]
    fn envelope_dominates_and_reconstructs() {
        let p = params(1.0, 0.1);
        let g = g1(5.0, 0.5, &p).unwrap();
        assert!(g.g1 > g.f1 + EQUALITY_TOL, "{g:?}");
        let recon: f64 = g
            .envelope
            .support
            .iter()
            .map(|s| s.weight * f1(s.point[0], s.point[1], &p))
            .sum();
        assert!((recon - g.g1).abs() < 1e-5);
        let g = g1(0.8, 2.0, &p).unwrap();
        assert!(g.g1 >= g.f1 - 1e-12);
        assert!((g.g1 - g.f1).abs() < EQUALITY_TOL, "{g:?}");
    }

    #[test]
    fn tight_cells_respect_k_bound_and_cases() {
        assert_eq!(params(3.0, 0.0).bound(), 3.0);
        let p = params(1.0, 0.1);
        let r = lemma5_check(0.8, 2.0, &p).unwrap();
        assert!(r.bound_holds);
        assert!(matches!(lemma5_check(5.0, 0.5, &p), Err(Error::NotApplicable { .. })));
        assert_eq!(lemma5_case(10.0, 3.0, 1.0, 0.0), Lemma5Case::Interior);
        assert_eq!(lemma5_case(2.0, 3.0, 1.0, 0.0), Lemma5Case::Boundary);
        assert_eq!(lemma5_case(1.0, 3.0, 1.0, 0.0), Lemma5Case::Capped);
        assert_eq!(lemma5_case(10.0, 0.5, 1.0, 0.0), Lemma5Case::Capped);
    }

    #[test]
    fn interior_applicable_cells_have_large_l() {
        let p = params(1.0, 0.0);
        for l in [2.5, 3.0, 4.0, 6.0] {
            let j = unconstrained_argmax(l, 1.0) + 1.0;
            if let Ok(r) = lemma5_check(j, l, &p) {
                assert_eq!(r.case, Lemma5Case::Interior);
                assert!(l >= 2f64.sqrt() + 1.0 - 1e-6, "L = {l}");
                assert!(r.bound_holds);
            }
        }
    }

    #[test]
    fn equality_map_rows() {
        let p = params(1.0, 0.1);
        let rows = conjecture2_map(&[1.0], &[0.0, 0.5, 5.0], &p).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().any(|r| !r.f1_eq_g1));
        for r in rows.iter().filter(|r| r.f1_eq_g1 && r.q2 > 0.0) {
            assert!(r.stationary_k == 0.0 || r.stationary_k + p.n1 <= p.bound() + 1e-6, "{r:?}");
        }
    }

    #[test]
    fn zero_interferer_column() {
        let p = params(1.0, 0.5);
        let g = g1(1.5, 0.0, &p).unwrap();
        assert!(g.g1 >= g.f1 - 1e-12);
    }

    #[test]
    fn witness_unavailable() {
        let p = HKParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(constant_power_gap(&p, None), Err(Error::WitnessUnavailable(_))));
        let p = HKParams::new(1.0, 1e6, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(constant_power_gap(&p, Some(1.0)), Err(Error::WitnessUnavailable(_))));
    }
}
