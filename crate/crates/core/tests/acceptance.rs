//! Acceptance gate. Criteria run sequentially so the timing limits are
//! measured without contention; each prints a PASS/FAIL line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zic_core::counterexample::{
    condition54_root, lemma2_control, lemma2_gap, limit_functional_gain, vertical_gap, Recipe,
    VerticalPerturbation,
};
use zic_core::entropy::{geomspace, lemma1_expansion};
use zic_core::gaussian::{gauss_derivative, gaussian_density, hermite_weighted_norm};
use zic_core::geometry::{fit_inverse_t, theorem7_coefficient, theorem7_ratio, theorem7_ratio_with};
use zic_core::hessian::{
    hessian_quadratic_form, hessian_term, matrix_maximizer, stability_classify, stability_threshold,
    theorem5_certificate, theorem5_epsilon, CRITICAL_BAND,
};
use zic_core::hk::{g1, g2, lemma5_check, HKParams};
use zic_core::linalg::{random_orthogonal, random_psd, standard_normal, PsdMatrix};
use zic_core::quadrature::integrate;
use zic_core::{Error, HermiteCoeffVector, Stability};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    println!(
        "{} [{id:>2}] {name}: {} ({:.2?}{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed,
        if in_time { String::new() } else { format!(", over limit {limit:?}") }
    );
    pass
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..=6u32 {
        for v in [0.5f64, 1.0, 2.0, 4.0] {
            let r = 30.0 * v.sqrt();
            let q = integrate(
                |x| {
                    let d = gauss_derivative(k, v, x);
                    d * d / gaussian_density(v, x)
                },
                -r,
                r,
                120,
                1e-15,
                1e-15,
            );
            worst = worst.max((q.value - hermite_weighted_norm(k, v)).abs());
        }
    }
    Outcome { pass: worst < 1e-8, detail: format!("max |norm - quadrature| = {worst:.2e}") }
}

fn criterion_2() -> Outcome {
    let r = Recipe::default();
    match lemma1_expansion(&r.p, &r.q, &geomspace(1e-4, 1e-2, 12)) {
        Ok(e) => {
            let rel1 = ((e.c1 - e.c1_quadrature) / e.c1_quadrature).abs();
            let rel15 = ((e.c15 - e.c15_quadrature) / e.c15_quadrature).abs();
            Outcome {
                pass: rel1 < 0.02 && rel15 < 0.05 && (e.residual_slope - 2.0).abs() <= 0.25,
                detail: format!(
                    "c1 {:.6} vs {:.6} (rel {rel1:.1e}), c15 {:.6} vs {:.6} (rel {rel15:.1e}), residual slope {:.3}",
                    e.c1, e.c1_quadrature, e.c15, e.c15_quadrature, e.residual_slope
                ),
            }
        }
        Err(e) => Outcome { pass: false, detail: format!("error {e}") },
    }
}

fn criterion_3() -> Outcome {
    let r = Recipe::default();
    let ts = geomspace(2e-3, 3e-2, 8);
    match (lemma2_gap(&ts, &r), lemma2_control(&ts, &r)) {
        (Ok(g), Ok(c)) => {
            let smallest = [g[0].1, g[1].1];
            let ctl = c.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            Outcome {
                pass: smallest.iter().all(|&x| x > 1e-6) && ctl <= 1e-6,
                detail: format!(
                    "gap at t={:.1e}: {:.3e}, t={:.1e}: {:.3e}; control max {ctl:.3e}",
                    g[0].0, g[0].1, g[1].0, g[1].1
                ),
            }
        }
        (a, b) => Outcome { pass: false, detail: format!("errors {:?} {:?}", a.err(), b.err()) },
    }
}

fn criterion_4() -> Outcome {
    let mut root_err: f64 = 0.0;
    for u in [0.5, 1.0, 2.0] {
        match condition54_root(u, 0.0, 1e-12) {
            Ok(r) => root_err = root_err.max((r - stability_threshold(u)).abs()),
            Err(_) => root_err = f64::INFINITY,
        }
    }
    let mut agree = 0;
    let mut cells = Vec::new();
    for u in [0.5, 1.0, 2.0] {
        for factor in [0.8, 1.25, 1.6] {
            let k = factor * stability_threshold(u);
            let l = (k + u) / (k - 1.0);
            let sign = VerticalPerturbation::with_defaults(k, l, u)
                .and_then(|vp| vertical_gap(&vp))
                .map(|g| g.quadratic_coeff);
            let class = stability_classify(k, u);
            let ok = match (&sign, class) {
                (Ok(c), Stability::Stable) => *c < 0.0,
                (Ok(c), Stability::Unstable) => *c > 0.0,
                _ => false,
            };
            agree += ok as usize;
            cells.push(format!("{:+.1e}", sign.unwrap_or(f64::NAN)));
        }
    }
    Outcome {
        pass: root_err < 1e-8 && agree == 9,
        detail: format!("max root error {root_err:.1e}; {agree}/9 vertical-gap signs agree [{}]", cells.join(" ")),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_i1 = f64::NEG_INFINITY;
    let mut worst_cancel: f64 = 0.0;
    for _ in 0..200 {
        let u = rng.gen_range(0.01..20.0);
        let l = rng.gen_range(1.001..50.0);
        let k = (l + u) / (l - 1.0);
        let a1 = standard_normal(&mut rng);
        let r = hessian_quadratic_form(
            k,
            l,
            u,
            &HermiteCoeffVector::new(k).with(1, a1),
            &HermiteCoeffVector::new(l),
        );
        worst_i1 = worst_i1.max(r.map(|r| r.total).unwrap_or(f64::INFINITY));
        let a = standard_normal(&mut rng);
        let got = hessian_term(2, k, l, u, a, -a) / 6.0;
        let expected = -a * a / k.powi(3) + (1.0 + u) * a * a / (k + u).powi(3);
        worst_cancel = worst_cancel.max((got - expected).abs());
    }
    let mut flips = true;
    for u in [0.5, 1.0, 2.0, 3.0] {
        let t = stability_threshold(u);
        flips &= stability_classify(t - 2.0 * CRITICAL_BAND, u) == Stability::Stable
            && stability_classify(t + 2.0 * CRITICAL_BAND, u) == Stability::Unstable
            && stability_classify(t, u) == Stability::Critical
            && stability_classify(t + 0.5 * CRITICAL_BAND, u) == Stability::Critical;
    }
    Outcome {
        pass: worst_i1 <= 0.0 && worst_cancel <= 1e-12 && flips && CRITICAL_BAND <= 1e-9,
        detail: format!(
            "max I1 {worst_i1:.3e}; max cancellation error {worst_cancel:.1e}; classification flips at threshold: {flips}"
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut applicable, mut tried, mut violations, mut skipped) = (0, 0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    while applicable < 200 && tried < 5000 {
        tried += 1;
        let u = rng.gen_range(0.2..4.0);
        let n1 = rng.gen_range(0.0..1.5);
        let j = rng.gen_range(0.05..8.0);
        let l = rng.gen_range(0.05..8.0);
        let p = HKParams::new(u, n1, 1.0, 1.0, 1.0).expect("valid draw");
        match lemma5_check(j, l, &p) {
            Ok(r) => {
                applicable += 1;
                if r.k > 0.0 {
                    worst = worst.max(r.k + n1 - r.bound);
                    if r.k + n1 > r.bound + 1e-6 {
                        violations += 1;
                    }
                }
            }
            Err(Error::NotApplicable { .. }) => {}
            Err(_) => skipped += 1,
        }
    }
    let points = [(1.0, 0.5, 1.0, 1.0), (2.0, 0.2, 3.0, 0.5), (0.5, 1.0, 0.5, 2.0), (1.0, 0.1, 5.0, 0.5), (3.0, 0.3, 2.0, 2.0)];
    let mut tens: f64 = 0.0;
    for (u, n1, q1, q2) in points {
        let p = HKParams::new(u, n1, 1.0, q1, q2).expect("valid point");
        tens = match (g1(q1, q2, &p), g2(2.0 * q1, 2.0 * q2, 97, &p)) {
            (Ok(a), Ok(b)) => tens.max((b - 2.0 * a.g1).abs()),
            _ => f64::INFINITY,
        };
    }
    Outcome {
        pass: applicable == 200 && violations == 0 && tens <= 5e-3,
        detail: format!(
            "{applicable} applicable of {tried} draws ({skipped} outside tabulation), {violations} violations, max (K+N1) - bound {worst:.3e}; max |g2(2q) - 2 g1(q)| {tens:.2e}"
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut p4 = (0, f64::INFINITY);
    let mut p5 = 0;
    let mut p3 = 0;
    for i in 0..500 {
        let d = 2 + i % 3;
        let k = random_psd(&mut rng, d, 2.0);
        let l = random_psd(&mut rng, d, 2.0);
        let (kd, _) = k.decreasing_alignment();
        let (li, _) = l.increasing_alignment();
        let slack = kd.add(&li).unwrap().lndet() - k.add(&l).unwrap().lndet();
        let equality_ok = slack.abs() >= 1e-9 || k.commutator_norm(&l).unwrap() < 1e-8;
        if slack >= -1e-10 && equality_ok {
            p4.0 += 1;
        }
        p4.1 = p4.1.min(slack);

        let bigger = k.add(&random_psd(&mut rng, d, 1.0)).unwrap();
        let (a, _) = k.decreasing_alignment();
        let (b, _) = bigger.decreasing_alignment();
        p5 += a.loewner_le(&b, 1e-10).unwrap() as usize;

        p3 += proposition3_holds(&k.shift(0.1), &l, &mut rng) as usize;
    }
    Outcome {
        pass: p4.0 == 500 && p5 == 500 && p3 == 500,
        detail: format!("alignment lndet {}/500 (min slack {:.2e}), Loewner order {p5}/500, rotation stationarity {p3}/500", p4.0, p4.1),
    }
}

fn rotated_lndet(k: &PsdMatrix, l: &PsdMatrix, h: &nalgebra::DMatrix<f64>, s: f64) -> f64 {
    let n = h.nrows();
    let i = nalgebra::DMatrix::<f64>::identity(n, n);
    let q = (&i - h * (s / 2.0)).try_inverse().unwrap() * (&i + h * (s / 2.0));
    let m = k.matrix() + q.transpose() * l.matrix() * q;
    PsdMatrix::new((&m + m.transpose()) * 0.5).unwrap().lndet()
}

fn derivative(k: &PsdMatrix, l: &PsdMatrix, h: &nalgebra::DMatrix<f64>) -> f64 {
    let s = 1e-5;
    (rotated_lndet(k, l, h, s) - rotated_lndet(k, l, h, -s)) / (2.0 * s)
}

/// Nonzero derivative along the unit steepest direction for the generic pair
/// and zero derivative along a random direction for a commuting pair.
fn proposition3_holds(k: &PsdMatrix, l: &PsdMatrix, rng: &mut ChaCha8Rng) -> bool {
    let d = k.dim();
    let m = k.add(l).unwrap();
    let minv = m.matrix().clone().try_inverse().unwrap();
    let steep = l.matrix() * &minv - &minv * l.matrix();
    let unit = &steep / steep.norm();
    let comm = k.commutator_norm(l).unwrap();
    let generic = comm < 1e-8 || derivative(k, l, &unit).abs() > 1e-6;
    let q = random_orthogonal(rng, d);
    let kc = PsdMatrix::from_eigen(&k.eigenvalues(), &q);
    let lc = PsdMatrix::from_eigen(&l.eigenvalues(), &q);
    let g = nalgebra::DMatrix::from_fn(d, d, |_, _| standard_normal(rng));
    let commuting = kc.commutator_norm(&lc).unwrap() < 1e-8 && derivative(&kc, &lc, &(&g - g.transpose())).abs() < 1e-6;
    generic && commuting
}

fn criterion_8() -> Outcome {
    let k = PsdMatrix::scalar(2.0).unwrap();
    let l = PsdMatrix::scalar(3.0).unwrap();
    let cert = theorem5_certificate(&k, &l, 1.0);
    let eps2_err = cert.as_ref().map(|c| (c.eps2 - 11.0 / 43.0).abs()).unwrap_or(f64::INFINITY);
    let t = stability_threshold(1.0);
    let lt = PsdMatrix::scalar((t + 1.0) / (t - 1.0)).unwrap();
    let kt = matrix_maximizer(&lt, 1.0).unwrap();
    let none_at_threshold = theorem5_epsilon(&kt, &lt, 1.0).is_none();
    Outcome {
        pass: eps2_err < 1e-9 && none_at_threshold,
        detail: format!(
            "eps2 = {:.12} (error {eps2_err:.1e}), eps = {:.6}; at threshold: {}",
            cert.as_ref().map(|c| c.eps2).unwrap_or(f64::NAN),
            cert.as_ref().map(|c| c.eps).unwrap_or(f64::NAN),
            if none_at_threshold { "None" } else { "Some" }
        ),
    }
}

fn criterion_9() -> Outcome {
    let ts: Vec<f64> = (20..=200).map(f64::from).collect();
    let min_ratio = ts.iter().map(|&t| theorem7_ratio(t).unwrap()).fold(f64::INFINITY, f64::min);
    let max_iso = ts.iter().map(|&t| theorem7_ratio_with(t, true).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = [50.0, 100.0, 200.0].iter().map(|&t| (t, theorem7_ratio(t).unwrap())).collect();
    let c = fit_inverse_t(&pts).unwrap();
    let rel = ((c - theorem7_coefficient()) / theorem7_coefficient()).abs();
    Outcome {
        pass: min_ratio > 1.0 && max_iso <= 1.0 + 1e-9 && rel < 0.01,
        detail: format!(
            "min ratio {min_ratio:.9}, max ratio with disc {max_iso:.9}, 1/t coefficient {c:.6} vs {:.6} (rel {rel:.1e}, π√2/2 = {:.4})",
            theorem7_coefficient(),
            PI * 2f64.sqrt() / 2.0
        ),
    }
}

fn criterion_10() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (l, positive) in [(1.2, true), (1.6, false), (2.0, false)] {
        match limit_functional_gain(l, 0.02, 2, true) {
            Ok(g) => {
                ok &= (g.coefficient > 0.0) == positive;
                parts.push(format!("L={l}: {:+.4e} (δ→0 prediction {:+.4e})", g.coefficient, g.predicted));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("L={l}: error {e}"));
            }
        }
    }
    Outcome { pass: ok, detail: parts.join(", ") }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "Hermite weighted norms", s(1), criterion_1),
        run(2, "small-noise entropy expansion", s(30), criterion_2),
        run(3, "non-Gaussian gap and Gaussian control", s(60), criterion_3),
        run(4, "stability threshold and vertical-gap signs", s(300), criterion_4),
        run(5, "second-variation ledger", s(60), criterion_5),
        run(6, "envelope-tight K bound and tensorization", s(300), criterion_6),
        run(7, "PSD alignment properties", s(60), criterion_7),
        run(8, "local-optimality radius", s(1), criterion_8),
        run(9, "Minkowski ratio", s(1), criterion_9),
        run(10, "limit functional boundary", s(120), criterion_10),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
