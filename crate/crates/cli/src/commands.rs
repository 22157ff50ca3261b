//! Subcommands. Each validates its parameters, runs one experiment and
//! returns the report; rows follow the order of the parameter grids.

use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use zic_core::counterexample::{
    condition54_root, fit_half_order, lemma2_control, lemma2_gap, limit_functional_gain, stationary_pair_at,
    vertical_gap, Recipe, VerticalPerturbation,
};
use zic_core::entropy::{geomspace, lemma1_expansion};
use zic_core::geometry::{fit_inverse_t, theorem7_coefficient, theorem7_sweep};
use zic_core::hessian::{
    hessian_quadratic_form, matrix_maximizer, phase_diagram, stability_classify, stability_threshold,
    theorem5_certificate,
};
use zic_core::hk::{conjecture2_map, constant_power_gap_with, g1, lemma5_check, phi_scalar, theorem4_audit, HKParams};
use zic_core::{Error, HermiteCoeffVector, PsdMatrix, Stability};

use crate::parse::{Coeffs, Grid, Matrix};
use crate::report::{Check, Report, Row};
use crate::row;

/// Parameter rejected before any computation.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameter: {}", self.0)
    }
}

impl std::error::Error for Invalid {}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Invalid(msg()).into())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    ensure(v > 0.0 && v.is_finite(), || format!("{name} must be positive, got {v}"))
}

fn all_positive(name: &str, g: &Grid) -> Result<()> {
    ensure(!g.0.is_empty(), || format!("{name} is empty"))?;
    g.0.iter().try_for_each(|&v| positive(name, v))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Small-noise entropy expansion of the recipe against quadrature.
    VerifyLemma1(Lemma1Args),
    /// Non-Gaussian gap curve and Gaussian control.
    VerifyLemma2(Lemma2Args),
    /// Vertical perturbation gain signs against the stability classification.
    VerifyVertical(VerticalArgs),
    /// Bisection root of the third-order stability condition.
    Condition54Root(RootArgs),
    /// Second-variation ledger at a Gaussian stationary point.
    Hessian(HessianArgs),
    /// Stability classification over a (u, L) grid.
    PhaseDiagram(PhaseArgs),
    /// Local-optimality radius around the Gaussian maximizer.
    Theorem5Epsilon(Theorem5Args),
    /// psi/phi/f1/g1 tables over a power grid.
    HkRegion(RegionArgs),
    /// Random audit of the K + N1 bound at envelope-tight cells.
    Lemma5Audit(Lemma5Args),
    /// Top-eigenvalue audit of the fixed-power problem.
    Theorem4Audit(Theorem4Args),
    /// Gap between the Gaussian and a non-Gaussian constant-power sum rate.
    ConstantPowerGap(PowerGapArgs),
    /// Map of f1 = g1 over (u, q1, q2).
    Conjecture2Map(MapArgs),
    /// Minkowski-sum area ratio sweep.
    Geometry(GeometryArgs),
    /// Sign of the third-derivative perturbation gain of the limit functional.
    LimitFunctional(LimitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RecipeArgs {
    /// JSON file with a recipe `{"p": ..., "q": ...}`; the built-in recipe otherwise.
    #[arg(long)]
    recipe: Option<PathBuf>,
}

impl RecipeArgs {
    fn load(&self) -> Result<(Recipe, Value)> {
        let recipe = match &self.recipe {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| Invalid(format!("recipe {}: {e}", path.display())))?
            }
            None => Recipe::default(),
        };
        let echo = serde_json::to_value(&recipe)?;
        Ok((recipe, echo))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Lemma1Args {
    #[arg(long, default_value_t = 1e-4)]
    t_min: f64,
    #[arg(long, default_value_t = 1e-2)]
    t_max: f64,
    /// Geometrically spaced noise levels.
    #[arg(long, default_value_t = 12)]
    points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    recipe: RecipeArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct Lemma2Args {
    #[arg(long, default_value_t = 2e-3)]
    t_min: f64,
    #[arg(long, default_value_t = 3e-2)]
    t_max: f64,
    #[arg(long, default_value_t = 8)]
    points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    recipe: RecipeArgs,
}

fn t_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    positive("t-min", t_min)?;
    ensure(t_max > t_min && t_max.is_finite(), || format!("t-max must exceed t-min, got {t_max}"))?;
    ensure(points >= 6, || format!("need at least 6 points, got {points}"))?;
    Ok(geomspace(t_min, t_max, points))
}

#[derive(Debug, Args, Serialize)]
pub struct VerticalArgs {
    #[arg(long, default_value = "0.5,1,2")]
    u: Grid,
    /// Stationary K as multiples of the stability threshold.
    #[arg(long, default_value = "0.8,1.25,1.6")]
    factor: Grid,
    /// Variance removed before perturbing; `min(K, L/j)/10` when omitted.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 2)]
    j: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct RootArgs {
    #[arg(long)]
    u: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Bisection bracket width.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct HessianArgs {
    #[arg(long)]
    u: f64,
    #[arg(long = "L")]
    l: f64,
    /// Stationary value `(L+u)/(L-1)` when omitted.
    #[arg(long = "K")]
    k: Option<f64>,
    /// Coefficients of the first input, `alpha:value,...`.
    #[arg(long, default_value = "1:1,2:1,3:1")]
    a: Coeffs,
    /// Coefficients of the second input; order 1 must be absent.
    #[arg(long, default_value = "2:-1,3:1")]
    b: Coeffs,
}

#[derive(Debug, Args, Serialize)]
pub struct PhaseArgs {
    #[arg(long)]
    u: Grid,
    #[arg(long = "L")]
    l: Grid,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem5Args {
    #[arg(long)]
    u: f64,
    /// Rows separated by `;`, entries by `,`.
    #[arg(long = "L")]
    l: Matrix,
    /// Maximizer for `L` when omitted.
    #[arg(long = "K")]
    k: Option<Matrix>,
}

#[derive(Debug, Args, Serialize)]
pub struct ChannelArgs {
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    #[arg(long, default_value_t = 0.5)]
    n1: f64,
    #[arg(long, default_value_t = 1.0)]
    n2: f64,
}

impl ChannelArgs {
    fn validate(&self) -> Result<()> {
        positive("u", self.u)?;
        positive("n2", self.n2)?;
        ensure(self.n1 >= 0.0 && self.n1.is_finite(), || format!("n1 must be nonnegative, got {}", self.n1))
    }

    fn params(&self, q1: f64, q2: f64) -> Result<HKParams> {
        Ok(HKParams::new(self.u, self.n1, self.n2, q1, q2)?)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RegionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "0.5:3:0.5")]
    q1: Grid,
    #[arg(long, default_value = "0.5:3:0.5")]
    q2: Grid,
}

#[derive(Debug, Args, Serialize)]
pub struct Lemma5Args {
    /// Applicable cells to collect.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 5000)]
    max_draws: usize,
    #[arg(long, default_value_t = 4.0)]
    u_max: f64,
    #[arg(long, default_value_t = 1.5)]
    n1_max: f64,
    /// Upper end of the J and L draws.
    #[arg(long, default_value_t = 8.0)]
    power_max: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem4Args {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[command(flatten)]
    #[serde(flatten)]
    channel: ChannelArgs,
    /// Largest first-user power drawn.
    #[arg(long, default_value_t = 3.0)]
    q1: f64,
    #[arg(long, default_value_t = 3.0)]
    q2: f64,
    #[arg(long, default_value_t = 20)]
    samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PowerGapArgs {
    #[arg(long, default_value_t = 1.0)]
    n1: f64,
    #[arg(long, default_value_t = 1.0)]
    n2: f64,
    /// Variance of the Gaussian component added to the first input; chosen automatically when omitted.
    #[arg(long)]
    a: Option<f64>,
    /// Noise level of the recipe.
    #[arg(long, default_value_t = 0.02)]
    t: f64,
    #[command(flatten)]
    #[serde(flatten)]
    recipe: RecipeArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MapArgs {
    #[arg(long, default_value = "0.5,1,2")]
    u: Grid,
    #[arg(long, default_value = "0:2:0.5")]
    q: Grid,
    #[arg(long, default_value_t = 0.5)]
    n1: f64,
    #[arg(long, default_value_t = 1.0)]
    n2: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GeometryArgs {
    #[arg(long, default_value = "20:200:10")]
    t: Grid,
    /// Use the disc as the third body.
    #[arg(long)]
    isotropic: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitArgs {
    #[arg(long = "L", default_value = "1.2,1.6,2")]
    l: Grid,
    #[arg(long, default_value_t = 0.02)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    j: u32,
    /// Leave the second input unperturbed.
    #[arg(long)]
    independent: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyLemma1(_) => "verify-lemma1",
            Command::VerifyLemma2(_) => "verify-lemma2",
            Command::VerifyVertical(_) => "verify-vertical",
            Command::Condition54Root(_) => "condition54-root",
            Command::Hessian(_) => "hessian",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Theorem5Epsilon(_) => "theorem5-epsilon",
            Command::HkRegion(_) => "hk-region",
            Command::Lemma5Audit(_) => "lemma5-audit",
            Command::Theorem4Audit(_) => "theorem4-audit",
            Command::ConstantPowerGap(_) => "constant-power-gap",
            Command::Conjecture2Map(_) => "conjecture2-map",
            Command::Geometry(_) => "geometry",
            Command::LimitFunctional(_) => "limit-functional",
        }
    }

    fn params(&self) -> Result<Value> {
        Ok(match self {
            Command::VerifyLemma1(a) => serde_json::to_value(a)?,
            Command::VerifyLemma2(a) => serde_json::to_value(a)?,
            Command::VerifyVertical(a) => serde_json::to_value(a)?,
            Command::Condition54Root(a) => serde_json::to_value(a)?,
            Command::Hessian(a) => serde_json::to_value(a)?,
            Command::PhaseDiagram(a) => serde_json::to_value(a)?,
            Command::Theorem5Epsilon(a) => serde_json::to_value(a)?,
            Command::HkRegion(a) => serde_json::to_value(a)?,
            Command::Lemma5Audit(a) => serde_json::to_value(a)?,
            Command::Theorem4Audit(a) => serde_json::to_value(a)?,
            Command::ConstantPowerGap(a) => serde_json::to_value(a)?,
            Command::Conjecture2Map(a) => serde_json::to_value(a)?,
            Command::Geometry(a) => serde_json::to_value(a)?,
            Command::LimitFunctional(a) => serde_json::to_value(a)?,
        })
    }

    pub fn run(&self, mut config: Value, seed: u64) -> Result<Report> {
        config["params"] = self.params()?;
        let (results, checks, table, extra) = match self {
            Command::VerifyLemma1(a) => lemma1(a)?,
            Command::VerifyLemma2(a) => lemma2(a)?,
            Command::VerifyVertical(a) => vertical(a)?,
            Command::Condition54Root(a) => root(a)?,
            Command::Hessian(a) => hessian(a)?,
            Command::PhaseDiagram(a) => phase(a)?,
            Command::Theorem5Epsilon(a) => theorem5(a)?,
            Command::HkRegion(a) => region(a)?,
            Command::Lemma5Audit(a) => lemma5(a, seed)?,
            Command::Theorem4Audit(a) => theorem4(a, seed)?,
            Command::ConstantPowerGap(a) => power_gap(a)?,
            Command::Conjecture2Map(a) => map(a)?,
            Command::Geometry(a) => geometry(a)?,
            Command::LimitFunctional(a) => limit(a)?,
        };
        // Resolved inputs that are not flags, e.g. the recipe in use.
        if let Some(extra) = extra {
            config["resolved"] = extra;
        }
        Ok(Report { config, results, checks, table })
    }
}

type Outcome = (Value, Vec<Check>, Vec<Row>, Option<Value>);

fn table_results(table: &[Row]) -> Value {
    Value::Array(table.iter().cloned().map(Value::Object).collect())
}

fn lemma1(a: &Lemma1Args) -> Result<Outcome> {
    let ts = t_grid(a.t_min, a.t_max, a.points)?;
    let (recipe, echo) = a.recipe.load()?;
    let e = lemma1_expansion(&recipe.p, &recipe.q, &ts)?;
    let table: Vec<Row> = e.samples.iter().map(|&(t, dh)| row!("t" => t, "entropy_increment" => dh)).collect();
    let checks = vec![
        Check::relative("c1_vs_quadrature", e.c1, e.c1_quadrature, 0.02),
        Check::relative("c15_vs_quadrature", e.c15, e.c15_quadrature, 0.05),
        Check::close("residual_slope", e.residual_slope, 2.0, 0.25),
    ];
    Ok((serde_json::to_value(&e)?, checks, table, Some(json!({ "recipe": echo }))))
}

fn lemma2(a: &Lemma2Args) -> Result<Outcome> {
    let ts = t_grid(a.t_min, a.t_max, a.points)?;
    let (recipe, echo) = a.recipe.load()?;
    let gap = lemma2_gap(&ts, &recipe)?;
    let control = lemma2_control(&ts, &recipe)?;
    let table: Vec<Row> =
        gap.iter().zip(&control).map(|(g, c)| row!("t" => g.0, "gap" => g.1, "control" => c.1)).collect();
    let control_max = control.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::holds(format!("gap_positive_t={}", gap[0].0), gap[0].1, gap[0].1 > 1e-6),
        Check::holds(format!("gap_positive_t={}", gap[1].0), gap[1].1, gap[1].1 > 1e-6),
        Check::holds("control_max", control_max, control_max <= 1e-6),
    ];
    let results = json!({ "half_order_coefficient": fit_half_order(&gap), "rows": table_results(&table) });
    Ok((results, checks, table, Some(json!({ "recipe": echo }))))
}

fn vertical(a: &VerticalArgs) -> Result<Outcome> {
    all_positive("u", &a.u)?;
    all_positive("factor", &a.factor)?;
    ensure(a.j >= 1, || "j must be at least 1".into())?;
    if let Some(d) = a.delta {
        positive("delta", d)?;
    }
    let cells: Vec<(f64, f64)> = a.u.0.iter().flat_map(|&u| a.factor.0.iter().map(move |&f| (u, f))).collect();
    let rows: Vec<Result<(Row, Check)>> = cells
        .par_iter()
        .map(|&(u, factor)| {
            let (k, l) = stationary_pair_at(u, factor);
            ensure(l > 1.0, || format!("factor {factor} gives no stationary pair for u = {u}"))?;
            let vp = match a.delta {
                Some(d) => VerticalPerturbation::with_delta(k, l, u, d, a.j)?,
                None => VerticalPerturbation::with_defaults(k, l, u)?,
            };
            let g = vertical_gap(&vp)?;
            let class = stability_classify(k, u);
            let agrees = match class {
                Stability::Stable => g.quadratic_coeff < 0.0,
                Stability::Unstable => g.quadratic_coeff > 0.0,
                Stability::Critical => true,
            };
            let r = row!(
                "u" => u, "L" => l, "K" => k, "delta" => vp.delta, "eps" => vp.eps,
                "quadratic_coeff" => g.quadratic_coeff, "predicted_coeff" => g.predicted_coeff,
                "classification" => class.to_string(), "agrees" => agrees,
            );
            Ok((r, Check::holds(format!("sign_u={u}_K={k:.6}"), g.quadratic_coeff, agrees)))
        })
        .collect();
    let (table, checks): (Vec<Row>, Vec<Check>) = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok((table_results(&table), checks, table, None))
}

const ROOT_TOLERANCE: f64 = 1e-8;

fn root(a: &RootArgs) -> Result<Outcome> {
    positive("u", a.u)?;
    ensure(a.delta >= 0.0 && a.delta.is_finite(), || format!("delta must be nonnegative, got {}", a.delta))?;
    positive("tol", a.tol)?;
    let r = condition54_root(a.u, a.delta, a.tol)?;
    let closed = (a.delta == 0.0).then(|| stability_threshold(a.u));
    let checks = closed.map(|c| Check::close("root_vs_closed_form", r, c, ROOT_TOLERANCE)).into_iter().collect();
    let results = json!({ "u": a.u, "delta": a.delta, "root": r, "closed_form": closed, "tolerance": ROOT_TOLERANCE });
    let table = vec![row!("u" => a.u, "delta" => a.delta, "root" => r, "closed_form" => closed)];
    Ok((results, checks, table, None))
}

fn hessian(a: &HessianArgs) -> Result<Outcome> {
    positive("u", a.u)?;
    ensure(a.l > 1.0, || format!("L must exceed 1, got {}", a.l))?;
    let k = a.k.unwrap_or((a.l + a.u) / (a.l - 1.0));
    let mut av = HermiteCoeffVector::new(k);
    for (&alpha, &v) in &a.a.0 {
        av = av.with(alpha, v);
    }
    let mut bv = HermiteCoeffVector::new(a.l);
    for (&alpha, &v) in &a.b.0 {
        bv = bv.with(alpha, v);
    }
    let rep = hessian_quadratic_form(k, a.l, a.u, &av, &bv)?;
    let table: Vec<Row> = rep
        .per_alpha_terms
        .iter()
        .map(|(&alpha, &term)| row!("alpha" => alpha, "a" => av.get(alpha), "b" => bv.get(alpha), "term" => term))
        .collect();
    let mut checks = Vec::new();
    if let Some(&t1) = rep.per_alpha_terms.get(&1) {
        checks.push(Check::holds("first_order_nonpositive", t1, t1 <= 0.0));
    }
    let results = json!({
        "K": k, "L": a.l, "u": a.u, "threshold": stability_threshold(a.u),
        "total": rep.total, "classification": rep.classification, "terms": table_results(&table),
    });
    Ok((results, checks, table, Some(json!({ "K": k }))))
}

fn phase(a: &PhaseArgs) -> Result<Outcome> {
    all_positive("u", &a.u)?;
    ensure(!a.l.0.is_empty(), || "L is empty".into())?;
    let cells = phase_diagram(&a.u.0, &a.l.0)?;
    let table: Vec<Row> = cells
        .iter()
        .map(|c| row!("u" => c.u, "L" => c.l, "K" => c.k, "classification" => c.classification.to_string()))
        .collect();
    let checks = cells
        .iter()
        .filter(|c| c.classification != Stability::Critical)
        .map(|c| {
            let ok = (c.classification == Stability::Unstable) == (c.k > c.threshold);
            Check::holds(format!("threshold_u={}_L={}", c.u, c.l), c.k - c.threshold, ok)
        })
        .filter(|c| !c.pass)
        .collect();
    Ok((table_results(&table), checks, table, None))
}

fn theorem5(a: &Theorem5Args) -> Result<Outcome> {
    positive("u", a.u)?;
    let l = PsdMatrix::from_rows(&a.l.0)?;
    let k = match &a.k {
        Some(m) => PsdMatrix::from_rows(&m.0)?,
        None => matrix_maximizer(&l, a.u)?,
    };
    let resolved = json!({ "K": k.eigenvalues() });
    let (results, table) = match theorem5_certificate(&k, &l, a.u) {
        Ok(c) => {
            let table = vec![row!(
                "eps" => c.eps, "eps1" => c.eps1, "eps2" => c.eps2, "rayleigh_min" => c.rayleigh_min, "rho" => c.rho
            )];
            (json!({ "certificate": c }), table)
        }
        Err(e @ Error::HypothesisFailed { .. }) => {
            (json!({ "certificate": null, "reason": e.to_string() }), vec![row!("eps" => Value::Null)])
        }
        Err(e) => return Err(e.into()),
    };
    Ok((results, Vec::new(), table, Some(resolved)))
}

fn region(a: &RegionArgs) -> Result<Outcome> {
    a.channel.validate()?;
    all_positive("q1", &a.q1)?;
    all_positive("q2", &a.q2)?;
    let cells: Vec<(f64, f64)> = a.q1.0.iter().flat_map(|&x| a.q2.0.iter().map(move |&y| (x, y))).collect();
    let rows: Vec<Result<(Row, Check)>> = cells
        .par_iter()
        .map(|&(q1, q2)| {
            let p = a.channel.params(q1, q2)?;
            let r = g1(q1, q2, &p)?;
            let (psi, k) = phi_scalar(q1, q2, p.u, p.n1);
            let row = row!(
                "q1" => q1, "q2" => q2, "phi" => psi, "k_argmax" => k, "f1" => r.f1, "g1" => r.g1,
                "envelope_gap" => r.g1 - r.f1, "f1_eq_g1" => r.g1 - r.f1 <= zic_core::hk::EQUALITY_TOL,
            );
            Ok((row, Check::holds(format!("envelope_dominates_q1={q1}_q2={q2}"), r.g1 - r.f1, r.g1 - r.f1 >= -1e-9)))
        })
        .collect();
    let (table, checks): (Vec<Row>, Vec<Check>) = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let checks = checks.into_iter().filter(|c| !c.pass).collect();
    Ok((table_results(&table), checks, table, None))
}

fn lemma5(a: &Lemma5Args, seed: u64) -> Result<Outcome> {
    ensure(a.samples > 0 && a.samples <= a.max_draws, || "need 0 < samples ≤ max-draws".into())?;
    positive("u-max", a.u_max - 0.2).map_err(|_| Invalid("u-max must exceed 0.2".into()))?;
    ensure(a.n1_max >= 0.0, || "n1-max must be nonnegative".into())?;
    positive("power-max", a.power_max - 0.05).map_err(|_| Invalid("power-max must exceed 0.05".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<[f64; 4]> = (0..a.max_draws)
        .map(|_| {
            [
                rng.gen_range(0.2..a.u_max),
                rng.gen_range(0.0..=a.n1_max),
                rng.gen_range(0.05..a.power_max),
                rng.gen_range(0.05..a.power_max),
            ]
        })
        .collect();
    let mut table = Vec::new();
    let mut skipped = 0;
    let mut drawn = 0;
    for chunk in draws.chunks(64) {
        let reports: Vec<Result<Option<Row>>> = chunk
            .par_iter()
            .map(|&[u, n1, j, l]| {
                let p = HKParams::new(u, n1, 1.0, 1.0, 1.0)?;
                match lemma5_check(j, l, &p) {
                    Ok(r) => Ok(Some(row!(
                        "u" => u, "n1" => n1, "J" => j, "L" => l, "K" => r.k, "bound" => r.bound,
                        "bound_holds" => r.bound_holds, "case" => r.case.number(), "f1" => r.f1, "g1" => r.g1,
                    ))),
                    Err(Error::NotApplicable { .. }) => Ok(None),
                    Err(Error::GridTooSmall { .. }) => Ok(Some(Row::new())),
                    Err(e) => Err(e.into()),
                }
            })
            .collect();
        for r in reports {
            if table.len() == a.samples {
                break;
            }
            drawn += 1;
            match r? {
                Some(row) if row.is_empty() => skipped += 1,
                Some(row) => table.push(row),
                None => {}
            }
        }
        if table.len() == a.samples {
            break;
        }
    }
    let violations = table.iter().filter(|r| r["bound_holds"] == json!(false)).count();
    let checks = vec![
        Check::holds("applicable_cells", table.len() as f64, table.len() == a.samples),
        Check::holds("violations", violations as f64, violations == 0),
    ];
    let results = json!({ "drawn": drawn, "outside_tabulation": skipped, "rows": table_results(&table) });
    Ok((results, checks, table, None))
}

fn theorem4(a: &Theorem4Args, seed: u64) -> Result<Outcome> {
    a.channel.validate()?;
    positive("q1", a.q1)?;
    positive("q2", a.q2)?;
    ensure((1..=2).contains(&a.d), || format!("d must be 1 or 2, got {}", a.d))?;
    ensure(a.samples > 0, || "samples must be positive".into())?;
    let rep = theorem4_audit(a.d, &a.channel.params(a.q1, a.q2)?, a.samples, seed)?;
    let table: Vec<Row> = rep
        .rows
        .iter()
        .map(|r| {
            row!(
                "q1" => r.q1, "q2" => r.q2, "split" => serde_json::to_string(&r.split).unwrap_or_default(),
                "applicable" => r.applicable, "k_max" => r.k_max, "bound_holds" => r.bound_holds,
            )
        })
        .collect();
    let checks = vec![Check::holds("all_pass", rep.max_eigenvalue, rep.all_pass)];
    Ok((serde_json::to_value(&rep)?, checks, table, None))
}

fn power_gap(a: &PowerGapArgs) -> Result<Outcome> {
    positive("n1", a.n1)?;
    positive("n2", a.n2)?;
    positive("t", a.t)?;
    if let Some(v) = a.a {
        positive("a", v)?;
    }
    let (recipe, echo) = a.recipe.load()?;
    // The powers are outputs of the witness; the placeholders are unused.
    let p = HKParams::new(1.0, a.n1, a.n2, 1.0, 1.0)?;
    let g = constant_power_gap_with(&p, &recipe, a.t, a.a)?;
    let table = vec![row!(
        "q1" => g.q1, "q2" => g.q2, "a" => g.a, "gaussian_value" => g.gaussian_value,
        "lower_witness" => g.lower_witness, "gap" => g.gap, "c" => g.c, "slack" => g.slack,
    )];
    let checks = vec![Check::holds("gap_positive", g.gap, g.gap > 0.0)];
    Ok((serde_json::to_value(&g)?, checks, table, Some(json!({ "u": 1.0, "a": g.a, "recipe": echo }))))
}

fn map(a: &MapArgs) -> Result<Outcome> {
    all_positive("u", &a.u)?;
    ensure(!a.q.0.is_empty() && a.q.0.iter().all(|&q| q >= 0.0), || "q values must be nonnegative".into())?;
    positive("n2", a.n2)?;
    ensure(a.n1 >= 0.0 && a.n1.is_finite(), || format!("n1 must be nonnegative, got {}", a.n1))?;
    let qmax = a.q.0.iter().cloned().fold(0.0, f64::max).max(1.0);
    let p = HKParams::new(a.u.0[0], a.n1, a.n2, qmax, qmax)?;
    let rows = conjecture2_map(&a.u.0, &a.q.0, &p)?;
    let table: Vec<Row> = rows
        .iter()
        .map(|r| {
            row!(
                "u" => r.u, "q1" => r.q1, "q2" => r.q2, "f1" => r.f1, "g1" => r.g1,
                "f1_eq_g1" => r.f1_eq_g1, "stationary_k" => r.stationary_k,
            )
        })
        .collect();
    Ok((table_results(&table), Vec::new(), table, None))
}

fn geometry(a: &GeometryArgs) -> Result<Outcome> {
    all_positive("t", &a.t)?;
    let sweep = theorem7_sweep(&a.t.0, a.isotropic)?;
    let table: Vec<Row> = sweep.iter().map(|&(t, r)| row!("t" => t, "ratio" => r, "above_one" => r > 1.0)).collect();
    let mut checks = Vec::new();
    if a.isotropic {
        let worst = sweep.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::holds("isotropic_ratio_at_most_one", worst, worst <= 1.0 + 1e-9));
    } else {
        let pts: Vec<(f64, f64)> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&t| Ok((t, zic_core::geometry::theorem7_ratio(t)?)))
            .collect::<Result<_, Error>>()?;
        checks.push(Check::relative("inverse_t_coefficient", fit_inverse_t(&pts)?, theorem7_coefficient(), 0.01));
        let worst = sweep.iter().filter(|p| p.0 >= 20.0).map(|p| p.1).fold(f64::INFINITY, f64::min);
        if worst.is_finite() {
            checks.push(Check::holds("ratio_above_one_for_t_ge_20", worst, worst > 1.0));
        }
    }
    let results = json!({ "coefficient": theorem7_coefficient(), "rows": table_results(&table) });
    Ok((results, checks, table, None))
}

fn limit(a: &LimitArgs) -> Result<Outcome> {
    ensure(!a.l.0.is_empty() && a.l.0.iter().all(|&l| l > 1.0), || "every L must exceed 1".into())?;
    positive("delta", a.delta)?;
    ensure(a.j >= 1, || "j must be at least 1".into())?;
    let gains: Vec<Result<_>> =
        a.l.0.par_iter().map(|&l| Ok(limit_functional_gain(l, a.delta, a.j, !a.independent)?)).collect();
    let gains = gains.into_iter().collect::<Result<Vec<_>>>()?;
    let table: Vec<Row> = gains
        .iter()
        .map(|g| {
            row!(
                "L" => g.l, "K" => g.k, "eps" => g.eps, "coefficient" => g.coefficient,
                "predicted" => g.predicted, "gain_positive" => g.coefficient > 0.0,
            )
        })
        .collect();
    let checks = gains
        .iter()
        .map(|g| Check::holds(format!("sign_matches_prediction_L={}", g.l), g.coefficient, (g.coefficient > 0.0) == (g.predicted > 0.0)))
        .collect();
    Ok((table_results(&table), checks, table, None))
}
