//! Planar convex bodies, Minkowski sums and mixed areas.
//!
//! Sums involving a disc are kept as a polygon plus a rounding radius, whose
//! area follows exactly from the Steiner formula.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Strictly convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
    centroid: Point,
}

impl Polygon {
    /// Validates a counterclockwise strictly convex vertex list. Repeated
    /// consecutive vertices are dropped first.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let mut v: Vec<Point> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidParameter("non-finite vertex".into()));
            }
            if v.last().map_or(true, |q: &Point| (q[0] - p[0]).abs() + (q[1] - p[1]).abs() > 1e-14) {
                v.push(p);
            }
        }
        while v.len() > 1 && {
            let (a, b) = (v[0], v[v.len() - 1]);
            (a[0] - b[0]).abs() + (a[1] - b[1]).abs() <= 1e-14
        } {
            v.pop();
        }
        let n = v.len();
        if n < 3 {
            return Err(Error::NonConvexInput);
        }
        let scale = v.iter().fold(1.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
        for i in 0..n {
            if cross(v[i], v[(i + 1) % n], v[(i + 2) % n]) <= 1e-14 * scale * scale {
                return Err(Error::NonConvexInput);
            }
        }
        // a star-shaped vertex list winding twice also has positive turns
        let turn: f64 = (0..n)
            .map(|i| {
                let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
                let e1 = [b[0] - a[0], b[1] - a[1]];
                let e2 = [c[0] - b[0], c[1] - b[1]];
                (e1[0] * e2[1] - e1[1] * e2[0]).atan2(e1[0] * e2[0] + e1[1] * e2[1])
            })
            .sum();
        if (turn - 2.0 * PI).abs() > 1e-9 {
            return Err(Error::NonConvexInput);
        }
        let centroid = polygon_centroid(&v);
        Ok(Self { vertices: v, centroid })
    }

    /// Convex hull (monotone chain); collinear points are dropped.
    pub fn hull(points: &[Point]) -> Result<Self> {
        let mut p: Vec<Point> = points.to_vec();
        p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        p.dedup();
        if p.len() < 3 {
            return Err(Error::NonConvexInput);
        }
        let mut lower: Vec<Point> = Vec::new();
        for &q in &p {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
                lower.pop();
            }
            lower.push(q);
        }
        let mut upper: Vec<Point> = Vec::new();
        for &q in p.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
                upper.pop();
            }
            upper.push(q);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self::new(lower)
    }

    /// Axis-aligned square of the given side centered at the origin.
    pub fn square(side: f64) -> Result<Self> {
        let h = side / 2.0;
        Self::new(vec![[-h, -h], [h, -h], [h, h], [-h, h]])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(_, len)| len).sum()
    }

    /// Outer unit normals and lengths of the edges.
    pub fn edges(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            ([dy / len, -dx / len], len)
        })
    }

    pub fn support(&self, dir: Point) -> f64 {
        self.vertices.iter().map(|p| p[0] * dir[0] + p[1] * dir[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn translate(&self, by: Point) -> Self {
        let vertices = self.vertices.iter().map(|p| [p[0] + by[0], p[1] + by[1]]).collect();
        Self { vertices, centroid: [self.centroid[0] + by[0], self.centroid[1] + by[1]] }
    }

    pub fn centered(&self) -> Self {
        self.translate([-self.centroid[0], -self.centroid[1]])
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {s}")));
        }
        Ok(Self {
            vertices: self.vertices.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
            centroid: [self.centroid[0] * s, self.centroid[1] * s],
        })
    }

    pub fn rotate(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let r = |p: &Point| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        Self { vertices: self.vertices.iter().map(r).collect(), centroid: r(&self.centroid) }
    }

    /// Minkowski sum by merging edges in order of their normal angle.
    pub fn minkowski(&self, other: &Self) -> Result<Self> {
        let start = |v: &[Point]| {
            (0..v.len())
                .min_by(|&i, &j| v[i][1].total_cmp(&v[j][1]).then(v[i][0].total_cmp(&v[j][0])))
                .expect("nonempty")
        };
        let (a, b) = (&self.vertices, &other.vertices);
        let (ia, ib) = (start(a), start(b));
        let (na, nb) = (a.len(), b.len());
        let edge = |v: &[Point], s: usize, k: usize| {
            let (p, q) = (v[(s + k) % v.len()], v[(s + k + 1) % v.len()]);
            [q[0] - p[0], q[1] - p[1]]
        };
        let mut out = Vec::with_capacity(na + nb);
        let mut cur = [a[ia][0] + b[ib][0], a[ia][1] + b[ib][1]];
        let (mut i, mut j) = (0, 0);
        while i < na || j < nb {
            out.push(cur);
            let step = if i == na {
                j += 1;
                edge(b, ib, j - 1)
            } else if j == nb {
                i += 1;
                edge(a, ia, i - 1)
            } else {
                let (ea, eb) = (edge(a, ia, i), edge(b, ib, j));
                let c = ea[0] * eb[1] - ea[1] * eb[0];
                if c > 0.0 {
                    i += 1;
                    ea
                } else if c < 0.0 {
                    j += 1;
                    eb
                } else {
                    i += 1;
                    j += 1;
                    [ea[0] + eb[0], ea[1] + eb[1]]
                }
            };
            cur = [cur[0] + step[0], cur[1] + step[1]];
        }
        Self::new(remove_collinear(out))
    }
}

fn remove_collinear(v: Vec<Point>) -> Vec<Point> {
    let scale = v.iter().fold(1.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    let mut out = v;
    loop {
        let n = out.len();
        if n < 3 {
            return out;
        }
        let drop = (0..n).find(|&i| cross(out[(i + n - 1) % n], out[i], out[(i + 1) % n]).abs() <= 1e-13 * scale * scale);
        match drop {
            Some(i) => {
                out.remove(i);
            }
            None => return out,
        }
    }
}

fn polygon_centroid(v: &[Point]) -> Point {
    let n = v.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let c = p[0] * q[1] - q[0] * p[1];
        a += c;
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    [cx / (3.0 * a), cy / (3.0 * a)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConvexBody2D {
    Polygon(Polygon),
    Disc { radius: f64 },
}

impl ConvexBody2D {
    pub fn disc(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(ConvexBody2D::Disc { radius })
    }

    pub fn area(&self) -> f64 {
        match self {
            ConvexBody2D::Polygon(p) => p.area(),
            ConvexBody2D::Disc { radius } => PI * radius * radius,
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            ConvexBody2D::Polygon(p) => p.perimeter(),
            ConvexBody2D::Disc { radius } => 2.0 * PI * radius,
        }
    }

    pub fn support(&self, dir: Point) -> f64 {
        match self {
            ConvexBody2D::Polygon(p) => p.support(dir),
            ConvexBody2D::Disc { radius } => radius * dir[0].hypot(dir[1]),
        }
    }

    pub fn centered(&self) -> Self {
        match self {
            ConvexBody2D::Polygon(p) => ConvexBody2D::Polygon(p.centered()),
            d => d.clone(),
        }
    }
}

impl From<Polygon> for ConvexBody2D {
    fn from(p: Polygon) -> Self {
        ConvexBody2D::Polygon(p)
    }
}

/// `polygon ⊕ radius·B`, with either part possibly absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedPolygon {
    pub polygon: Option<Polygon>,
    pub radius: f64,
}

impl RoundedPolygon {
    /// Steiner formula `A + P r + π r²`.
    pub fn area(&self) -> f64 {
        let (a, p) = self.polygon.as_ref().map_or((0.0, 0.0), |q| (q.area(), q.perimeter()));
        a + p * self.radius + PI * self.radius * self.radius
    }

    pub fn perimeter(&self) -> f64 {
        self.polygon.as_ref().map_or(0.0, |q| q.perimeter()) + 2.0 * PI * self.radius
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        let polygon = match (&self.polygon, &other.polygon) {
            (Some(a), Some(b)) => Some(a.minkowski(b)?),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        Ok(Self { polygon, radius: self.radius + other.radius })
    }
}

impl From<&ConvexBody2D> for RoundedPolygon {
    fn from(b: &ConvexBody2D) -> Self {
        match b {
            ConvexBody2D::Polygon(p) => RoundedPolygon { polygon: Some(p.clone()), radius: 0.0 },
            ConvexBody2D::Disc { radius } => RoundedPolygon { polygon: None, radius: *radius },
        }
    }
}

/// Result of a Minkowski sum: a body when the sum is a polygon or a disc,
/// otherwise the Steiner bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MinkowskiSum {
    Body(ConvexBody2D),
    Rounded(RoundedPolygon),
}

impl MinkowskiSum {
    pub fn area(&self) -> f64 {
        match self {
            MinkowskiSum::Body(b) => b.area(),
            MinkowskiSum::Rounded(r) => r.area(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            MinkowskiSum::Body(b) => b.perimeter(),
            MinkowskiSum::Rounded(r) => r.perimeter(),
        }
    }
}

pub fn minkowski_sum(a: &ConvexBody2D, b: &ConvexBody2D) -> Result<MinkowskiSum> {
    Ok(match (a, b) {
        (ConvexBody2D::Polygon(p), ConvexBody2D::Polygon(q)) => MinkowskiSum::Body(p.minkowski(q)?.into()),
        (ConvexBody2D::Disc { radius: r }, ConvexBody2D::Disc { radius: s }) => {
            MinkowskiSum::Body(ConvexBody2D::Disc { radius: r + s })
        }
        _ => MinkowskiSum::Rounded(RoundedPolygon::from(a).plus(&RoundedPolygon::from(b))?),
    })
}

/// Mixed area `A(K, L)` from `2A(K, L) = Σ_e h_K(n_e) |e|` over the edges of
/// `L` (a disc contributes `r · perimeter(K)`), after centering both bodies.
pub fn mixed_area(k: &ConvexBody2D, l: &ConvexBody2D) -> f64 {
    let k = k.centered();
    match l.centered() {
        ConvexBody2D::Polygon(p) => 0.5 * p.edges().map(|(n, len)| k.support(n) * len).sum::<f64>(),
        ConvexBody2D::Disc { radius } => 0.5 * radius * k.perimeter(),
    }
}

pub fn mean_width_2d(c: &ConvexBody2D) -> f64 {
    c.perimeter() / PI
}

/// The three bodies of the non-isotropic comparison: the unit square, the
/// disc of radius ½ and the square of side π/4 rotated by π/4, all centered.
pub fn reference_bodies() -> (Polygon, ConvexBody2D, Polygon) {
    let k = Polygon::square(1.0).expect("unit square");
    let b = ConvexBody2D::disc(0.5).expect("positive radius");
    let l = Polygon::square(PI / 4.0).expect("positive side").rotate(PI / 4.0);
    (k, b, l)
}

/// `area^{1/2}(tK + B + L) · area^{1/2}(tK) / area(tK + B)` with exact areas.
/// With `isotropic` the third body is replaced by the disc.
pub fn theorem7_ratio_with(t: f64, isotropic: bool) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let (k, b, l) = reference_bodies();
    let tk = RoundedPolygon { polygon: Some(k.scale(t)?), radius: 0.0 };
    let b = RoundedPolygon::from(&b);
    let third = if isotropic { b.clone() } else { RoundedPolygon { polygon: Some(l), radius: 0.0 } };
    let tkb = tk.plus(&b)?;
    let tkbl = tkb.plus(&third)?;
    Ok((tkbl.area() * tk.area()).sqrt() / tkb.area())
}

pub fn theorem7_ratio(t: f64) -> Result<f64> {
    theorem7_ratio_with(t, false)
}

pub fn theorem7_sweep(ts: &[f64], isotropic: bool) -> Result<Vec<(f64, f64)>> {
    ts.par_iter().map(|&t| Ok((t, theorem7_ratio_with(t, isotropic)?))).collect()
}

/// Exact large-`t` coefficient `(π√2/2 - 2)/2` of `ratio - 1` in `1/t`.
pub fn theorem7_coefficient() -> f64 {
    (PI * 2f64.sqrt() / 2.0 - 2.0) / 2.0
}

/// `1/t` coefficient of `ratio - 1` from an exact solve of
/// `c₁/t + c₂/t² + c₃/t³` through three sweep points.
pub fn fit_inverse_t(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() != 3 {
        return Err(Error::InvalidParameter("need exactly three points".into()));
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| points[i].0.powi(-(j as i32 + 1)));
    let y = nalgebra::Vector3::from_fn(|i, _| points[i].1 - 1.0);
    let c = m.lu().solve(&y).ok_or_else(|| Error::InvalidParameter("singular fit".into()))?;
    Ok(c[0])
}
