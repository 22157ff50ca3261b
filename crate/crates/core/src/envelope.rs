//! Upper concave envelopes of tabulated functions by linear programming.
//!
//! The envelope of `f` at `q` is `max Σ w_j f(p_j)` over weights `w ≥ 0`
//! with `Σ w_j = 1` and `Σ w_j p_j = q`. The LP has one row per coordinate
//! plus the mass row, so at most `dim + 1` points carry weight. It is solved by
//! a revised simplex method whose pricing scans every tabulated point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_PIVOTS: usize = 20_000;
/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub point: Vec<f64>,
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub value: f64,
    pub support: Vec<Support>,
    pub pivots: usize,
}

fn column(p: &[f64]) -> DVector<f64> {
    let m = p.len() + 1;
    DVector::from_fn(m, |i, _| if i < p.len() { p[i] } else { 1.0 })
}

/// Envelope value at `query` of the function taking `values[j]` at
/// `points[j]` and `query_value` at `query`. Points with non-finite values are
/// ignored. Supports 1 and 2 coordinates.
pub fn concave_envelope_at(
    points: &[Vec<f64>],
    values: &[f64],
    query: &[f64],
    query_value: f64,
) -> Result<Envelope> {
    let dim = query.len();
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidParameter(format!("envelope dimension {dim} not supported")));
    }
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch(points.len(), values.len()));
    }
    if !query_value.is_finite() {
        return Err(Error::InvalidParameter("function is not finite at the query point".into()));
    }
    let mut cols: Vec<&[f64]> = vec![query];
    let mut costs = vec![query_value];
    for (p, &v) in points.iter().zip(values) {
        if p.len() != dim {
            return Err(Error::DimensionMismatch(p.len(), dim));
        }
        if v.is_finite() {
            cols.push(p);
            costs.push(v);
        }
    }
    let m = dim + 1;
    let rhs = column(query);

    // Degenerate start: the query point at weight one plus `dim` points that
    // make the basis nonsingular.
    let mut basis = vec![0usize];
    let far = (1..cols.len())
        .max_by(|&a, &b| dist2(cols[a], query).total_cmp(&dist2(cols[b], query)))
        .ok_or_else(|| Error::InvalidParameter("no finite tabulated values".into()))?;
    if dist2(cols[far], query) == 0.0 {
        return Err(Error::InvalidParameter("tabulation does not span the query".into()));
    }
    basis.push(far);
    if dim == 2 {
        let d1 = [cols[far][0] - query[0], cols[far][1] - query[1]];
        let cross = |j: usize| ((cols[j][0] - query[0]) * d1[1] - (cols[j][1] - query[1]) * d1[0]).abs();
        let third = (1..cols.len()).max_by(|&a, &b| cross(a).total_cmp(&cross(b))).expect("nonempty");
        if cross(third) <= 1e-12 * dist2(cols[far], query) {
            return Err(Error::InvalidParameter("tabulation is collinear".into()));
        }
        basis.push(third);
    }

    let scale = costs.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-11 * scale;
    let mut degenerate_run = 0;
    let mut pivots = 0;
    loop {
        let bmat = DMatrix::from_fn(m, m, |i, k| column(cols[basis[k]])[i]);
        let lu = bmat.clone().lu();
        let x = lu.solve(&rhs).ok_or_else(|| Error::InvalidParameter("singular basis".into()))?;
        let cb = DVector::from_iterator(m, basis.iter().map(|&j| costs[j]));
        let y = bmat
            .transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| Error::InvalidParameter("singular basis".into()))?;
        let reduced = |j: usize| {
            let p = cols[j];
            let mut s = y[dim];
            for i in 0..dim {
                s += y[i] * p[i];
            }
            costs[j] - s
        };
        let bland = degenerate_run >= DEGENERATE_SWITCH;
        let mut entering = None;
        let mut best = tol;
        for j in 0..cols.len() {
            if basis.contains(&j) {
                continue;
            }
            let d = reduced(j);
            if d > best {
                entering = Some(j);
                if bland {
                    break;
                }
                best = d;
            }
        }
        let Some(e) = entering else {
            let support = basis
                .iter()
                .zip(x.iter())
                .filter(|(_, &w)| w > 1e-14)
                .map(|(&j, &w)| Support { point: cols[j].to_vec(), weight: w, value: costs[j] })
                .collect();
            let value = basis.iter().zip(x.iter()).map(|(&j, &w)| w * costs[j]).sum();
            return Ok(Envelope { value, support, pivots });
        };
        let dir = lu.solve(&column(cols[e])).ok_or_else(|| Error::InvalidParameter("singular basis".into()))?;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if dir[i] > 1e-12 {
                let ratio = x[i].max(0.0) / dir[i];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (li, ratio) = leave.ok_or_else(|| Error::InvalidParameter("unbounded envelope LP".into()))?;
        degenerate_run = if ratio <= 1e-15 { degenerate_run + 1 } else { 0 };
        basis[li] = e;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::InvalidParameter("envelope LP did not converge".into()));
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
