//! Value syntaxes for sweep flags.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

/// A list of values given as `lo:hi:step` (inclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.len() {
            1 => s.split(',').map(number).collect::<Result<_, _>>().map(Grid),
            3 => {
                let (lo, hi, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
                if !(step > 0.0) || hi < lo {
                    return Err(format!("range {s:?} needs lo ≤ hi and step > 0"));
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                if n > 1_000_000 {
                    return Err(format!("range {s:?} has too many points"));
                }
                // Round away the accumulated binary noise of lo + i·step.
                Ok(Grid((0..n).map(|i| format!("{:.12e}", lo + i as f64 * step).parse().unwrap()).collect()))
            }
            _ => Err(format!("expected lo:hi:step or a comma list, got {s:?}")),
        }
    }
}

/// Hermite coefficients as `alpha:value` pairs, e.g. `1:0.5,3:-0.2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Coeffs(pub BTreeMap<u32, f64>);

impl FromStr for Coeffs {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for item in s.split(',').filter(|x| !x.trim().is_empty()) {
            let (a, v) = item.split_once(':').ok_or_else(|| format!("expected alpha:value, got {item:?}"))?;
            let alpha: u32 = a.trim().parse().map_err(|_| format!("bad order {a:?}"))?;
            if map.insert(alpha, number(v)?).is_some() {
                return Err(format!("order {alpha} given twice"));
            }
        }
        Ok(Coeffs(map))
    }
}

/// Square matrix with rows separated by `;` and entries by `,`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Matrix(pub Vec<Vec<f64>>);

impl FromStr for Matrix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let rows: Vec<Vec<f64>> = s
            .split(';')
            .map(|r| r.split(',').map(number).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(format!("matrix {s:?} is not square"));
        }
        Ok(Matrix(rows))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&s.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_inclusive_and_clean() {
        let g: Grid = "1.1:4:0.1".parse().unwrap();
        assert_eq!(g.0.len(), 30);
        assert_eq!(g.0[1], 1.2);
        assert_eq!(*g.0.last().unwrap(), 4.0);
        let g: Grid = "10:200:10".parse().unwrap();
        assert_eq!(g.0.len(), 20);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!("0.5,1,2".parse::<Grid>().unwrap().0, vec![0.5, 1.0, 2.0]);
        assert!("1:2".parse::<Grid>().is_err());
        assert!("2:1:0.1".parse::<Grid>().is_err());
        assert!("a,b".parse::<Grid>().is_err());
        assert!("1:2:0".parse::<Grid>().is_err());
    }

    #[test]
    fn coefficients_and_matrices() {
        let c: Coeffs = "1:0.5, 3:-0.25".parse().unwrap();
        assert_eq!(c.0[&3], -0.25);
        assert!("1:0.5,1:2".parse::<Coeffs>().is_err());
        let m: Matrix = "2,0;0,1.5".parse().unwrap();
        assert_eq!(m.0[1][1], 1.5);
        assert!("1,2;3".parse::<Matrix>().is_err());
    }
}
