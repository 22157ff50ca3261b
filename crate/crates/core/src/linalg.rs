//! Symmetric positive-semidefinite matrices with a cyclic Jacobi eigensolver.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm at which Jacobi sweeps stop (relative to the
/// matrix norm when that exceeds one).
pub const JACOBI_TOL: f64 = 1e-12;

/// Eigenvalues sorted in decreasing order with matching unit eigenvectors as
/// columns. Each eigenvector's largest-magnitude entry is made positive so the
/// decomposition is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi diagonalization of a symmetric matrix.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> SymmetricEigen {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut c = v.column(i).clone_owned();
        let pivot = c.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            c = -c;
        }
        vectors.set_column(col, &c);
    }
    SymmetricEigen { values, vectors }
}

/// Real symmetric positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    entries: DMatrix<f64>,
}

impl PsdMatrix {
    /// Validates symmetry (1e-12 relative) and semidefiniteness; eigenvalues in
    /// `[-1e-10, 0)` are clamped to zero.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::DimensionMismatch(entries.nrows(), entries.ncols()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        let scale = entries.norm().max(1.0);
        if (&entries - entries.transpose()).norm() > 1e-12 * scale {
            return Err(Error::InvalidParameter("matrix is not symmetric".into()));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let eig = jacobi_eigen(&sym);
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::InvalidParameter(format!("matrix has negative eigenvalue {min}")));
        }
        if min < 0.0 {
            return Ok(Self::from_eigen(&eig.values.iter().map(|x| x.max(0.0)).collect::<Vec<_>>(), &eig.vectors));
        }
        Ok(Self { entries: sym })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(r.len(), n));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: DMatrix::identity(d, d) }
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::from_diagonal(&[x])
    }

    /// `Q diag(values) Qᵀ`.
    pub fn from_eigen(values: &[f64], vectors: &DMatrix<f64>) -> Self {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values));
        let m = vectors * d * vectors.transpose();
        Self { entries: (&m + m.transpose()) * 0.5 }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigen(&self) -> SymmetricEigen {
        jacobi_eigen(&self.entries)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `ln det`, `-inf` when singular.
    pub fn lndet(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
            .sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self { entries: &self.entries + &other.entries })
    }

    /// `self + s I` for `s ≥ 0`.
    pub fn shift(&self, s: f64) -> Self {
        let d = self.dim();
        Self { entries: &self.entries + DMatrix::<f64>::identity(d, d) * s }
    }

    pub fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Frobenius norm of `AB - BA`.
    pub fn commutator_norm(&self, other: &Self) -> Result<f64> {
        self.same_dim(other)?;
        let (a, b) = (&self.entries, &other.entries);
        Ok((a * b - b * a).norm())
    }

    /// Diagonal matrix of eigenvalues in decreasing order and the orthogonal
    /// `Q` with `Qᵀ M Q` equal to it.
    pub fn decreasing_alignment(&self) -> (Self, DMatrix<f64>) {
        let e = self.eigen();
        (Self::from_diagonal(&e.values).expect("eigenvalues are nonnegative"), e.vectors)
    }

    /// Increasing counterpart of [`PsdMatrix::decreasing_alignment`].
    pub fn increasing_alignment(&self) -> (Self, DMatrix<f64>) {
        let e = self.eigen();
        let n = self.dim();
        let values: Vec<f64> = e.values.iter().rev().cloned().collect();
        let mut q = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            q.set_column(i, &e.vectors.column(n - 1 - i));
        }
        (Self::from_diagonal(&values).expect("eigenvalues are nonnegative"), q)
    }

    /// `self ⪯ other` in the Loewner order, up to `tol`.
    pub fn loewner_le(&self, other: &Self, tol: f64) -> Result<bool> {
        self.same_dim(other)?;
        let diff = &other.entries - &self.entries;
        Ok(jacobi_eigen(&diff).values.last().copied().unwrap_or(0.0) >= -tol)
    }

    /// `Qᵀ M Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Self {
        let m = q.transpose() * &self.entries * q;
        Self { entries: (&m + m.transpose()) * 0.5 }
    }
}

/// Random PSD matrix `G Gᵀ · scale / d` with standard normal `G`.
pub fn random_psd<R: Rng>(rng: &mut R, d: usize, scale: f64) -> PsdMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| standard_normal(rng));
    PsdMatrix::new(&g * g.transpose() * (scale / d as f64)).expect("Gram matrices are PSD")
}

/// Random orthogonal matrix from the eigenvectors of a random symmetric matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| standard_normal(rng));
    jacobi_eigen(&(&g + g.transpose())).vectors
}

/// Box-Muller standard normal draw.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Real roots of the characteristic cubic by the trigonometric method.
    fn cubic_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
        let c2 = a.trace();
        let c1 = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)] + a[(0, 0)] * a[(2, 2)] - a[(0, 2)] * a[(2, 0)]
            + a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)];
        let c0 = a.determinant();
        // λ³ - c2 λ² + c1 λ - c0 = 0, shift λ = y + c2/3
        let p = c1 - c2 * c2 / 3.0;
        let q = -2.0 * c2.powi(3) / 27.0 + c2 * c1 / 3.0 - c0;
        let r = (-p / 3.0).sqrt();
        let arg = (-q / (2.0 * r.powi(3))).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut roots: Vec<f64> = (0..3)
            .map(|k| 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + c2 / 3.0)
            .collect();
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn alignment_of_diagonal() {
        let m = PsdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
        let (d, _) = m.decreasing_alignment();
        assert_eq!(d, PsdMatrix::from_diagonal(&[3.0, 1.0]).unwrap());
        let (d2, _) = d.decreasing_alignment();
        assert_eq!(d2, d);
        let (i, _) = m.increasing_alignment();
        assert_eq!(i, m);
    }

    #[test]
    fn eigenvalues_match_cubic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_psd(&mut rng, 3, 2.0);
            let (d, q) = m.decreasing_alignment();
            let roots = cubic_eigenvalues(m.matrix());
            for (a, b) in d.eigenvalues().iter().zip(&roots) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            let back = m.conjugate(&q);
            assert!((back.matrix() - d.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_invalid_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(PsdMatrix::new(asym).is_err());
        assert!(PsdMatrix::from_diagonal(&[1.0, -0.1]).is_err());
        let clamped = PsdMatrix::from_diagonal(&[1.0, -1e-12]).unwrap();
        assert!(clamped.eigenvalues()[1] >= 0.0);
        assert!(PsdMatrix::identity(2).add(&PsdMatrix::identity(3)).is_err());
    }

    #[test]
    fn lndet_values() {
        let m = PsdMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        assert!((m.lndet() - 6f64.ln()).abs() < 1e-14);
        assert_eq!(PsdMatrix::from_diagonal(&[0.0, 1.0]).unwrap().lndet(), f64::NEG_INFINITY);
    }
}
