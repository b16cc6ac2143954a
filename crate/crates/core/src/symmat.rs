//! Dense symmetric matrices, cyclic Jacobi eigenvalues and the Pucci extremal
//! operators (full and truncated).

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute off-diagonal tolerance of the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A real symmetric `n × n` matrix. Each off-diagonal entry is stored once
/// (packed upper triangle, row-major), so symmetry holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMat {
    n: usize,
    coeffs: Vec<f64>,
}

#[inline]
fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i hold i*n - i*(i-1)/2 entries
    i * n - i * i.saturating_sub(1) / 2 + j - i
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self {
            n,
            coeffs: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds the matrix reading `f(i, j)` for `i <= j` only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from full rows; rejects ragged, asymmetric or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !rows[i][j].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// `v ⊗ v`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    /// `Gᵀ G` for a row-major `rows × n` matrix `g`; positive semidefinite.
    pub fn gram(g: &[Vec<f64>]) -> Self {
        let n = g.first().map_or(0, Vec::len);
        Self::from_fn(n, |i, j| g.iter().map(|row| row[i] * row[j]).sum())
    }

    /// `R M Rᵀ` for a square row-major `r`.
    pub fn congruence(&self, r: &[Vec<f64>]) -> Self {
        let n = self.n;
        let full = self.to_rows();
        // tmp = R M
        let tmp: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| r[i][k] * full[k][j]).sum())
                    .collect()
            })
            .collect();
        Self::from_fn(n, |i, j| (0..n).map(|k| tmp[i][k] * r[j][k]).sum())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coeffs[packed(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed(self.n, i, j);
        self.coeffs[k] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mat_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `Tr(self · other)`.
    pub fn frobenius_dot(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            s += self.get(i, i) * other.get(i, i);
            for j in i + 1..self.n {
                s += 2.0 * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    fn zip_with(&self, other: &SymMat, f: impl Fn(f64, f64) -> f64) -> SymMat {
        assert_eq!(self.n, other.n, "dimension mismatch");
        SymMat {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for i in 0..self.n {
            for j in i..self.n {
                if !self.get(i, j).is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMat {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMat::from_rows(&rows)
    }
}

impl From<SymMat> for Vec<Vec<f64>> {
    fn from(m: SymMat) -> Self {
        m.to_rows()
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self * -1.0
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, t: f64) -> SymMat {
        SymMat {
            n: self.n,
            coeffs: self.coeffs.iter().map(|v| v * t).collect(),
        }
    }
}

/// Eigenvalues sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
}

impl EigenDecomp {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Eigenvalues of `m` by cyclic Jacobi rotations.
pub fn eigenvalues(m: &SymMat) -> Result<EigenDecomp> {
    m.check_finite()?;
    let n = m.dim();
    let mut a = m.to_rows();
    let scale = m.frobenius_norm();
    let tol = JACOBI_TOL.max(f64::EPSILON * scale);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                // rotation annihilating a[p][q]
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
            }
        }
    }

    let mut values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    values.sort_by(f64::total_cmp);
    Ok(EigenDecomp { values })
}

/// Ellipticity constants `0 < lower <= upper` (λ and Λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Ellipticity {
    lower: f64,
    upper: f64,
}

impl Ellipticity {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper >= lower && upper.is_finite()) {
            return Err(Error::Ellipticity { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Both constants multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.lower * factor, self.upper * factor)
    }
}

impl TryFrom<(f64, f64)> for Ellipticity {
    type Error = Error;
    fn try_from((l, u): (f64, f64)) -> Result<Self> {
        Self::new(l, u)
    }
}

impl From<Ellipticity> for (f64, f64) {
    fn from(e: Ellipticity) -> Self {
        (e.lower, e.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremal {
    Plus,
    Minus,
}

impl Extremal {
    /// Coefficients applied to (positive, negative) eigenvalues.
    #[inline]
    fn weights(self, ell: Ellipticity) -> (f64, f64) {
        match self {
            Extremal::Plus => (ell.upper, ell.lower),
            Extremal::Minus => (ell.lower, ell.upper),
        }
    }
}

fn zero_threshold(m: &SymMat) -> f64 {
    1e-12 * (1.0 + m.frobenius_norm())
}

fn weighted_sum(sign: Extremal, ell: Ellipticity, values: &[f64], zero: f64) -> f64 {
    let (pos, neg) = sign.weights(ell);
    values
        .iter()
        .map(|&e| {
            if e.abs() <= zero {
                0.0
            } else if e > 0.0 {
                pos * e
            } else {
                neg * e
            }
        })
        .sum()
}

/// Pucci extremal operator evaluated on a known spectrum.
pub fn pucci_from_eigenvalues(sign: Extremal, ell: Ellipticity, values: &[f64]) -> f64 {
    weighted_sum(sign, ell, values, 0.0)
}

/// `M⁺` (sup of `Tr(AM)` over `λI ≤ A ≤ ΛI`) or `M⁻` (the inf).
pub fn pucci_extremal(sign: Extremal, ell: Ellipticity, m: &SymMat) -> Result<f64> {
    let eig = eigenvalues(m)?;
    Ok(weighted_sum(sign, ell, &eig.values, zero_threshold(m)))
}

/// Truncated Pucci operator over `k` eigenvalues: the `k` smallest for
/// `Minus`, the `k` largest for `Plus`.
pub fn pucci_truncated(sign: Extremal, ell: Ellipticity, k: usize, m: &SymMat) -> Result<f64> {
    let n = m.dim();
    if k == 0 || k > n {
        return Err(Error::Truncation { k, n });
    }
    let eig = eigenvalues(m)?;
    let selected = match sign {
        Extremal::Minus => &eig.values[..k],
        Extremal::Plus => &eig.values[n - k..],
    };
    Ok(weighted_sum(sign, ell, selected, zero_threshold(m)))
}
