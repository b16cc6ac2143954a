//! Catalog of fully nonlinear operators `F(x, t, r, p, M)` and a sampling
//! verifier of the uniform parabolicity structure condition.
//!
//! Every operator is split into a principal part acting on the Hessian
//! (possibly through the direction of the gradient) and a lower-order part
//! `first_order(p) + c(x,t) r + f(x,t)`. The finite-difference solver relies
//! on that split to upwind the first-order term.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{eigenvalues, pucci_extremal, pucci_truncated, Ellipticity, Extremal, SymMat};

/// Slack allowed when comparing against control-matrix bands.
const BAND_TOL: f64 = 1e-10;
/// Gradients shorter than this count as zero for the normalized p-Laplacian.
const ZERO_GRADIENT: f64 = 1e-12;

/// A scalar coefficient `g(x, t)`. A bare number in JSON is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarField {
    Constant(f64),
    /// `offset + amplitude · cos(frequency · (Σ x_i + t))`
    Wave {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl Default for ScalarField {
    fn default() -> Self {
        ScalarField::Constant(0.0)
    }
}

impl ScalarField {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match *self {
            ScalarField::Constant(v) => v,
            ScalarField::Wave {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * (x.iter().sum::<f64>() + t)).cos(),
        }
    }

    /// Closed range of values the field can take.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            ScalarField::Constant(v) => (v, v),
            ScalarField::Wave {
                offset, amplitude, ..
            } => (offset - amplitude.abs(), offset + amplitude.abs()),
        }
    }

    fn is_finite(&self) -> bool {
        let (lo, hi) = self.range();
        lo.is_finite() && hi.is_finite()
    }
}

/// Shape of the first-order term, scaled by the coefficient `b(x, t) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientTerm {
    #[default]
    None,
    /// `+ b |p|` (the subsolution class bound)
    Plus,
    /// `- b |p|` (the supersolution class bound)
    Minus,
    /// `b · d·p` with a fixed direction `|d| ≤ 1`
    Drift(Vec<f64>),
}

impl GradientTerm {
    pub fn eval(&self, b: f64, p: &[f64]) -> f64 {
        match self {
            GradientTerm::None => 0.0,
            GradientTerm::Plus => b * norm(p),
            GradientTerm::Minus => -b * norm(p),
            GradientTerm::Drift(d) => b * dot(d, p),
        }
    }
}

/// Lower-order coefficients `b ≥ 0`, `c ≤ 0` and forcing `f`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientField {
    pub b: ScalarField,
    pub b_sup: Option<f64>,
    pub c: ScalarField,
    pub c_abs_sup: Option<f64>,
    pub f: ScalarField,
    pub gradient: GradientTerm,
}

/// Values of the coefficients at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub b: f64,
    pub c: f64,
    pub f: f64,
}

impl CoefficientField {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Declared bound on `b` (the upper end of its range when not declared).
    pub fn b_sup(&self) -> f64 {
        self.b_sup.unwrap_or_else(|| self.b.range().1.max(0.0))
    }

    /// Declared bound on `|c|`.
    pub fn c_abs_sup(&self) -> f64 {
        self.c_abs_sup.unwrap_or_else(|| (-self.c.range().0).max(0.0))
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.b.is_finite() && self.c.is_finite() && self.f.is_finite()) {
            return Err(Error::Operator("non-finite coefficient".into()));
        }
        let (b_lo, b_hi) = self.b.range();
        if b_lo < 0.0 || b_hi > self.b_sup() {
            return Err(Error::Operator(format!(
                "b ranges over [{b_lo}, {b_hi}], outside [0, {}]",
                self.b_sup()
            )));
        }
        let (c_lo, c_hi) = self.c.range();
        if c_hi > 0.0 || c_lo < -self.c_abs_sup() {
            return Err(Error::Operator(format!(
                "c ranges over [{c_lo}, {c_hi}], outside [-{}, 0]",
                self.c_abs_sup()
            )));
        }
        if let GradientTerm::Drift(d) = &self.gradient {
            if d.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: d.len(),
                });
            }
            if norm(d) > 1.0 + BAND_TOL {
                return Err(Error::Operator(format!(
                    "drift direction has length {} > 1",
                    norm(d)
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the coefficients, checking the declared bounds.
    pub fn sample(&self, x: &[f64], t: f64) -> Result<CoefficientSample> {
        let b = self.b.eval(x, t);
        let c = self.c.eval(x, t);
        let f = self.f.eval(x, t);
        if !(0.0..=self.b_sup() + BAND_TOL).contains(&b) {
            return Err(Error::CoefficientBound { name: "b", value: b, t });
        }
        if !(-self.c_abs_sup() - BAND_TOL..=0.0).contains(&c) {
            return Err(Error::CoefficientBound { name: "c", value: c, t });
        }
        Ok(CoefficientSample { b, c, f })
    }

    pub fn has_forcing(&self) -> bool {
        self.f != ScalarField::Constant(0.0)
    }
}

/// Behaviour of the normalized p-Laplacian where the gradient vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroGradient {
    #[default]
    Reject,
    /// Largest value over all gradient directions.
    Upper,
    /// Smallest value over all gradient directions.
    Lower,
    /// Plain Laplacian.
    Symmetric,
}

pub type PrincipalFn = Arc<dyn Fn(&SymMat) -> f64 + Send + Sync>;

/// Second-order part of an operator.
#[derive(Clone)]
pub enum Principal {
    Linear(SymMat),
    /// `max_α Tr(A_α M)`
    Bellman(Vec<SymMat>),
    /// `max_β min_α Tr(A_{α,β} M)`, indexed `[β][α]`
    Isaacs(Vec<Vec<SymMat>>),
    Pucci(Extremal),
    TruncatedPucci { sign: Extremal, k: usize },
    /// `Tr(M) + (p - 2) (M p̂)·p̂`
    NormalizedPLaplacian { p: f64, zero_gradient: ZeroGradient },
    /// `Σ arctan e_i(M)`, parabolic on eigenvalues in `[-eig_bound, eig_bound]`
    /// with `Σ arctan e_i ≥ (n-2)π/2 + theta0`.
    LagrangianMcf { theta0: f64, eig_bound: f64 },
    /// Arbitrary Hessian-only operator (tests, counterexamples).
    Custom { name: String, f: PrincipalFn },
}

impl fmt::Debug for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Principal::Linear(a) => f.debug_tuple("Linear").field(a).finish(),
            Principal::Bellman(c) => f.debug_tuple("Bellman").field(&c.len()).finish(),
            Principal::Isaacs(c) => f.debug_tuple("Isaacs").field(&c.len()).finish(),
            Principal::Pucci(s) => f.debug_tuple("Pucci").field(s).finish(),
            Principal::TruncatedPucci { sign, k } => f
                .debug_struct("TruncatedPucci")
                .field("sign", sign)
                .field("k", k)
                .finish(),
            Principal::NormalizedPLaplacian { p, zero_gradient } => f
                .debug_struct("NormalizedPLaplacian")
                .field("p", p)
                .field("zero_gradient", zero_gradient)
                .finish(),
            Principal::LagrangianMcf { theta0, eig_bound } => f
                .debug_struct("LagrangianMcf")
                .field("theta0", theta0)
                .field("eig_bound", eig_bound)
                .finish(),
            Principal::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// How the operator depends on the gradient slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientDependence {
    /// Only through the Lipschitz first-order term.
    Lipschitz,
    /// Principal part depends on the direction of `p` (normalized p-Laplacian).
    Direction,
}

/// A validated operator.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    dim: usize,
    principal: Principal,
    ellipticity: Ellipticity,
    coeffs: CoefficientField,
}

fn check_band(index: usize, a: &SymMat, ell: Ellipticity, dim: usize) -> Result<()> {
    if a.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: a.dim(),
        });
    }
    let eig = eigenvalues(a)?;
    if eig.min() < ell.lower() - BAND_TOL || eig.max() > ell.upper() + BAND_TOL {
        return Err(Error::ControlOutsideBand {
            index,
            min: eig.min(),
            max: eig.max(),
            lower: ell.lower(),
            upper: ell.upper(),
        });
    }
    Ok(())
}

impl OperatorSpec {
    /// Validates the principal part against the ellipticity band and the
    /// coefficients against their bounds.
    pub fn new(
        dim: usize,
        principal: Principal,
        ellipticity: Ellipticity,
        coeffs: CoefficientField,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        coeffs.validate(dim)?;
        match &principal {
            Principal::Linear(a) => check_band(0, a, ellipticity, dim)?,
            Principal::Bellman(list) => {
                if list.is_empty() {
                    return Err(Error::Operator("empty control set".into()));
                }
                for (i, a) in list.iter().enumerate() {
                    check_band(i, a, ellipticity, dim)?;
                }
            }
            Principal::Isaacs(grid) => {
                if grid.is_empty() || grid.iter().any(Vec::is_empty) {
                    return Err(Error::Operator("empty control set".into()));
                }
                for (i, a) in grid.iter().flatten().enumerate() {
                    check_band(i, a, ellipticity, dim)?;
                }
            }
            Principal::Pucci(_) | Principal::Custom { .. } => {}
            Principal::TruncatedPucci { k, .. } => {
                if *k == 0 || *k >= dim {
                    return Err(Error::Truncation { k: *k, n: dim - 1 });
                }
            }
            Principal::NormalizedPLaplacian { p, .. } => {
                if !(*p > 1.0 && p.is_finite()) {
                    return Err(Error::Operator(format!("p-Laplacian exponent {p} must exceed 1")));
                }
            }
            Principal::LagrangianMcf { theta0, eig_bound } => {
                if !(*theta0 > 0.0 && *eig_bound > 0.0) {
                    return Err(Error::Operator("need theta0 > 0 and eig_bound > 0".into()));
                }
            }
        }
        Ok(Self {
            dim,
            principal,
            ellipticity,
            coeffs,
        })
    }

    pub fn pucci(sign: Extremal, dim: usize, ellipticity: Ellipticity) -> Self {
        Self::new(dim, Principal::Pucci(sign), ellipticity, CoefficientField::zero())
            .expect("Pucci operators are always valid")
    }

    /// Normalized p-Laplacian with its natural constants `(min(1,p-1), max(1,p-1))`.
    pub fn normalized_p_laplacian(dim: usize, p: f64, zero_gradient: ZeroGradient) -> Result<Self> {
        let ell = Ellipticity::new((p - 1.0).min(1.0), (p - 1.0).max(1.0))
            .map_err(|_| Error::Operator(format!("p-Laplacian exponent {p} must exceed 1")))?;
        Self::new(
            dim,
            Principal::NormalizedPLaplacian { p, zero_gradient },
            ell,
            CoefficientField::zero(),
        )
    }

    /// Lagrangian mean curvature potential operator with the effective
    /// constants `(1/(1+E²), 1)` of `arctan'` on `[-E, E]`.
    pub fn lagrangian_mcf(dim: usize, theta0: f64, eig_bound: f64) -> Result<Self> {
        let ell = Ellipticity::new(1.0 / (1.0 + eig_bound * eig_bound), 1.0)?;
        Self::new(
            dim,
            Principal::LagrangianMcf { theta0, eig_bound },
            ell,
            CoefficientField::zero(),
        )
    }

    pub fn with_coefficients(mut self, coeffs: CoefficientField) -> Result<Self> {
        coeffs.validate(self.dim)?;
        self.coeffs = coeffs;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn principal(&self) -> &Principal {
        &self.principal
    }

    pub fn ellipticity(&self) -> Ellipticity {
        self.ellipticity
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coeffs
    }

    pub fn gradient_dependence(&self) -> GradientDependence {
        match self.principal {
            Principal::NormalizedPLaplacian { .. } => GradientDependence::Direction,
            _ => GradientDependence::Lipschitz,
        }
    }

    /// Whether the Hessian lies where the operator's constants are valid.
    pub fn hessian_admissible(&self, m: &SymMat) -> Result<bool> {
        match self.principal {
            Principal::LagrangianMcf { theta0, eig_bound } => {
                let eig = eigenvalues(m)?;
                let phase: f64 = eig.values.iter().map(|e| e.atan()).sum();
                Ok(eig.min() >= -eig_bound
                    && eig.max() <= eig_bound
                    && phase >= (self.dim as f64 - 2.0) * FRAC_PI_2 + theta0)
            }
            _ => Ok(true),
        }
    }

    /// Principal part at gradient `p` and Hessian `m`.
    pub fn eval_principal(&self, p: &[f64], m: &SymMat) -> Result<f64> {
        if m.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: m.dim(),
            });
        }
        let ell = self.ellipticity;
        match &self.principal {
            Principal::Linear(a) => Ok(a.frobenius_dot(m)),
            Principal::Bellman(list) => Ok(list
                .iter()
                .map(|a| a.frobenius_dot(m))
                .fold(f64::NEG_INFINITY, f64::max)),
            Principal::Isaacs(grid) => Ok(grid
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|a| a.frobenius_dot(m))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max)),
            Principal::Pucci(sign) => pucci_extremal(*sign, ell, m),
            Principal::TruncatedPucci { sign, k } => pucci_truncated(*sign, ell, *k, m),
            Principal::NormalizedPLaplacian { p: expo, zero_gradient } => {
                let len = norm(p);
                let weight = expo - 2.0;
                if len > ZERO_GRADIENT {
                    let unit: Vec<f64> = p.iter().map(|v| v / len).collect();
                    return Ok(m.trace() + weight * m.quad_form(&unit));
                }
                match zero_gradient {
                    ZeroGradient::Reject => Err(Error::ZeroGradient),
                    ZeroGradient::Symmetric => Ok(m.trace()),
                    ZeroGradient::Upper | ZeroGradient::Lower => {
                        let eig = eigenvalues(m)?;
                        let (a, b) = (weight * eig.min(), weight * eig.max());
                        let pick = if *zero_gradient == ZeroGradient::Upper {
                            a.max(b)
                        } else {
                            a.min(b)
                        };
                        Ok(m.trace() + pick)
                    }
                }
            }
            Principal::LagrangianMcf { .. } => {
                Ok(eigenvalues(m)?.values.iter().map(|e| e.atan()).sum())
            }
            Principal::Custom { f, .. } => Ok(f(m)),
        }
    }

    /// Full operator `F(x, t, r, p, M)`.
    pub fn eval(&self, x: &[f64], t: f64, r: f64, p: &[f64], m: &SymMat) -> Result<f64> {
        if p.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: p.len(),
            });
        }
        let k = self.coeffs.sample(x, t)?;
        let principal = self.eval_principal(p, m)?;
        Ok(principal + self.coeffs.gradient.eval(k.b, p) + k.c * r + k.f)
    }
}

/// Free-function form of [`OperatorSpec::eval`].
pub fn eval_operator(
    spec: &OperatorSpec,
    x: &[f64],
    t: f64,
    r: f64,
    p: &[f64],
    m: &SymMat,
) -> Result<f64> {
    spec.eval(x, t, r, p, m)
}

/// Names accepted in operator descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Linear,
    Bellman,
    Isaacs,
    PucciPlus,
    PucciMinus,
    TruncatedPucci,
    NormalizedPLaplacian,
    LagrangianMcf,
}

/// Configuration record describing an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDescriptor {
    pub kind: OperatorKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub big_lambda: Option<f64>,
    /// Linear: one matrix. Bellman: the control list.
    #[serde(default)]
    pub matrices: Option<Vec<SymMat>>,
    /// Isaacs: `[β][α]` grid.
    #[serde(default)]
    pub control_grid: Option<Vec<Vec<SymMat>>>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub sign: Option<Extremal>,
    #[serde(default)]
    pub zero_gradient: Option<ZeroGradient>,
    #[serde(default)]
    pub theta0: Option<f64>,
    #[serde(default)]
    pub eig_bound: Option<f64>,
    #[serde(default)]
    pub coefficients: CoefficientField,
}

fn default_dim() -> usize {
    2
}

impl OperatorDescriptor {
    pub fn new(kind: OperatorKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            lambda: None,
            big_lambda: None,
            matrices: None,
            control_grid: None,
            p: None,
            k: None,
            sign: None,
            zero_gradient: None,
            theta0: None,
            eig_bound: None,
            coefficients: CoefficientField::zero(),
        }
    }

    pub fn with_band(mut self, lambda: f64, big_lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self.big_lambda = Some(big_lambda);
        self
    }

    fn band(&self) -> Result<Ellipticity> {
        match (self.lambda, self.big_lambda) {
            (Some(l), Some(u)) => Ellipticity::new(l, u),
            _ => Err(Error::Operator(format!(
                "{:?} requires lambda and big_lambda",
                self.kind
            ))),
        }
    }
}

fn missing(kind: OperatorKind, field: &str) -> Error {
    Error::Operator(format!("{kind:?} requires `{field}`"))
}

/// Builds and validates an operator from its descriptor.
pub fn make_operator(d: &OperatorDescriptor) -> Result<OperatorSpec> {
    let dim = d.dim;
    let spec = match d.kind {
        OperatorKind::Linear => {
            let mats = d.matrices.as_ref().ok_or_else(|| missing(d.kind, "matrices"))?;
            if mats.len() != 1 {
                return Err(Error::Operator("linear operator takes exactly one matrix".into()));
            }
            OperatorSpec::new(dim, Principal::Linear(mats[0].clone()), d.band()?, CoefficientField::zero())?
        }
        OperatorKind::Bellman => {
            let mats = d.matrices.as_ref().ok_or_else(|| missing(d.kind, "matrices"))?;
            OperatorSpec::new(dim, Principal::Bellman(mats.clone()), d.band()?, CoefficientField::zero())?
        }
        OperatorKind::Isaacs => {
            let grid = d
                .control_grid
                .as_ref()
                .ok_or_else(|| missing(d.kind, "control_grid"))?;
            OperatorSpec::new(dim, Principal::Isaacs(grid.clone()), d.band()?, CoefficientField::zero())?
        }
        OperatorKind::PucciPlus => OperatorSpec::pucci(Extremal::Plus, dim, d.band()?),
        OperatorKind::PucciMinus => OperatorSpec::pucci(Extremal::Minus, dim, d.band()?),
        OperatorKind::TruncatedPucci => {
            let k = d.k.ok_or_else(|| missing(d.kind, "k"))?;
            OperatorSpec::new(
                dim,
                Principal::TruncatedPucci {
                    sign: d.sign.unwrap_or(Extremal::Minus),
                    k,
                },
                d.band()?,
                CoefficientField::zero(),
            )?
        }
        OperatorKind::NormalizedPLaplacian => {
            let p = d.p.ok_or_else(|| missing(d.kind, "p"))?;
            OperatorSpec::normalized_p_laplacian(dim, p, d.zero_gradient.unwrap_or_default())?
        }
        OperatorKind::LagrangianMcf => OperatorSpec::lagrangian_mcf(
            dim,
            d.theta0.ok_or_else(|| missing(d.kind, "theta0"))?,
            d.eig_bound.ok_or_else(|| missing(d.kind, "eig_bound"))?,
        )?,
    };
    spec.with_coefficients(d.coefficients.clone())
}

/// One draw of the quantified variables of the structure condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureSample {
    pub x: Vec<f64>,
    pub t: f64,
    pub r: f64,
    pub s: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub m: SymMat,
    /// Positive semidefinite increment, built as `GᵀG`.
    pub n: SymMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub samples_checked: usize,
    /// `min (F(M+N) - F(M)) - lower bound`
    pub worst_lower_margin: f64,
    /// `min upper bound - (F(M+N) - F(M))`
    pub worst_upper_margin: f64,
    pub violations: Vec<StructureSample>,
}

impl StructureReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-half..=half)).collect()
}

/// Random orthogonal matrix by Gram-Schmidt on a uniform draw.
pub fn random_rotation(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    loop {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            for u in &rows {
                let proj = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
            }
            let len = norm(&v);
            if len < 1e-3 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|a| *a /= len);
            rows.push(v);
        }
        if ok {
            return rows;
        }
    }
}

fn draw_sample(spec: &OperatorSpec, rng: &mut ChaCha8Rng, scale: f64) -> Result<StructureSample> {
    let n = spec.dim;
    let x = uniform_vec(rng, n, 1.0);
    let t = rng.gen_range(0.0..=1.0);
    let r = rng.gen_range(-scale..=scale);
    let s = rng.gen_range(-scale..=scale);
    let p = loop {
        let p = uniform_vec(rng, n, scale);
        if spec.gradient_dependence() == GradientDependence::Lipschitz || norm(&p) > 1e-6 * scale {
            break p;
        }
    };
    let q = match spec.gradient_dependence() {
        // the class membership only pairs increments at a common gradient
        GradientDependence::Direction => p.clone(),
        GradientDependence::Lipschitz => uniform_vec(rng, n, scale),
    };
    let g_half = scale.sqrt();

    if let Principal::LagrangianMcf { eig_bound, .. } = spec.principal {
        for _ in 0..10_000 {
            let rot = random_rotation(rng, n);
            let e = uniform_vec(rng, n, eig_bound);
            let m = SymMat::from_diag(&e).congruence(&rot);
            if !spec.hessian_admissible(&m)? {
                continue;
            }
            let g: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, n, g_half)).collect();
            let mut inc = SymMat::gram(&g);
            for _ in 0..60 {
                if spec.hessian_admissible(&(&m + &inc))? {
                    return Ok(StructureSample { x, t, r, s, p, q, m, n: inc });
                }
                inc = &inc * 0.5;
            }
        }
        return Err(Error::Operator("could not sample the admissible branch".into()));
    }

    let m = SymMat::from_fn(n, |_, _| rng.gen_range(-scale..=scale));
    let g: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, n, g_half)).collect();
    let inc = SymMat::gram(&g);
    Ok(StructureSample { x, t, r, s, p, q, m, n: inc })
}

/// Margins `(lower, upper)` of one sample, and whether both are within tolerance.
fn structure_margins(spec: &OperatorSpec, smp: &StructureSample) -> Result<(f64, f64, bool)> {
    let k = spec.coeffs.sample(&smp.x, smp.t)?;
    let ell = spec.ellipticity;
    let top = spec.eval(&smp.x, smp.t, smp.r, &smp.p, &(&smp.m + &smp.n))?;
    let base = spec.eval(&smp.x, smp.t, smp.s, &smp.q, &smp.m)?;
    let diff = top - base;
    let tr = smp.n.trace();
    let dp: Vec<f64> = smp.p.iter().zip(&smp.q).map(|(a, b)| a - b).collect();
    let slack = k.b * norm(&dp);
    let zeroth = k.c * (smp.r - smp.s);
    let lower = ell.lower() * tr - slack + zeroth;
    let upper = ell.upper() * tr + slack + zeroth;
    let lo_margin = diff - lower;
    let hi_margin = upper - diff;
    let tol = 1e-9 * (1.0 + diff.abs() + lower.abs().max(upper.abs()));
    Ok((lo_margin, hi_margin, lo_margin >= -tol && hi_margin >= -tol))
}

/// Samples the structure condition
/// `λ Tr N - b|p-q| + c(r-s) ≤ F(r,p,M+N) - F(s,q,M) ≤ Λ Tr N + b|p-q| + c(r-s)`.
/// Deterministic for a given seed.
pub fn check_structure_condition(
    spec: &OperatorSpec,
    n_samples: usize,
    scale: f64,
    seed: u64,
) -> Result<StructureReport> {
    if n_samples == 0 || !(scale > 0.0) {
        return Err(Error::Operator("need n_samples >= 1 and scale > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|_| draw_sample(spec, &mut rng, scale))
        .collect::<Result<Vec<_>>>()?;
    let checked = samples
        .par_iter()
        .map(|smp| structure_margins(spec, smp))
        .collect::<Result<Vec<_>>>()?;

    let mut report = StructureReport {
        samples_checked: n_samples,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        violations: Vec::new(),
    };
    for (smp, (lo, hi, ok)) in samples.into_iter().zip(checked) {
        report.worst_lower_margin = report.worst_lower_margin.min(lo);
        report.worst_upper_margin = report.worst_upper_margin.min(hi);
        if !ok {
            report.violations.push(smp);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(l: f64, u: f64) -> Ellipticity {
        Ellipticity::new(l, u).unwrap()
    }

    #[test]
    fn bellman_single_control_is_trace() {
        let spec = OperatorSpec::new(
            2,
            Principal::Bellman(vec![SymMat::identity(2)]),
            band(1.0, 1.0),
            CoefficientField::zero(),
        )
        .unwrap();
        let v = spec
            .eval(&[0.0, 0.0], 0.0, 0.0, &[0.0, 0.0], &SymMat::from_diag(&[2.0, 3.0]))
            .unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn p_laplacian_at_p_two_is_laplacian() {
        let spec = OperatorSpec::normalized_p_laplacian(2, 2.0, ZeroGradient::Reject).unwrap();
        let m = SymMat::from_rows(&[vec![1.0, 0.4], vec![0.4, -3.0]]).unwrap();
        let v = spec.eval(&[0.0, 0.0], 0.0, 0.0, &[0.6, 0.8], &m).unwrap();
        assert!((v - m.trace()).abs() < 1e-15);
    }

    #[test]
    fn p_laplacian_zero_gradient_modes() {
        let m = SymMat::from_diag(&[1.0, -2.0]);
        let zero = [0.0, 0.0];
        let rej = OperatorSpec::normalized_p_laplacian(2, 3.0, ZeroGradient::Reject).unwrap();
        assert_eq!(rej.eval(&zero, 0.0, 0.0, &zero, &m), Err(Error::ZeroGradient));
        let sym = OperatorSpec::normalized_p_laplacian(2, 3.0, ZeroGradient::Symmetric).unwrap();
        assert_eq!(sym.eval(&zero, 0.0, 0.0, &zero, &m).unwrap(), -1.0);
        let up = OperatorSpec::normalized_p_laplacian(2, 3.0, ZeroGradient::Upper).unwrap();
        assert_eq!(up.eval(&zero, 0.0, 0.0, &zero, &m).unwrap(), 0.0);
        let lo = OperatorSpec::normalized_p_laplacian(2, 3.0, ZeroGradient::Lower).unwrap();
        assert_eq!(lo.eval(&zero, 0.0, 0.0, &zero, &m).unwrap(), -3.0);
    }

    #[test]
    fn mcf_on_scalar_matrix() {
        let spec = OperatorSpec::lagrangian_mcf(3, 0.1, 5.0).unwrap();
        let m = &SymMat::identity(3) * 0.7;
        let v = spec.eval(&[0.0; 3], 0.0, 0.0, &[0.0; 3], &m).unwrap();
        // oracle: spectrum from the eigen solver
        let eig = eigenvalues(&m).unwrap();
        let oracle: f64 = eig.values.iter().map(|e| e.atan()).sum();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 3.0 * 0.7f64.atan()).abs() < 1e-14);
        assert_eq!(spec.ellipticity().lower(), 1.0 / 26.0);
    }

    #[test]
    fn descriptor_construction() {
        let d = OperatorDescriptor::new(OperatorKind::PucciPlus, 2).with_band(1.0, 2.0);
        let spec = make_operator(&d).unwrap();
        let m = SymMat::from_diag(&[1.0, -1.0]);
        assert_eq!(spec.eval_principal(&[0.0, 0.0], &m).unwrap(), 1.0);

        let mut d = OperatorDescriptor::new(OperatorKind::Bellman, 2).with_band(1.0, 2.0);
        d.matrices = Some(vec![SymMat::identity(2), SymMat::from_diag(&[1.0, 2.0])]);
        assert!(make_operator(&d).is_ok());

        d.matrices = Some(vec![SymMat::from_diag(&[3.0, 1.0])]);
        assert!(matches!(make_operator(&d), Err(Error::ControlOutsideBand { .. })));

        let mut d = OperatorDescriptor::new(OperatorKind::NormalizedPLaplacian, 2);
        d.p = Some(1.0);
        assert!(make_operator(&d).is_err());

        let mut d = OperatorDescriptor::new(OperatorKind::TruncatedPucci, 2).with_band(1.0, 1.0);
        d.k = Some(2);
        assert!(matches!(make_operator(&d), Err(Error::Truncation { .. })));
        d.k = Some(1);
        assert!(make_operator(&d).is_ok());

        let d = OperatorDescriptor::new(OperatorKind::Bellman, 2).with_band(1.0, 2.0);
        assert!(make_operator(&d).is_err());
    }

    #[test]
    fn descriptor_json_rejects_unknown_keys() {
        let ok: OperatorDescriptor =
            serde_json::from_str(r#"{"kind":"pucci_plus","lambda":1,"big_lambda":2}"#).unwrap();
        assert_eq!(ok.dim, 2);
        let bad = serde_json::from_str::<OperatorDescriptor>(
            r#"{"kind":"pucci_plus","lambda":1,"big_lambda":2,"bogus":1}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn coefficient_bounds_are_enforced() {
        let coeffs = CoefficientField {
            c: ScalarField::Wave {
                offset: -1.0,
                amplitude: 0.5,
                frequency: 3.0,
            },
            ..CoefficientField::zero()
        };
        assert_eq!(coeffs.c_abs_sup(), 1.5);
        assert!(coeffs.validate(2).is_ok());
        let bad = CoefficientField {
            c: ScalarField::Constant(0.5),
            ..CoefficientField::zero()
        };
        assert!(bad.validate(2).is_err());
        let declared_too_small = CoefficientField {
            b: ScalarField::Constant(2.0),
            b_sup: Some(1.0),
            ..CoefficientField::zero()
        };
        assert!(declared_too_small.validate(2).is_err());
    }

    #[test]
    fn linear_midpoint_structure_margins() {
        let (l, u) = (1.0, 3.0);
        let spec = OperatorSpec::new(
            2,
            Principal::Linear(&SymMat::identity(2) * ((l + u) / 2.0)),
            band(l, u),
            CoefficientField::zero(),
        )
        .unwrap();
        let report = check_structure_condition(&spec, 500, 5.0, 11).unwrap();
        assert!(report.pass());
        // F(M+N) - F(M) = 2 Tr N, so both margins equal (Λ-λ)/2 · Tr N >= 0
        assert!(report.worst_lower_margin >= 0.0);
        assert!(report.worst_upper_margin >= 0.0);
    }

    #[test]
    fn cubic_trace_fails_structure() {
        let spec = OperatorSpec::new(
            2,
            Principal::Custom {
                name: "trace cubed".into(),
                f: Arc::new(|m: &SymMat| m.trace().powi(3)),
            },
            band(1.0, 1.0),
            CoefficientField::zero(),
        )
        .unwrap();
        let report = check_structure_condition(&spec, 1000, 10.0, 3).unwrap();
        assert!(!report.pass());
    }

    #[test]
    fn truncated_pucci_is_degenerate() {
        let spec = OperatorSpec::new(
            2,
            Principal::TruncatedPucci {
                sign: Extremal::Minus,
                k: 1,
            },
            band(1.0, 1.0),
            CoefficientField::zero(),
        )
        .unwrap();
        let report = check_structure_condition(&spec, 1000, 1.0, 5).unwrap();
        assert!(report.worst_lower_margin < 0.0);
    }

    #[test]
    fn structure_check_is_deterministic() {
        let spec = OperatorSpec::normalized_p_laplacian(2, 3.0, ZeroGradient::Reject).unwrap();
        let a = check_structure_condition(&spec, 200, 2.0, 9).unwrap();
        let b = check_structure_condition(&spec, 200, 2.0, 9).unwrap();
        assert_eq!(a, b);
    }
}
