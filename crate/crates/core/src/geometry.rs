//! Parabolic cylinders, inclined cylinders and broken lines.
//!
//! An inclined cylinder `{|x - (x0 + η(t - t1))| < R, t1 < t < t2}` becomes
//! the upright cylinder `{|x̃ - x0| < R}` under `x̃ = x - η(t - t1)`; the
//! equation picks up the drift `+η·Du` in the new frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, SmoothField};
use crate::operators::{dot, norm};
use crate::symmat::{pucci_extremal, Ellipticity, Extremal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub center: Vec<f64>,
    pub radius: f64,
    pub t1: f64,
    pub t2: f64,
}

impl Cylinder {
    pub fn new(center: Vec<f64>, radius: f64, t1: f64, t2: f64) -> Result<Self> {
        let c = Self {
            center,
            radius,
            t1,
            t2,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.is_empty() {
            return Err(Error::Geometry("cylinder needs a center".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Geometry(format!("radius {} must be positive", self.radius)));
        }
        if !(self.t1 < self.t2) {
            return Err(Error::Geometry(format!("need t1 < t2, got {} >= {}", self.t1, self.t2)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Open cylinder membership.
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.t1 < t && t < self.t2 && distance(x, &self.center) < self.radius
    }

    /// Point of the open upper base `{|x - x0| < R, t = t2}`.
    pub fn on_upper_base(&self, x: &[f64], t: f64) -> bool {
        t == self.t2 && distance(x, &self.center) < self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclinedCylinder {
    pub base: Cylinder,
    /// Axis slope, space per unit time.
    pub drift: Vec<f64>,
}

impl InclinedCylinder {
    pub fn new(base: Cylinder, drift: Vec<f64>) -> Result<Self> {
        base.validate()?;
        if drift.len() != base.dim() {
            return Err(Error::Dimension {
                expected: base.dim(),
                got: drift.len(),
            });
        }
        Ok(Self { base, drift })
    }

    pub fn upright(base: Cylinder) -> Self {
        let drift = vec![0.0; base.dim()];
        Self { base, drift }
    }

    /// Axis position `x0 + η(t - t1)`.
    pub fn axis(&self, t: f64) -> Vec<f64> {
        let dt = t - self.base.t1;
        self.base
            .center
            .iter()
            .zip(&self.drift)
            .map(|(c, e)| c + e * dt)
            .collect()
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.base.t1 < t && t < self.base.t2 && distance(x, &self.axis(t)) < self.base.radius
    }

    /// `x̃ = x - η(t - t1)`.
    pub fn to_straight(&self, x: &[f64], t: f64) -> Vec<f64> {
        let dt = t - self.base.t1;
        x.iter().zip(&self.drift).map(|(a, e)| a - e * dt).collect()
    }

    /// `x = x̃ + η(t - t1)`.
    pub fn from_straight(&self, xs: &[f64], t: f64) -> Vec<f64> {
        let dt = t - self.base.t1;
        xs.iter().zip(&self.drift).map(|(a, e)| a + e * dt).collect()
    }
}

/// Straightens an inclined cylinder. Returns the upright cylinder and the
/// drift `η`; the transformed equation gains the transport term `+η·Du`.
pub fn tilt_transform(ic: &InclinedCylinder) -> (Cylinder, Vec<f64>) {
    (ic.base.clone(), ic.drift.clone())
}

/// `ũ(x̃, t) = u(x̃ + η(t - t1), t)`.
#[derive(Debug, Clone)]
pub struct Tilted<F> {
    pub field: F,
    pub drift: Vec<f64>,
    pub t1: f64,
}

impl<F: SmoothField> SmoothField for Tilted<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn jet(&self, xs: &[f64], t: f64) -> Jet {
        let dt = t - self.t1;
        let x: Vec<f64> = xs.iter().zip(&self.drift).map(|(a, e)| a + e * dt).collect();
        let mut j = self.field.jet(&x, t);
        j.time_derivative += dot(&self.drift, &j.gradient);
        j
    }
}

/// `M⁺(D²u) + b|Du| + η·Du + c u - u_t` for a jet; `drift = 0` gives the
/// untransformed subsolution-class operator.
pub fn pucci_class_residual(ell: Ellipticity, b: f64, c: f64, drift: &[f64], jet: &Jet) -> Result<f64> {
    Ok(pucci_extremal(Extremal::Plus, ell, &jet.hessian)? + b * norm(&jet.gradient)
        + dot(drift, &jet.gradient)
        + c * jet.value
        - jet.time_derivative)
}

/// Space-time polyline with strictly increasing times; the last vertex is
/// the upper end-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Vec<f64>, f64)>", into = "Vec<(Vec<f64>, f64)>")]
pub struct BrokenLine {
    vertices: Vec<(Vec<f64>, f64)>,
}

impl BrokenLine {
    pub fn new(vertices: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Geometry("broken line needs at least two vertices".into()));
        }
        let n = vertices[0].0.len();
        if n == 0 {
            return Err(Error::Geometry("zero-dimensional vertex".into()));
        }
        for w in vertices.windows(2) {
            if w[1].0.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: w[1].0.len(),
                });
            }
            if !(w[1].1 > w[0].1) {
                return Err(Error::Geometry(format!(
                    "segment times must increase strictly ({} -> {})",
                    w[0].1, w[1].1
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[(Vec<f64>, f64)] {
        &self.vertices
    }

    pub fn upper_end(&self) -> &(Vec<f64>, f64) {
        self.vertices.last().expect("at least two vertices")
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].0.len()
    }
}

impl TryFrom<Vec<(Vec<f64>, f64)>> for BrokenLine {
    type Error = Error;
    fn try_from(v: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BrokenLine> for Vec<(Vec<f64>, f64)> {
    fn from(l: BrokenLine) -> Self {
        l.vertices
    }
}

/// One inclined cylinder per segment of a broken line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderChain {
    pub segments: Vec<InclinedCylinder>,
}

impl CylinderChain {
    /// Consecutive axes meet: the end of segment `i` is the start of `i+1`.
    pub fn junctions_continuous(&self, tol: f64) -> bool {
        self.segments.windows(2).all(|w| {
            let end = w[0].axis(w[0].base.t2);
            w[0].base.t2 == w[1].base.t1 && distance(&end, &w[1].base.center) <= tol
        })
    }

    pub fn radius(&self) -> f64 {
        self.segments[0].base.radius
    }
}

/// Builds the chain at `radius`. When a `domain` is given, the chain is
/// sampled (`density` times per segment, axis and rim points) and the radius
/// is halved until every sample lies in the domain, at most 20 times.
pub fn cover_broken_line(
    line: &BrokenLine,
    radius: f64,
    domain: Option<&[InclinedCylinder]>,
    density: usize,
) -> Result<CylinderChain> {
    if !(radius > 0.0) {
        return Err(Error::Geometry(format!("radius {radius} must be positive")));
    }
    let mut r = radius;
    for _ in 0..=20 {
        let chain = build_chain(line, r)?;
        match domain {
            None => return Ok(chain),
            Some(dom) if chain_inside(&chain, dom, density.max(1)) => return Ok(chain),
            Some(_) => r *= 0.5,
        }
    }
    Err(Error::Geometry(format!(
        "no radius down to {r:e} keeps the chain inside the domain"
    )))
}

fn build_chain(line: &BrokenLine, radius: f64) -> Result<CylinderChain> {
    let segments = line
        .vertices
        .windows(2)
        .map(|w| {
            let ((xa, ta), (xb, tb)) = (&w[0], &w[1]);
            let dt = tb - ta;
            if !(dt > 0.0) {
                return Err(Error::Geometry("zero-duration segment".into()));
            }
            let drift = xa.iter().zip(xb).map(|(a, b)| (b - a) / dt).collect();
            InclinedCylinder::new(Cylinder::new(xa.clone(), radius, *ta, *tb)?, drift)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CylinderChain { segments })
}

fn chain_inside(chain: &CylinderChain, domain: &[InclinedCylinder], density: usize) -> bool {
    chain.segments.iter().all(|seg| {
        let n = seg.base.dim();
        (0..density).all(|k| {
            let t = seg.base.t1 + (seg.base.t2 - seg.base.t1) * (k as f64 + 0.5) / density as f64;
            let axis = seg.axis(t);
            if !contains(domain, &axis, t) {
                return false;
            }
            (0..n).all(|i| {
                [-1.0, 1.0].iter().all(|sgn| {
                    let mut p = axis.clone();
                    p[i] += sgn * seg.base.radius * (1.0 - 1e-9);
                    contains(domain, &p, t)
                })
            })
        })
    })
}

/// True iff the point lies in the open interior of some member.
pub fn contains(domain: &[InclinedCylinder], x: &[f64], t: f64) -> bool {
    domain.iter().any(|c| c.contains(x, t))
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
