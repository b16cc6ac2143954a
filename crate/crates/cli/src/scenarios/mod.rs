//! The named experiments and their defaults.

mod axis;
mod chain;
mod comparison;
mod elliptic;
mod inclined;
mod positivity;
mod truncated;

use smp_core::geometry::BrokenLine;
use smp_core::operators::{OperatorDescriptor, OperatorKind, ScalarField};
use smp_core::solver::{Grid, GridFunction};
use smp_core::symmat::SymMat;

use crate::config::{build_spec, DomainShape, ExperimentConfig, Scenario, Setup, Tolerances};
use crate::error::LabError;
use crate::report::ExperimentReport;
use crate::shapes::Shape;

pub(crate) fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn pucci_plus(dim: usize) -> OperatorDescriptor {
    OperatorDescriptor::new(OperatorKind::PucciPlus, dim).with_band(1.0, 2.0)
}

fn diagonal_bellman(dim: usize, c: f64) -> OperatorDescriptor {
    let mut d = OperatorDescriptor::new(OperatorKind::Bellman, dim).with_band(1.0, 2.0);
    let controls = if dim == 1 {
        vec![SymMat::from_diag(&[1.0]), SymMat::from_diag(&[2.0]), SymMat::from_diag(&[1.5])]
    } else {
        let mut a = vec![1.0; dim];
        a[0] = 2.0;
        let mut b = vec![1.0; dim];
        b[dim - 1] = 2.0;
        vec![SymMat::from_diag(&a), SymMat::from_diag(&b), SymMat::from_diag(&vec![1.5; dim])]
    };
    d.matrices = Some(controls);
    d.coefficients.c = ScalarField::Constant(c);
    d
}

fn default_descriptor(s: Scenario) -> OperatorDescriptor {
    match s {
        Scenario::StrongComparison => diagonal_bellman(2, 0.0),
        Scenario::Positivity => diagonal_bellman(2, -1.0),
        Scenario::TruncatedCounterexample => {
            let mut d = OperatorDescriptor::new(OperatorKind::TruncatedPucci, 2).with_band(1.0, 1.0);
            d.k = Some(1);
            d
        }
        _ => pucci_plus(2),
    }
}

/// `½ xᵀ diag(q) x`.
fn diagonal_quadratic(q: &[f64]) -> Shape {
    let n = q.len();
    Shape::Quadratic {
        matrix: (0..n)
            .map(|i| (0..n).map(|j| if i == j { q[i] } else { 0.0 }).collect())
            .collect(),
        linear: vec![],
        constant: 0.0,
    }
}

fn default_line() -> BrokenLine {
    BrokenLine::new(vec![
        (vec![0.0, 0.0], 0.0),
        (vec![0.3, 0.0], 0.05),
        (vec![0.3, 0.3], 0.1),
    ])
    .expect("valid default line")
}

fn reject(present: bool, what: &str, s: Scenario) -> Result<(), LabError> {
    if present {
        Err(config_err(format!("`{what}` is not used by scenario {s}")))
    } else {
        Ok(())
    }
}

pub(crate) fn resolve(cfg: &ExperimentConfig) -> Result<Setup, LabError> {
    let s = cfg.experiment;
    let g = &cfg.geometry;
    reject(g.drift.is_some() && s != Scenario::Inclined, "geometry.drift", s)?;
    reject(g.r0.is_some() && s != Scenario::AxisStrictness, "geometry.r0", s)?;
    reject(g.broken_line.is_some() && s != Scenario::BrokenLine, "geometry.broken_line", s)?;
    reject(
        cfg.boundary.is_some()
            && matches!(
                s,
                Scenario::Inclined | Scenario::TruncatedCounterexample | Scenario::EllipticReduction
            ),
        "boundary",
        s,
    )?;

    let descriptor = cfg.operator.clone().unwrap_or_else(|| default_descriptor(s));
    let spec = build_spec(&descriptor)?;
    let dim = spec.dim();
    if !(1..=2).contains(&dim) {
        return Err(config_err(format!("grid experiments support dimension 1 or 2, got {dim}")));
    }
    let tol = Tolerances::from_map(&cfg.tolerances)?;

    let broken_line = if s == Scenario::BrokenLine {
        let line = g.broken_line.clone().unwrap_or_else(default_line);
        if line.dim() != dim {
            return Err(config_err("broken line dimension differs from operator dimension"));
        }
        Some(line)
    } else {
        None
    };

    let center = match (&broken_line, &g.center) {
        (Some(_), Some(_)) => return Err(config_err("broken_line sets the center; drop geometry.center")),
        (Some(line), None) => line.vertices()[0].0.clone(),
        (None, Some(c)) => c.clone(),
        (None, None) => vec![0.0; dim],
    };
    if center.len() != dim {
        return Err(config_err(format!("center has length {}, expected {dim}", center.len())));
    }

    let radius = g.radius.unwrap_or(match s {
        Scenario::Inclined | Scenario::BrokenLine => 0.5,
        _ => 1.0,
    });
    let domain = g.domain.unwrap_or(match s {
        Scenario::AxisStrictness | Scenario::Inclined | Scenario::BrokenLine => DomainShape::Ball,
        _ => DomainShape::Box,
    });
    if matches!(s, Scenario::Inclined | Scenario::BrokenLine) && domain != DomainShape::Ball {
        return Err(config_err(format!("scenario {s} runs on ball sections")));
    }
    let (t_start, t_end) = match &broken_line {
        Some(line) => {
            reject(g.t_start.is_some() || g.t_end.is_some(), "geometry.t_start/t_end", s)?;
            (line.vertices()[0].1, line.upper_end().1)
        }
        None => {
            let t0 = g.t_start.unwrap_or(0.0);
            let t1 = g.t_end.unwrap_or(match s {
                Scenario::StrongComparison | Scenario::EllipticReduction => 0.05,
                _ => 0.1,
            });
            (t0, t1)
        }
    };
    if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
        return Err(config_err(format!("need t_end > t_start, got [{t_start}, {t_end}]")));
    }
    let h = cfg.grid.h.unwrap_or(match s {
        Scenario::TruncatedCounterexample | Scenario::EllipticReduction => 1.0 / 16.0,
        _ => 0.05,
    });
    let cfl_safety = cfg.grid.cfl_safety.unwrap_or(smp_core::solver::DEFAULT_CFL_SAFETY);
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(config_err(format!("cfl_safety must lie in (0, 1], got {cfl_safety}")));
    }
    if !(radius > 0.0 && h > 0.0) {
        return Err(config_err("radius and h must be positive"));
    }

    let ell = spec.ellipticity();
    let initial = match (&cfg.initial, s) {
        (Some(shape), _) => shape.clone(),
        (None, Scenario::AxisStrictness) => Shape::Bump {
            center: center.clone(),
            radius: 0.9 * radius,
            height: 1.0,
        },
        (None, Scenario::Inclined) => Shape::Exponential {
            slope: [0.5, 0.3][..dim].to_vec(),
        },
        (None, Scenario::BrokenLine) => Shape::Complement {
            offset: 1.0,
            inner: Box::new(Shape::Bump {
                center: center.clone(),
                radius: 0.6 * radius,
                height: 0.5,
            }),
        },
        (None, Scenario::StrongComparison) => Shape::CosineBump {
            center: center.clone(),
            radius: 0.8 * radius,
            height: 1.0,
        },
        (None, Scenario::Positivity) => Shape::Bump {
            center: center.clone(),
            radius: 0.3 * radius,
            height: 1.0,
        },
        (None, Scenario::TruncatedCounterexample) => {
            let mut q = vec![0.0; dim];
            q[dim - 1] = 2.0;
            diagonal_quadratic(&q)
        }
        (None, Scenario::EllipticReduction) => {
            if dim < 2 {
                return Err(config_err("elliptic_reduction needs dimension 2"));
            }
            let mut q = vec![0.0; dim];
            q[0] = 1.0;
            q[1] = -ell.upper() / ell.lower();
            diagonal_quadratic(&q)
        }
    };
    initial.validate(dim).map_err(|e| config_err(format!("initial: {e}")))?;
    let boundary = match (&cfg.boundary, s) {
        (Some(shape), _) => shape.clone(),
        (None, Scenario::BrokenLine) => Shape::Constant { value: 1.0 },
        (None, Scenario::Inclined | Scenario::TruncatedCounterexample | Scenario::EllipticReduction) => {
            initial.clone()
        }
        (None, _) => Shape::Constant { value: 0.0 },
    };
    boundary.validate(dim).map_err(|e| config_err(format!("boundary: {e}")))?;

    let drift = match &g.drift {
        Some(d) if d.len() != dim => return Err(config_err("drift length differs from dimension")),
        Some(d) => d.clone(),
        None if s == Scenario::Inclined => {
            let mut d = vec![0.0; dim];
            d[0] = 1.0;
            d
        }
        None => vec![0.0; dim],
    };
    let r0 = g.r0.unwrap_or(0.5);
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(config_err(format!("barrier radius r0 must lie in (0, 1), got {r0}")));
    }

    let setup = Setup {
        scenario: s,
        spec,
        descriptor,
        center,
        radius,
        domain,
        t_start,
        t_end,
        h,
        cfl_safety,
        initial,
        boundary,
        drift,
        r0,
        broken_line,
        tol,
        seed: cfg.seed,
    };
    setup.grid()?;
    Ok(setup)
}

impl Setup {
    /// Grid for the configured domain with `dt` from the CFL bound.
    pub fn grid(&self) -> Result<Grid, LabError> {
        self.grid_at(&self.center)
    }

    pub(crate) fn grid_at(&self, center: &[f64]) -> Result<Grid, LabError> {
        let g = match self.domain {
            DomainShape::Ball => Grid::ball(center, self.radius, self.h),
            DomainShape::Box => {
                let lo: Vec<f64> = center.iter().map(|c| c - self.radius).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + self.radius).collect();
                Grid::box_grid(&lo, &hi, self.h)
            }
        }
        .map_err(|e| config_err(format!("grid: {e}")))?;
        Ok(g.with_cfl(&self.spec, self.cfl_safety))
    }

    pub(crate) fn sample(&self, grid: &Grid, shape: &Shape) -> GridFunction {
        grid.sample(|x| shape.eval(x))
    }
}

pub(crate) fn run(setup: &Setup) -> Result<ExperimentReport, LabError> {
    let mut report = match setup.scenario {
        Scenario::AxisStrictness => axis::run(setup)?,
        Scenario::Inclined => inclined::run(setup)?,
        Scenario::BrokenLine => chain::run(setup)?,
        Scenario::StrongComparison => comparison::run(setup)?,
        Scenario::Positivity => positivity::run(setup)?,
        Scenario::TruncatedCounterexample => truncated::run(setup)?,
        Scenario::EllipticReduction => elliptic::run(setup)?,
    };
    report.metric("h", setup.h);
    Ok(report)
}

/// Largest and smallest values over the given nodes.
pub(crate) fn extremes(u: &GridFunction, nodes: impl Iterator<Item = usize> + Clone) -> (f64, f64) {
    let hi = u.max_over(nodes.clone()).map_or(f64::NAN, |m| m.0);
    let lo = u.min_over(nodes).map_or(f64::NAN, |m| m.0);
    (lo, hi)
}
