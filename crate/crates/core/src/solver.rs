//! Explicit finite-difference evolution of `u_t = F(x, t, u, Du, D²u)` on
//! masked rectangular grids in one or two space dimensions, with discrete
//! sub/supersolution residuals and a discrete comparison check.
//!
//! Second derivatives use the standard three-point differences and the
//! four-point cross difference; the gradient fed to the principal part is
//! centered. First-order terms are upwinded, which keeps the update monotone
//! for diagonal diffusion under the CFL bound of [`Grid::max_stable_dt`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::operators::{GradientTerm, OperatorSpec};
use crate::symmat::SymMat;

pub const DEFAULT_CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    Boundary,
    Outside,
}

/// Uniform grid with a node mask. Spatial coordinates are the grid's own; a
/// nonzero `frame_velocity` η means the grid moves with the axis of an
/// inclined cylinder and the evolved equation carries the extra term `+η·Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Vec<f64>,
    shape: Vec<usize>,
    h: f64,
    /// Maximal time step; the stepper uses the largest step `≤ dt` that
    /// lands exactly on the final time.
    pub dt: f64,
    pub frame_velocity: Vec<f64>,
    kinds: Vec<NodeKind>,
}

impl Grid {
    /// Axis-aligned box `[lower, upper]` with spacing `h`; edge nodes are
    /// boundary nodes.
    pub fn box_grid(lower: &[f64], upper: &[f64], h: f64) -> Result<Self> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) || upper.len() != dim {
            return Err(Error::Grid(format!("box grids support 1 or 2 dimensions, got {dim}")));
        }
        if !(h > 0.0) {
            return Err(Error::Grid("spacing must be positive".into()));
        }
        let mut shape = Vec::with_capacity(dim);
        for k in 0..dim {
            let cells = ((upper[k] - lower[k]) / h).round();
            if cells < 2.0 || ((upper[k] - lower[k]) / h - cells).abs() > 1e-9 {
                return Err(Error::Grid(format!(
                    "extent {} is not a multiple (>= 2) of h = {h}",
                    upper[k] - lower[k]
                )));
            }
            shape.push(cells as usize + 1);
        }
        let mut g = Self {
            origin: lower.to_vec(),
            shape,
            h,
            dt: 0.0,
            frame_velocity: vec![0.0; dim],
            kinds: Vec::new(),
        };
        g.kinds = (0..g.len())
            .map(|i| {
                let idx = g.multi_index(i);
                if idx.iter().zip(&g.shape).any(|(&k, &n)| k == 0 || k == n - 1) {
                    NodeKind::Boundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        Ok(g)
    }

    /// Ball `|x - center| < radius` sampled on a grid with a node at the
    /// center. Nodes of the ball whose stencil (diagonals included) leaves
    /// the ball are boundary nodes.
    pub fn ball(center: &[f64], radius: f64, h: f64) -> Result<Self> {
        let dim = center.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Grid(format!("ball grids support 1 or 2 dimensions, got {dim}")));
        }
        if !(radius > 0.0 && h > 0.0 && radius > 2.0 * h) {
            return Err(Error::Grid("need radius > 2h > 0".into()));
        }
        let half = (radius / h).ceil() as usize + 1;
        let lower: Vec<f64> = center.iter().map(|c| c - half as f64 * h).collect();
        let mut g = Self {
            origin: lower,
            shape: vec![2 * half + 1; dim],
            h,
            dt: 0.0,
            frame_velocity: vec![0.0; dim],
            kinds: Vec::new(),
        };
        let inside: Vec<bool> = (0..g.len())
            .map(|i| distance(&g.coords(i), center) < radius)
            .collect();
        g.kinds = (0..g.len())
            .map(|i| {
                if !inside[i] {
                    NodeKind::Outside
                } else if g.stencil(i).is_some_and(|s| s.iter().all(|&j| inside[j])) {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                }
            })
            .collect();
        Ok(g)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_frame_velocity(mut self, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: eta.len(),
            });
        }
        self.frame_velocity = eta;
        Ok(self)
    }

    /// Sets `dt = safety · max_stable_dt(spec)`.
    pub fn with_cfl(mut self, spec: &OperatorSpec, safety: f64) -> Self {
        self.dt = safety * self.max_stable_dt(spec);
        self
    }

    /// Monotonicity bound `1 / (2nΛ/h² + (√n b_sup + |η|₁)/h + |c|_sup)`.
    pub fn max_stable_dt(&self, spec: &OperatorSpec) -> f64 {
        let n = self.dim() as f64;
        let coeffs = spec.coefficients();
        let b = match coeffs.gradient {
            GradientTerm::None => 0.0,
            _ => coeffs.b_sup() * n.sqrt(),
        };
        let eta: f64 = self.frame_velocity.iter().map(|e| e.abs()).sum();
        let rate = 2.0 * n * spec.ellipticity().upper() / (self.h * self.h)
            + (b + eta) / self.h
            + coeffs.c_abs_sup();
        1.0 / rate
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + Clone + '_ {
        (0..self.len()).filter(|&i| self.kinds[i] == NodeKind::Interior)
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![i],
            _ => vec![i % self.shape[0], i / self.shape[0]],
        }
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .iter()
            .zip(&self.origin)
            .map(|(&k, o)| o + k as f64 * self.h)
            .collect()
    }

    /// Node nearest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = x
            .iter()
            .zip(&self.origin)
            .zip(&self.shape)
            .map(|((xi, o), &n)| (((xi - o) / self.h).round().max(0.0) as usize).min(n - 1))
            .collect();
        match self.dim() {
            1 => idx[0],
            _ => idx[0] + self.shape[0] * idx[1],
        }
    }

    /// Neighbours used by the stencil (axis and, in 2-D, diagonal), or
    /// `None` on the edge of the array.
    fn stencil(&self, i: usize) -> Option<Vec<usize>> {
        let idx = self.multi_index(i);
        if idx.iter().zip(&self.shape).any(|(&k, &n)| k == 0 || k + 1 >= n) {
            return None;
        }
        Some(match self.dim() {
            1 => vec![i - 1, i + 1],
            _ => {
                let w = self.shape[0];
                vec![
                    i - 1,
                    i + 1,
                    i - w,
                    i + w,
                    i - w - 1,
                    i - w + 1,
                    i + w - 1,
                    i + w + 1,
                ]
            }
        })
    }

    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.shape[0]
        }
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        GridFunction {
            values: (0..self.len()).map(|i| f(&self.coords(i))).collect(),
        }
    }
}

/// Values at every node of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `(max, argmax)` over the given nodes.
    pub fn max_over(&self, nodes: impl Iterator<Item = usize>) -> Option<(f64, usize)> {
        nodes
            .map(|i| (self.values[i], i))
            .fold(None, |acc, (v, i)| match acc {
                Some((best, _)) if best >= v => acc,
                _ => Some((v, i)),
            })
    }

    /// `(min, argmin)` over the given nodes.
    pub fn min_over(&self, nodes: impl Iterator<Item = usize>) -> Option<(f64, usize)> {
        nodes
            .map(|i| (self.values[i], i))
            .fold(None, |acc, (v, i)| match acc {
                Some((best, _)) if best <= v => acc,
                _ => Some((v, i)),
            })
    }
}

/// Finite differences at one node.
#[derive(Debug, Clone)]
pub struct Differences {
    pub centered: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    pub hessian: SymMat,
}

/// Finite differences at interior node `i` (every stencil neighbour exists).
pub fn differences(grid: &Grid, u: &[f64], i: usize) -> Differences {
    let n = grid.dim();
    let h = grid.h;
    let h2 = h * h;
    let mut centered = vec![0.0; n];
    let mut forward = vec![0.0; n];
    let mut backward = vec![0.0; n];
    let mut hess = SymMat::zeros(n);
    for k in 0..n {
        let s = grid.stride(k);
        let (lo, mid, hi) = (u[i - s], u[i], u[i + s]);
        forward[k] = (hi - mid) / h;
        backward[k] = (mid - lo) / h;
        centered[k] = (hi - lo) / (2.0 * h);
        hess.set(k, k, (hi - 2.0 * mid + lo) / h2);
    }
    if n == 2 {
        let w = grid.shape[0];
        let cross = (u[i + w + 1] - u[i + w - 1] - u[i - w + 1] + u[i - w - 1]) / (4.0 * h2);
        hess.set(0, 1, cross);
    }
    Differences {
        centered,
        forward,
        backward,
        hessian: hess,
    }
}

/// Monotone (upwind) discretization of the first-order terms.
fn upwind_first_order(term: &GradientTerm, b: f64, frame: &[f64], d: &Differences) -> f64 {
    let transport = |coef: f64, k: usize| {
        if coef >= 0.0 {
            coef * d.forward[k]
        } else {
            coef * d.backward[k]
        }
    };
    let mut out: f64 = frame
        .iter()
        .enumerate()
        .map(|(k, &eta)| transport(eta, k))
        .sum();
    out += match term {
        GradientTerm::None => 0.0,
        GradientTerm::Plus => {
            let s: f64 = (0..d.forward.len())
                .map(|k| d.forward[k].max(-d.backward[k]).max(0.0).powi(2))
                .sum();
            b * s.sqrt()
        }
        GradientTerm::Minus => {
            let s: f64 = (0..d.forward.len())
                .map(|k| d.forward[k].min(-d.backward[k]).min(0.0).powi(2))
                .sum();
            -b * s.sqrt()
        }
        GradientTerm::Drift(dir) => dir
            .iter()
            .enumerate()
            .map(|(k, &dk)| transport(b * dk, k))
            .sum(),
    };
    out
}

/// Discrete `F(x, t, u, D_h u, D²_h u)` at an interior node.
pub fn discrete_operator(spec: &OperatorSpec, grid: &Grid, u: &[f64], i: usize, t: f64) -> Result<f64> {
    let x = grid.coords(i);
    let d = differences(grid, u, i);
    let k = spec.coefficients().sample(&x, t)?;
    let principal = spec.eval_principal(&d.centered, &d.hessian)?;
    let first = upwind_first_order(&spec.coefficients().gradient, k.b, &grid.frame_velocity, &d);
    Ok(principal + first + k.c * u[i] + k.f)
}

/// Lateral data `g(x, t)` in grid coordinates.
pub type Lateral<'a> = &'a (dyn Fn(&[f64], f64) -> f64 + Sync);

/// Recorded evolution.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub grid: Grid,
    pub snapshots: Vec<(f64, GridFunction)>,
    /// Per stored level: `(max over interior nodes, argmax node)`.
    pub max_track: Vec<(f64, usize)>,
}

impl EvolutionTrace {
    /// Trace of an explicitly given function, e.g. a smooth witness.
    pub fn from_fn(grid: &Grid, times: &[f64], f: impl Fn(&[f64], f64) -> f64) -> Self {
        let snapshots: Vec<(f64, GridFunction)> = times
            .iter()
            .map(|&t| (t, grid.sample(|x| f(x, t))))
            .collect();
        Self::with_snapshots(grid.clone(), snapshots)
    }

    fn with_snapshots(grid: Grid, snapshots: Vec<(f64, GridFunction)>) -> Self {
        let max_track = snapshots
            .iter()
            .map(|(_, u)| u.max_over(grid.interior_nodes()).unwrap_or((f64::NAN, 0)))
            .collect();
        Self {
            grid,
            snapshots,
            max_track,
        }
    }

    /// Pointwise difference of two traces on the same grid and times.
    pub fn difference(&self, other: &EvolutionTrace) -> Result<EvolutionTrace> {
        if self.snapshots.len() != other.snapshots.len() || self.grid.len() != other.grid.len() {
            return Err(Error::Grid("traces do not line up".into()));
        }
        let snaps = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|((t, a), (_, b))| (*t, a.sub(b)))
            .collect();
        Ok(Self::with_snapshots(self.grid.clone(), snaps))
    }

    pub fn last(&self) -> &(f64, GridFunction) {
        self.snapshots.last().expect("trace is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|(t, _)| *t).collect()
    }
}

fn step_count(t0: f64, t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) {
        return Err(Error::Grid("time step must be positive (set dt or use with_cfl)".into()));
    }
    if !(t_end > t0) {
        return Err(Error::Grid(format!("t_end {t_end} must exceed t0 {t0}")));
    }
    let steps = ((t_end - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, (t_end - t0) / steps as f64))
}

/// Which nodes are updated by the scheme at a given time.
fn interior_flags(grid: &Grid) -> Vec<bool> {
    grid.kinds.iter().map(|k| *k == NodeKind::Interior).collect()
}

/// One explicit Euler step from level `u` at time `t`. Non-interior nodes
/// take the lateral data at `t + dt`.
fn step(
    spec: &OperatorSpec,
    grid: &Grid,
    interior: &[bool],
    u: &[f64],
    t: f64,
    dt: f64,
    lateral: Lateral<'_>,
) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if interior[i] {
                Ok(u[i] + dt * discrete_operator(spec, grid, u, i, t)?)
            } else {
                Ok(lateral(&grid.coords(i), t + dt))
            }
        })
        .collect()
}

fn apply_lateral(grid: &Grid, interior: &[bool], u: &mut [f64], t: f64, lateral: Lateral<'_>) {
    for (i, v) in u.iter_mut().enumerate() {
        if !interior[i] {
            *v = lateral(&grid.coords(i), t);
        }
    }
}

fn check_dims(spec: &OperatorSpec, grid: &Grid, initial: &GridFunction) -> Result<()> {
    if spec.dim() != grid.dim() {
        return Err(Error::Dimension {
            expected: grid.dim(),
            got: spec.dim(),
        });
    }
    if initial.values.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: initial.values.len(),
        });
    }
    Ok(())
}

/// Evolves `initial` from `t0` to `t_end`, storing every level. Boundary and
/// outside nodes follow `lateral` at every level, including `t0`.
pub fn evolve(
    spec: &OperatorSpec,
    grid: &Grid,
    initial: &GridFunction,
    lateral: Lateral<'_>,
    t0: f64,
    t_end: f64,
) -> Result<EvolutionTrace> {
    let interior = interior_flags(grid);
    evolve_masked(spec, grid, initial, lateral, t0, t_end, |_| interior.clone())
}

/// Like [`evolve`] on a mask that moves: `active(x, t)` selects the nodes of
/// the domain at time `t`; a node is updated when it and its whole stencil
/// are active, every other node takes the lateral data.
pub fn evolve_moving(
    spec: &OperatorSpec,
    grid: &Grid,
    initial: &GridFunction,
    lateral: Lateral<'_>,
    t0: f64,
    t_end: f64,
    active: &(dyn Fn(&[f64], f64) -> bool + Sync),
) -> Result<EvolutionTrace> {
    let base = interior_flags(grid);
    evolve_masked(spec, grid, initial, lateral, t0, t_end, |t| {
        let on: Vec<bool> = (0..grid.len()).map(|i| active(&grid.coords(i), t)).collect();
        (0..grid.len())
            .map(|i| {
                base[i]
                    && on[i]
                    && grid
                        .stencil(i)
                        .is_some_and(|s| s.iter().all(|&j| on[j]))
            })
            .collect()
    })
}

fn evolve_masked(
    spec: &OperatorSpec,
    grid: &Grid,
    initial: &GridFunction,
    lateral: Lateral<'_>,
    t0: f64,
    t_end: f64,
    mask_at: impl Fn(f64) -> Vec<bool>,
) -> Result<EvolutionTrace> {
    check_dims(spec, grid, initial)?;
    let bound = grid.max_stable_dt(spec);
    if grid.dt > bound * (1.0 + 1e-12) {
        return Err(Error::Cfl {
            dt: grid.dt,
            max_dt: bound,
        });
    }
    let (steps, dt) = step_count(t0, t_end, grid.dt)?;
    let mut u = initial.values.clone();
    let mut interior = mask_at(t0);
    apply_lateral(grid, &interior, &mut u, t0, lateral);
    let mut snapshots = Vec::with_capacity(steps + 1);
    snapshots.push((t0, GridFunction::new(u.clone())));
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let next = step(spec, grid, &interior, &u, t, dt, lateral)?;
        if let Some(node) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: k + 1, node });
        }
        let t_next = if k + 1 == steps { t_end } else { t0 + (k + 1) as f64 * dt };
        let mut next = next;
        let mask = mask_at(t_next);
        if mask != interior {
            apply_lateral(grid, &mask, &mut next, t_next, lateral);
            interior = mask;
        }
        snapshots.push((t_next, GridFunction::new(next.clone())));
        u = next;
    }
    Ok(EvolutionTrace::with_snapshots(grid.clone(), snapshots))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `min (F - u_t)`; a discrete subsolution has this `≥ -τ`.
    Sub,
    /// `max (F - u_t)`; a discrete supersolution has this `≤ τ`.
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDifference {
    /// `(u^k - u^{k-1}) / Δt` with the operator at level `k`.
    #[default]
    Backward,
    /// `(u^{k+1} - u^k) / Δt` with the operator at level `k`.
    Forward,
    /// `(u^{k+1} - u^{k-1}) / (2Δt)` with the operator at level `k`.
    Centered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub worst: f64,
    pub level: usize,
    pub node: usize,
    pub x: Vec<f64>,
    pub t: f64,
}

/// Worst discrete residual `F(u) - u_t` over interior space-time nodes.
pub fn residual(
    spec: &OperatorSpec,
    trace: &EvolutionTrace,
    mode: ResidualMode,
    time_difference: TimeDifference,
) -> Result<ResidualReport> {
    let snaps = &trace.snapshots;
    if snaps.len() < 2 {
        return Err(Error::Grid("residual needs at least two time levels".into()));
    }
    let levels: Vec<usize> = match time_difference {
        TimeDifference::Backward => (1..snaps.len()).collect(),
        TimeDifference::Forward => (0..snaps.len() - 1).collect(),
        TimeDifference::Centered => (1..snaps.len() - 1).collect(),
    };
    if levels.is_empty() {
        return Err(Error::Grid("centered residual needs three time levels".into()));
    }
    let grid = &trace.grid;
    let nodes: Vec<usize> = grid.interior_nodes().collect();
    let better = |a: f64, b: f64| match mode {
        ResidualMode::Sub => a < b,
        ResidualMode::Super => a > b,
    };
    let per_level = levels
        .par_iter()
        .map(|&k| {
            let (t, u) = (&snaps[k].0, &snaps[k].1.values);
            let (lo, hi) = match time_difference {
                TimeDifference::Backward => (k - 1, k),
                TimeDifference::Forward => (k, k + 1),
                TimeDifference::Centered => (k - 1, k + 1),
            };
            let dt = snaps[hi].0 - snaps[lo].0;
            let mut best: Option<(f64, usize)> = None;
            for &i in &nodes {
                let ut = (snaps[hi].1.values[i] - snaps[lo].1.values[i]) / dt;
                let r = discrete_operator(spec, grid, u, i, *t)? - ut;
                if best.is_none_or(|(b, _)| better(r, b)) {
                    best = Some((r, i));
                }
            }
            Ok((k, best))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Option<ResidualReport> = None;
    for (k, best) in per_level {
        if let Some((r, i)) = best {
            if out.as_ref().is_none_or(|o| better(r, o.worst)) {
                out = Some(ResidualReport {
                    worst: r,
                    level: k,
                    node: i,
                    x: grid.coords(i),
                    t: snaps[k].0,
                });
            }
        }
    }
    out.ok_or_else(|| Error::Grid("grid has no interior nodes".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingViolation {
    pub step: usize,
    pub node: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub steps: usize,
    /// Whether `dt` respected the monotonicity bound.
    pub cfl_ok: bool,
    /// `max_nodes (u - v)` after each completed step (index 0 = initial).
    pub max_gap: Vec<f64>,
    pub violation: Option<OrderingViolation>,
}

impl ComparisonReport {
    pub fn ordered(&self) -> bool {
        self.violation.is_none()
    }
}

/// Tolerance for `u ≤ v` in [`discrete_comparison`].
pub const ORDER_TOL: f64 = 1e-12;

/// Evolves `u0 ≤ v0` side by side and checks `u ≤ v` at every node after
/// every step. The CFL bound is not enforced here; a violation of ordering
/// (including non-finite values) stops the run and is reported.
#[allow(clippy::too_many_arguments)]
pub fn discrete_comparison(
    spec: &OperatorSpec,
    grid: &Grid,
    u0: &GridFunction,
    v0: &GridFunction,
    lateral_u: Lateral<'_>,
    lateral_v: Lateral<'_>,
    t0: f64,
    t_end: f64,
) -> Result<ComparisonReport> {
    check_dims(spec, grid, u0)?;
    check_dims(spec, grid, v0)?;
    let (steps, dt) = step_count(t0, t_end, grid.dt)?;
    let interior = interior_flags(grid);
    let mut u = u0.values.clone();
    let mut v = v0.values.clone();
    apply_lateral(grid, &interior, &mut u, t0, lateral_u);
    apply_lateral(grid, &interior, &mut v, t0, lateral_v);

    let gap_of = |u: &[f64], v: &[f64]| -> (f64, usize) {
        let mut worst = (f64::NEG_INFINITY, 0);
        for (i, (a, b)) in u.iter().zip(v).enumerate() {
            let g = a - b;
            if !g.is_finite() {
                return (f64::INFINITY, i);
            }
            if g > worst.0 {
                worst = (g, i);
            }
        }
        worst
    };

    let mut report = ComparisonReport {
        steps: 0,
        cfl_ok: grid.dt <= grid.max_stable_dt(spec) * (1.0 + 1e-12),
        max_gap: Vec::with_capacity(steps + 1),
        violation: None,
    };
    let (g, node) = gap_of(&u, &v);
    report.max_gap.push(g);
    if g > ORDER_TOL {
        report.violation = Some(OrderingViolation { step: 0, node, gap: g });
        return Ok(report);
    }
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        u = step(spec, grid, &interior, &u, t, dt, lateral_u)?;
        v = step(spec, grid, &interior, &v, t, dt, lateral_v)?;
        report.steps = k + 1;
        let (g, node) = gap_of(&u, &v);
        report.max_gap.push(g);
        if g > ORDER_TOL {
            report.violation = Some(OrderingViolation {
                step: k + 1,
                node,
                gap: g,
            });
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CoefficientField, Principal};
    use crate::symmat::{Ellipticity, Extremal};

    fn heat_1d() -> OperatorSpec {
        OperatorSpec::new(
            1,
            Principal::Linear(SymMat::identity(1)),
            Ellipticity::new(1.0, 1.0).unwrap(),
            CoefficientField::zero(),
        )
        .unwrap()
    }

    #[test]
    fn box_grid_mask() {
        let g = Grid::box_grid(&[0.0, 0.0], &[1.0, 1.0], 0.25).unwrap();
        assert_eq!(g.shape(), &[5, 5]);
        assert_eq!(g.interior_nodes().count(), 9);
        assert!(Grid::box_grid(&[0.0], &[1.0], 0.3).is_err());
        assert!(Grid::box_grid(&[0.0; 3], &[1.0; 3], 0.25).is_err());
    }

    #[test]
    fn ball_grid_stencils_stay_inside() {
        let g = Grid::ball(&[0.0, 0.0], 1.0, 0.1).unwrap();
        let c = g.nearest(&[0.0, 0.0]);
        assert_eq!(g.coords(c), vec![0.0, 0.0]);
        assert_eq!(g.kind(c), NodeKind::Interior);
        for i in g.interior_nodes() {
            for j in g.stencil(i).unwrap() {
                assert_ne!(g.kind(j), NodeKind::Outside);
            }
        }
    }

    #[test]
    fn differences_exact_on_quadratics() {
        let g = Grid::box_grid(&[-1.0, -1.0], &[1.0, 1.0], 0.125).unwrap();
        let f = |x: &[f64]| 0.5 * x[0] * x[0] - 1.5 * x[0] * x[1] + 2.0 * x[1] * x[1] + x[0] - 3.0;
        let u = g.sample(f);
        for i in g.interior_nodes() {
            let x = g.coords(i);
            let d = differences(&g, &u.values, i);
            assert!((d.centered[0] - (x[0] - 1.5 * x[1] + 1.0)).abs() < 1e-12);
            assert!((d.centered[1] - (-1.5 * x[0] + 4.0 * x[1])).abs() < 1e-12);
            assert!((d.hessian.get(0, 0) - 1.0).abs() < 1e-12);
            assert!((d.hessian.get(0, 1) + 1.5).abs() < 1e-12);
            assert!((d.hessian.get(1, 1) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let spec = OperatorSpec::pucci(Extremal::Plus, 2, Ellipticity::new(1.0, 2.0).unwrap());
        let g = Grid::ball(&[0.0, 0.0], 1.0, 0.1).unwrap().with_cfl(&spec, 0.9);
        let u0 = g.sample(|_| 0.0);
        let tr = evolve(&spec, &g, &u0, &|_, _| 0.0, 0.0, 0.05).unwrap();
        assert!(tr.snapshots.iter().all(|(_, u)| u.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn cfl_is_enforced() {
        let spec = heat_1d();
        let g = Grid::box_grid(&[0.0], &[1.0], 0.1).unwrap();
        let bound = g.max_stable_dt(&spec);
        let g = g.with_dt(2.0 * bound);
        let u0 = g.sample(|x| x[0] * (1.0 - x[0]));
        assert!(matches!(
            evolve(&spec, &g, &u0, &|_, _| 0.0, 0.0, 0.1),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn affine_data_has_zero_residual() {
        let spec = OperatorSpec::pucci(Extremal::Minus, 2, Ellipticity::new(1.0, 3.0).unwrap());
        let g = Grid::box_grid(&[0.0, 0.0], &[1.0, 1.0], 0.125).unwrap();
        let tr = EvolutionTrace::from_fn(&g, &[0.0, 0.01, 0.02], |x, _| 2.0 * x[0] - x[1] + 0.5);
        for mode in [ResidualMode::Sub, ResidualMode::Super] {
            let r = residual(&spec, &tr, mode, TimeDifference::Backward).unwrap();
            assert!(r.worst.abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_constant_keeps_gap() {
        let spec = heat_1d();
        let g = Grid::box_grid(&[0.0], &[1.0], 0.05).unwrap().with_cfl(&spec, 0.9);
        let u0 = g.sample(|x| (3.0 * x[0]).sin());
        let v0 = GridFunction::new(u0.values.iter().map(|v| v + 1.0).collect());
        let rep = discrete_comparison(
            &spec,
            &g,
            &u0,
            &v0,
            &|x, _| (3.0 * x[0]).sin(),
            &|x, _| (3.0 * x[0]).sin() + 1.0,
            0.0,
            0.2,
        )
        .unwrap();
        assert!(rep.ordered());
        assert!(rep.max_gap.iter().all(|&g| g <= -1.0 + 1e-12));
    }
}
