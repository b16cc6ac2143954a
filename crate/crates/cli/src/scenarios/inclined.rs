//! Tilted run against the straightened run on an exact solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smp_core::geometry::{pucci_class_residual, tilt_transform, Cylinder, InclinedCylinder, Tilted};
use smp_core::operators::{GradientTerm, Principal};
use smp_core::solver::{evolve, evolve_moving, Grid};
use smp_core::symmat::{Extremal, SymMat};
use smp_core::{Jet, SmoothField};

use super::config_err;
use crate::config::Setup;
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};
use crate::shapes::Shape;

/// `exp(a·x + rate·t)`, an exact solution of `u_t = M⁺(D²u)` when
/// `rate = Λ|a|²`.
struct ExpSolution {
    slope: Vec<f64>,
    rate: f64,
}

impl SmoothField for ExpSolution {
    fn dim(&self) -> usize {
        self.slope.len()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        let a = &self.slope;
        let value = (a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + self.rate * t).exp();
        Jet {
            value,
            gradient: a.iter().map(|p| p * value).collect(),
            hessian: &SymMat::outer(a) * value,
            time_derivative: self.rate * value,
        }
    }
}

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let coeffs = s.spec.coefficients();
    let plain = matches!(s.spec.principal(), Principal::Pucci(Extremal::Plus))
        && coeffs.gradient == GradientTerm::None
        && coeffs.c.range() == (0.0, 0.0)
        && coeffs.f.range() == (0.0, 0.0);
    if !plain {
        return Err(config_err("inclined compares against an exact solution of u_t = M+(D²u); use pucci_plus without lower-order terms"));
    }
    let slope = match &s.initial {
        Shape::Exponential { slope } => slope.clone(),
        _ => return Err(config_err("inclined needs an `exponential` initial shape")),
    };
    let ell = s.spec.ellipticity();
    let exact = ExpSolution {
        rate: ell.upper() * slope.iter().map(|a| a * a).sum::<f64>(),
        slope,
    };
    let (t0, h, dim) = (s.t_start, s.h, s.center.len());
    let ic = InclinedCylinder::new(
        Cylinder::new(s.center.clone(), s.radius, t0, s.t_end)?,
        s.drift.clone(),
    )?;
    let (_, eta) = tilt_transform(&ic);

    // comparison period: every shift η τ lands on the grid
    let speed = eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tau = if speed > 0.0 { h / speed } else { s.t_end - t0 };
    let shifts: Vec<i64> = eta.iter().map(|e| (e * tau / h).round() as i64).collect();
    if eta.iter().zip(&shifts).any(|(e, k)| (e * tau / h - *k as f64).abs() > 1e-9) {
        return Err(config_err("drift components must be integer multiples of each other so shifts stay on the grid"));
    }
    let periods = ((s.t_end - t0) / tau + 1e-9).floor() as usize;
    if periods == 0 {
        return Err(config_err("t_end is shorter than one grid-aligned shift h/|η|"));
    }
    let t_end = t0 + periods as f64 * tau;

    let straight = s.grid()?.with_frame_velocity(eta.clone())?;
    let cells = (s.radius / h).ceil() as i64 + 2;
    let lo: Vec<f64> = (0..dim)
        .map(|k| s.center[k] + (-cells + (shifts[k] * periods as i64).min(0)) as f64 * h)
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|k| s.center[k] + (cells + (shifts[k] * periods as i64).max(0)) as f64 * h)
        .collect();
    let tilted = Grid::box_grid(&lo, &hi, h).map_err(|e| config_err(format!("grid: {e}")))?;
    let dt_max = s.cfl_safety * straight.max_stable_dt(&s.spec).min(tilted.max_stable_dt(&s.spec));
    let per_period = (tau / dt_max - 1e-9).ceil().max(1.0) as usize;
    let dt = tau / per_period as f64;
    let straight = straight.with_dt(dt);
    let tilted = tilted.with_dt(dt);
    rep.metric("dt", dt);
    rep.metric("comparison_period", tau);

    let u_exact = |x: &[f64], t: f64| exact.value(x, t);
    let tilted_trace = evolve_moving(
        &s.spec,
        &tilted,
        &tilted.sample(|x| u_exact(x, t0)),
        &u_exact,
        t0,
        t_end,
        &|x, t| {
            let axis = ic.axis(t);
            x.iter().zip(&axis).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < s.radius * s.radius
        },
    )?;
    let moved = |xs: &[f64], t: f64| ic.from_straight(xs, t);
    let straight_trace = evolve(
        &s.spec,
        &straight,
        &straight.sample(|xs| u_exact(xs, t0)),
        &|xs, t| u_exact(&moved(xs, t), t),
        t0,
        t_end,
    )?;

    let mut table = Table::new(
        "inclined",
        &["t", "self_error_straight", "self_error_tilted", "discrepancy"],
    );
    let (mut err_s, mut err_t, mut disc) = (0.0f64, 0.0f64, 0.0f64);
    for p in 1..=periods {
        let level = p * per_period;
        let (t, us) = &straight_trace.snapshots[level];
        let (tt, ut) = &tilted_trace.snapshots[level];
        debug_assert!((t - tt).abs() < 1e-12);
        let (mut es, mut et, mut d) = (0.0f64, 0.0f64, 0.0f64);
        for i in straight.interior_nodes() {
            let x = moved(&straight.coords(i), *t);
            let j = tilted.nearest(&x);
            let off = tilted
                .coords(j)
                .iter()
                .zip(&x)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if off > 1e-9 * h {
                return Err(config_err("tilted and straightened nodes do not line up"));
            }
            let truth = u_exact(&x, *t);
            es = es.max((us.values[i] - truth).abs());
            et = et.max((ut.values[j] - truth).abs());
            d = d.max((us.values[i] - ut.values[j]).abs());
        }
        table.push(vec![*t, es, et, d]);
        err_s = err_s.max(es);
        err_t = err_t.max(et);
        disc = disc.max(d);
    }
    let self_error = err_s.max(err_t);
    rep.metric("self_error_straight", err_s);
    rep.metric("self_error_tilted", err_t);
    rep.metric("discrepancy", disc);
    rep.check("traces_agree", disc <= s.tol.self_error_factor * self_error);
    rep.add_table(table);

    // pointwise covariance of the class operator on the exact solution
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let field = Tilted {
        field: &exact,
        drift: eta.clone(),
        t1: t0,
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let xs: Vec<f64> = s.center.iter().map(|c| c + rng.gen_range(-0.7..0.7) * s.radius).collect();
        let t = rng.gen_range(t0..s.t_end);
        let b = rng.gen_range(0.0..2.0);
        let c = rng.gen_range(-2.0..0.0);
        let direct = pucci_class_residual(ell, b, c, &vec![0.0; dim], &exact.jet(&moved(&xs, t), t))?;
        let tilted_value = pucci_class_residual(ell, b, c, &eta, &field.jet(&xs, t))?;
        worst = worst.max((direct - tilted_value).abs() / (1.0 + direct.abs()));
    }
    rep.metric("covariance_max_error", worst);
    rep.check("operator_covariance", worst <= s.tol.covariance_tol);
    Ok(rep)
}
