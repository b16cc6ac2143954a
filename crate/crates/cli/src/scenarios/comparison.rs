//! The difference of two solutions is a Pucci subsolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smp_core::operators::{CoefficientField, GradientTerm, OperatorSpec, ScalarField};
use smp_core::solver::{evolve, residual, ResidualMode, TimeDifference};
use smp_core::symmat::Extremal;

use crate::config::Setup;
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let grid = s.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let amp = rng.gen_range(0.05..0.2);
    let freq: Vec<f64> = (0..2).map(|_| rng.gen_range(1.0..3.0)).collect();
    let phase: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let dim = grid.dim();
    // smooth and ≥ amp/2 > 0
    let lift = move |x: &[f64]| {
        let y = if dim > 1 { x[1] } else { 0.0 };
        amp * (1.5 + (freq[0] * x[0] + phase[0]).sin() * (freq[1] * y + phase[1]).cos())
    };
    let u0 = s.sample(&grid, &s.initial);
    let v0 = grid.sample(|x| s.initial.eval(x) + lift(x));
    let lat_u = |x: &[f64], _t: f64| s.boundary.eval(x);
    let lat_v = |x: &[f64], _t: f64| s.boundary.eval(x) + lift(x);
    let tu = evolve(&s.spec, &grid, &u0, &lat_u, s.t_start, s.t_end)?;
    let tv = evolve(&s.spec, &grid, &v0, &lat_v, s.t_start, s.t_end)?;
    let w = tu.difference(&tv)?;

    // M⁺ with the same band and the lower-order terms that survive differencing
    let coeffs = s.spec.coefficients();
    let reference = OperatorSpec::pucci(Extremal::Plus, dim, s.spec.ellipticity()).with_coefficients(
        CoefficientField {
            f: ScalarField::Constant(0.0),
            gradient: match &coeffs.gradient {
                GradientTerm::Minus => GradientTerm::Plus,
                g => g.clone(),
            },
            ..coeffs.clone()
        },
    )?;
    let sub = residual(&reference, &w, ResidualMode::Sub, TimeDifference::Forward)?;
    rep.metric("w_sub_residual", sub.worst);
    rep.check("w_is_discrete_subsolution", sub.worst >= -s.tol.tau);

    let mut table = Table::new("strong_comparison", &["t", "max_w", "min_w"]);
    let mut max_w = f64::NEG_INFINITY;
    for (t, u) in &w.snapshots {
        let hi = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
        max_w = max_w.max(hi);
        table.push(vec![*t, hi, lo]);
    }
    rep.metric("max_w", max_w);
    rep.metric("dt", grid.dt);
    rep.metric("steps", (tu.snapshots.len() - 1) as f64);
    rep.check("w_nonpositive", max_w <= s.tol.zero_tol);
    rep.add_table(table);

    let twin = evolve(&s.spec, &grid, &u0, &lat_u, s.t_start, s.t_end)?;
    let zero = tu.difference(&twin)?;
    let max_abs = zero
        .snapshots
        .iter()
        .flat_map(|(_, u)| u.values.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    rep.metric("identical_data_max_abs_w", max_abs);
    rep.check("identical_data_zero", max_abs <= 1e-12);
    Ok(rep)
}
