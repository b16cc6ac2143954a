//! Nonnegative data becomes strictly positive.

use smp_core::solver::evolve;

use super::{config_err, extremes};
use crate::config::Setup;
use crate::error::LabError;
use crate::report::{ExperimentReport, Table};

pub(super) fn run(s: &Setup) -> Result<ExperimentReport, LabError> {
    let mut rep = ExperimentReport::new(s.scenario, s.seed);
    let coeffs = s.spec.coefficients();
    if coeffs.c.range().1 > 0.0 || coeffs.f.range() != (0.0, 0.0) {
        return Err(config_err("positivity needs c <= 0 and zero forcing"));
    }
    let grid = s.grid()?;
    let u0 = s.sample(&grid, &s.initial);
    if u0.values.iter().any(|&v| v < 0.0) || u0.values.iter().all(|&v| v == 0.0) {
        return Err(config_err("positivity needs u0 >= 0 and u0 not identically zero"));
    }
    if grid.interior_nodes().any(|i| s.boundary.eval(&grid.coords(i)) < 0.0) {
        return Err(config_err("positivity needs nonnegative lateral data"));
    }
    let lateral = |x: &[f64], _t: f64| s.boundary.eval(x);
    let trace = evolve(&s.spec, &grid, &u0, &lateral, s.t_start, s.t_end)?;

    let start = s.t_start + s.tol.t_pos;
    let mut table = Table::new("positivity", &["t", "min_interior", "max_interior"]);
    let mut min_after = f64::INFINITY;
    let mut checked = 0usize;
    for (t, u) in &trace.snapshots {
        let (lo, hi) = extremes(u, grid.interior_nodes());
        table.push(vec![*t, lo, hi]);
        if *t >= start - 1e-12 {
            min_after = min_after.min(lo);
            checked += 1;
        }
    }
    if checked == 0 {
        return Err(config_err("t_pos lies beyond t_end"));
    }
    rep.metric("dt", grid.dt);
    rep.metric("t_pos", s.tol.t_pos);
    rep.metric("min_interior_after_t_pos", min_after);
    rep.check("strictly_positive", min_after > s.tol.zero_tol);
    rep.add_table(table);
    Ok(rep)
}
